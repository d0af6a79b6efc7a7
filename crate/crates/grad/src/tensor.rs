use crate::error::{GradError, Result};
use crate::scalar::Scalar;

/// Dense `(batch, channels, height, width)` tensor, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RealTensor<T> {
    shape: [usize; 4],
    data: Vec<T>,
}

impl<T: Scalar> RealTensor<T> {
    /// Builds a tensor, rejecting length mismatches and non-finite entries.
    pub fn new(shape: [usize; 4], data: Vec<T>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(GradError::Shape(format!(
                "data length {} does not match shape {:?} ({} elements)",
                data.len(),
                shape,
                expected
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(GradError::NonFinite { index });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: [usize; 4]) -> Self {
        Self {
            shape,
            data: vec![T::zero(); shape.iter().product()],
        }
    }

    pub fn full(shape: [usize; 4], value: T) -> Self {
        Self {
            shape,
            data: vec![value; shape.iter().product()],
        }
    }

    pub fn from_fn(shape: [usize; 4], mut f: impl FnMut(usize) -> T) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape, (0..n).map(&mut f).collect())
    }

    /// Internal constructor for results of finite-preserving kernels.
    pub(crate) fn from_parts(shape: [usize; 4], data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        Self { shape, data }
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn channels(&self) -> usize {
        self.shape[1]
    }

    pub fn height(&self) -> usize {
        self.shape[2]
    }

    pub fn width(&self) -> usize {
        self.shape[3]
    }

    /// Elements per batch item.
    pub fn item_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Mutable access to the raw buffer. Callers keep entries finite.
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn item(&self, b: usize) -> &[T] {
        let n = self.item_len();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn item_mut(&mut self, b: usize) -> &mut [T] {
        let n = self.item_len();
        &mut self.data[b * n..(b + 1) * n]
    }

    /// Copies batch items `[start, start + count)` into a new tensor.
    pub fn slice_batch(&self, start: usize, count: usize) -> Result<Self> {
        if start + count > self.batch() {
            return Err(GradError::Shape(format!(
                "batch slice {}..{} out of range for batch {}",
                start,
                start + count,
                self.batch()
            )));
        }
        let n = self.item_len();
        let mut shape = self.shape;
        shape[0] = count;
        Ok(Self::from_parts(
            shape,
            self.data[start * n..(start + count) * n].to_vec(),
        ))
    }

    /// Concatenates tensors along the batch axis.
    pub fn concat_batch(parts: &[&Self]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| GradError::Shape("concat of zero tensors".into()))?;
        let mut shape = first.shape;
        shape[0] = 0;
        let mut data = Vec::new();
        for p in parts {
            if p.shape[1..] != first.shape[1..] {
                return Err(GradError::Shape(format!(
                    "cannot concatenate {:?} with {:?}",
                    p.shape, first.shape
                )));
            }
            shape[0] += p.shape[0];
            data.extend_from_slice(&p.data);
        }
        Ok(Self::from_parts(shape, data))
    }

    pub fn scale(&self, a: T) -> Self {
        Self::from_parts(self.shape, self.data.iter().map(|&v| v * a).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self::from_parts(
            self.shape,
            self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self::from_parts(
            self.shape,
            self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect(),
        ))
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> RealTensor<U> {
        RealTensor::from_parts(
            self.shape,
            self.data
                .iter()
                .map(|v| U::from_f64_lossy(v.to_f64_lossy()))
                .collect(),
        )
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(GradError::Shape(format!(
                "shape mismatch {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_length() {
        let err = RealTensor::<f64>::new([1, 1, 2, 2], vec![0.0; 3]).unwrap_err();
        assert!(matches!(err, GradError::Shape(_)));
    }

    #[test]
    fn rejects_nan() {
        let err = RealTensor::<f64>::new([1, 1, 1, 2], vec![0.0, f64::NAN]).unwrap_err();
        assert_eq!(err, GradError::NonFinite { index: 1 });
    }

    #[test]
    fn batch_slicing_round_trips() {
        let t = RealTensor::<f64>::from_fn([3, 1, 2, 2], |i| i as f64).unwrap();
        let a = t.slice_batch(0, 1).unwrap();
        let b = t.slice_batch(1, 2).unwrap();
        assert_eq!(RealTensor::concat_batch(&[&a, &b]).unwrap(), t);
        assert!(t.slice_batch(2, 2).is_err());
    }
}
