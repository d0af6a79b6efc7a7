use crate::error::{GradError, Result};
use crate::scalar::Scalar;

/// One named parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> ParamTensor<T> {
    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            name: name.into(),
            shape,
            data: vec![T::zero(); n],
        }
    }
}

/// Index of a parameter tensor inside a [`LayerParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// Ordered parameter set of the energy network (also used for gradients
/// and optimizer moments, which mirror its layout).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerParams<T> {
    tensors: Vec<ParamTensor<T>>,
}

impl<T: Scalar> LayerParams<T> {
    pub fn new() -> Self {
        Self { tensors: Vec::new() }
    }

    pub fn from_tensors(tensors: Vec<ParamTensor<T>>) -> Result<Self> {
        for t in &tensors {
            let n: usize = t.shape.iter().product();
            if n != t.data.len() {
                return Err(GradError::Shape(format!(
                    "parameter {} has {} entries, shape {:?} needs {}",
                    t.name,
                    t.data.len(),
                    t.shape,
                    n
                )));
            }
        }
        Ok(Self { tensors })
    }

    pub fn push(&mut self, tensor: ParamTensor<T>) -> ParamId {
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &ParamTensor<T> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut ParamTensor<T> {
        &mut self.tensors[id.0]
    }

    pub fn find(&self, name: &str) -> Option<&ParamTensor<T>> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn tensors(&self) -> &[ParamTensor<T>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [ParamTensor<T>] {
        &mut self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalars.
    pub fn numel(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            tensors: self
                .tensors
                .iter()
                .map(|t| ParamTensor::zeros(t.name.clone(), t.shape.clone()))
                .collect(),
        }
    }

    pub fn check_layout(&self, other: &Self) -> Result<()> {
        if self.tensors.len() != other.tensors.len() {
            return Err(GradError::Shape(format!(
                "parameter count {} vs {}",
                self.tensors.len(),
                other.tensors.len()
            )));
        }
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            if a.shape != b.shape || a.name != b.name {
                return Err(GradError::Shape(format!(
                    "parameter {} {:?} vs {} {:?}",
                    a.name, a.shape, b.name, b.shape
                )));
            }
        }
        Ok(())
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: T, other: &Self) -> Result<()> {
        self.check_layout(other)?;
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, &y) in a.data.iter_mut().zip(&b.data) {
                *x += alpha * y;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: T) {
        for t in &mut self.tensors {
            for x in &mut t.data {
                *x *= alpha;
            }
        }
    }

    pub fn iter_values(&self) -> impl Iterator<Item = &T> {
        self.tensors.iter().flat_map(|t| t.data.iter())
    }

    pub fn iter_values_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.tensors.iter_mut().flat_map(|t| t.data.iter_mut())
    }

    pub fn norm(&self) -> T {
        self.iter_values().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.iter_values().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> LayerParams<U> {
        LayerParams {
            tensors: self
                .tensors
                .iter()
                .map(|t| ParamTensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    data: t.data.iter().map(|v| U::from_f64_lossy(v.to_f64_lossy())).collect(),
                })
                .collect(),
        }
    }
}
