//! Complex planes (images or k-space) and real magnitude images.

use kiebm_grad::{RealTensor, Scalar};
use num_complex::Complex64;

use crate::error::{shape_err, Error, Result};

/// `planes x height x width` complex array. A single image has one plane;
/// a coil stack has one plane per receiver coil.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexTensor {
    planes: usize,
    height: usize,
    width: usize,
    data: Vec<Complex64>,
}

/// Per-coil images or per-coil k-space.
pub type CoilStack = ComplexTensor;

impl ComplexTensor {
    pub fn new(planes: usize, height: usize, width: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != planes * height * width {
            return shape_err(format!(
                "{} complex values for shape {planes}x{height}x{width}",
                data.len()
            ));
        }
        if let Some(i) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical(format!("non-finite complex value at {i}")));
        }
        Ok(Self { planes, height, width, data })
    }

    pub fn zeros(planes: usize, height: usize, width: usize) -> Self {
        Self {
            planes,
            height,
            width,
            data: vec![Complex64::new(0.0, 0.0); planes * height * width],
        }
    }

    pub fn from_planes(planes: &[ComplexTensor]) -> Result<Self> {
        let first = planes.first().ok_or_else(|| Error::Shape("no planes".into()))?;
        let mut out = Self::zeros(0, first.height, first.width);
        for p in planes {
            if p.height != first.height || p.width != first.width {
                return shape_err("planes differ in size");
            }
            out.planes += p.planes;
            out.data.extend_from_slice(&p.data);
        }
        Ok(out)
    }

    /// Real image lifted to a one-plane complex tensor.
    pub fn from_real(img: &RealImage) -> Self {
        Self {
            planes: 1,
            height: img.height(),
            width: img.width(),
            data: img.data().iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub fn planes(&self) -> usize {
        self.planes
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.planes, self.height, self.width)
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn plane(&self, c: usize) -> &[Complex64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [Complex64] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn plane_tensor(&self, c: usize) -> Self {
        Self {
            planes: 1,
            height: self.height,
            width: self.width,
            data: self.plane(c).to_vec(),
        }
    }

    pub fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return shape_err(format!("shape {:?} vs {:?}", self.dims(), other.dims()));
        }
        Ok(())
    }

    pub fn check_plane_dims(&self, height: usize, width: usize) -> Result<()> {
        if (self.height, self.width) != (height, width) {
            return shape_err(format!(
                "plane {}x{} vs {}x{}",
                self.height, self.width, height, width
            ));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            data: self.data.iter().map(|&z| f(z)).collect(),
            ..self.clone()
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        self.map(|z| z * a)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(Self {
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
            ..self.clone()
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(Self {
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
            ..self.clone()
        })
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Hermitian inner product `sum conj(self) * other`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_same_dims(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Two-channel network view: `(planes, 2, h, w)` with real then imaginary
    /// channels, each divided by `scale`.
    pub fn to_channels<T: Scalar>(&self, scale: f64) -> Result<RealTensor<T>> {
        let n = self.plane_len();
        let inv = 1.0 / scale;
        let mut out = Vec::with_capacity(2 * self.data.len());
        for c in 0..self.planes {
            let p = &self.data[c * n..(c + 1) * n];
            out.extend(p.iter().map(|z| T::from_f64_lossy(z.re * inv)));
            out.extend(p.iter().map(|z| T::from_f64_lossy(z.im * inv)));
        }
        Ok(RealTensor::new([self.planes, 2, self.height, self.width], out)?)
    }

    /// Inverse of [`ComplexTensor::to_channels`].
    pub fn from_channels<T: Scalar>(t: &RealTensor<T>, scale: f64) -> Result<Self> {
        let [b, ch, h, w] = t.shape();
        if ch != 2 {
            return shape_err(format!("expected 2 channels, got {ch}"));
        }
        let n = h * w;
        let mut data = Vec::with_capacity(b * n);
        for i in 0..b {
            let item = t.item(i);
            let (re, im) = item.split_at(n);
            data.extend(
                re.iter()
                    .zip(im)
                    .map(|(&r, &m)| Complex64::new(r.to_f64_lossy() * scale, m.to_f64_lossy() * scale)),
            );
        }
        Self::new(b, h, w, data)
    }

    pub fn magnitude(&self) -> Result<RealImage> {
        if self.planes != 1 {
            return shape_err(format!("magnitude of a {}-plane tensor", self.planes));
        }
        RealImage::new(self.height, self.width, self.data.iter().map(|z| z.norm()).collect())
    }
}

/// Real-valued `height x width` image.
#[derive(Debug, Clone, PartialEq)]
pub struct RealImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl RealImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return shape_err(format!("{} values for {height}x{width} image", data.len()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite pixel at {i}")));
        }
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            data: self.data.iter().map(|v| v * a).collect(),
            ..self.clone()
        }
    }

    pub fn check_same_dims(&self, other: &Self) -> Result<()> {
        if (self.height, self.width) != (other.height, other.width) {
            return shape_err(format!(
                "image {}x{} vs {}x{}",
                self.height, self.width, other.height, other.width
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_view_round_trips_bit_exactly() {
        let data: Vec<Complex64> = (0..2 * 4 * 4)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let z = ComplexTensor::new(2, 4, 4, data).unwrap();
        let t = z.to_channels::<f64>(1.0).unwrap();
        assert_eq!(t.shape(), [2, 2, 4, 4]);
        assert_eq!(ComplexTensor::from_channels(&t, 1.0).unwrap(), z);
    }

    #[test]
    fn rejects_bad_lengths() {
        assert!(ComplexTensor::new(1, 2, 2, vec![Complex64::default(); 3]).is_err());
        assert!(RealImage::new(2, 2, vec![0.0, 1.0, f64::NAN, 0.0]).is_err());
    }
}
