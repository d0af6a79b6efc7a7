//! k-space weighting `w(v) = (r kx^2 + r ky^2)^p`, a high-pass filter that
//! evens out the dynamic range between low and high frequencies.

use serde::{Deserialize, Serialize};

use crate::complex::ComplexTensor;
use crate::error::{Error, Result};
use crate::mri::fft::centered_freq;

/// Weight parameters; `floor` is relative to the largest unclamped weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightParams {
    pub r: f64,
    pub p: f64,
    pub floor: f64,
}

impl Default for WeightParams {
    fn default() -> Self {
        Self {
            r: 0.1,
            p: 0.5,
            floor: 1e-3,
        }
    }
}

impl WeightParams {
    /// Weight matrix with the floor resolved as `floor * max(raw)`
    /// (or `floor` itself when every raw weight is zero).
    pub fn build(&self, height: usize, width: usize) -> Result<WeightMatrix> {
        if !(self.floor > 0.0) {
            return Err(Error::Parameter(format!("weight floor must be > 0, got {}", self.floor)));
        }
        let raw = weight_matrix(self.r, self.p, height, width, f64::MIN_POSITIVE)?;
        let peak = raw.values.iter().copied().fold(0.0, f64::max);
        let floor = if peak > f64::MIN_POSITIVE { self.floor * peak } else { self.floor };
        weight_matrix(self.r, self.p, height, width, floor)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    height: usize,
    width: usize,
    values: Vec<f64>,
    pub r: f64,
    pub p: f64,
    pub floor: f64,
}

/// `max((r kx^2 + r ky^2)^p, floor)` on centred integer frequencies.
pub fn weight_matrix(r: f64, p: f64, height: usize, width: usize, floor: f64) -> Result<WeightMatrix> {
    if !(r >= 0.0) || !(p >= 0.0) {
        return Err(Error::Parameter(format!("weight r and p must be >= 0 (r={r}, p={p})")));
    }
    if !(floor > 0.0) {
        return Err(Error::Parameter(format!("weight floor must be > 0, got {floor}")));
    }
    let mut values = Vec::with_capacity(height * width);
    for y in 0..height {
        let ky = centered_freq(y, height) as f64;
        for x in 0..width {
            let kx = centered_freq(x, width) as f64;
            values.push((r * kx * kx + r * ky * ky).powf(p).max(floor));
        }
    }
    Ok(WeightMatrix {
        height,
        width,
        values,
        r,
        p,
        floor,
    })
}

impl WeightMatrix {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Multiplies every plane by the weights.
    pub fn apply(&self, k: &ComplexTensor) -> Result<ComplexTensor> {
        k.check_plane_dims(self.height, self.width)?;
        let mut out = k.clone();
        let n = k.plane_len();
        for (i, z) in out.data_mut().iter_mut().enumerate() {
            *z *= self.values[i % n];
        }
        Ok(out)
    }

    /// Divides every plane by the weights.
    pub fn unapply(&self, k: &ComplexTensor) -> Result<ComplexTensor> {
        k.check_plane_dims(self.height, self.width)?;
        let mut out = k.clone();
        let n = k.plane_len();
        for (i, z) in out.data_mut().iter_mut().enumerate() {
            *z /= self.values[i % n];
        }
        Ok(out)
    }
}
