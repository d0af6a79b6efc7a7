//! Coil sensitivities and root-sum-of-squares coil combination.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::complex::{CoilStack, ComplexTensor, RealImage};
use crate::error::{shape_err, Error, Result};

/// Per-coil complex sensitivity profiles `S_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityMaps {
    maps: CoilStack,
}

impl SensitivityMaps {
    pub fn new(maps: CoilStack) -> Result<Self> {
        if maps.planes() == 0 {
            return Err(Error::Parameter("sensitivity maps need at least one coil".into()));
        }
        Ok(Self { maps })
    }

    /// Divides by the per-pixel root-sum-of-squares so that
    /// `sum_c |S_c|^2 = 1` wherever any coil is non-zero.
    pub fn normalized(maps: CoilStack) -> Result<Self> {
        let mut maps = Self::new(maps)?.maps;
        let (c, _, _) = maps.dims();
        let n = maps.plane_len();
        for i in 0..n {
            let ss: f64 = (0..c).map(|k| maps.data()[k * n + i].norm_sqr()).sum();
            if ss > 0.0 {
                let inv = 1.0 / ss.sqrt();
                for k in 0..c {
                    maps.data_mut()[k * n + i] *= inv;
                }
            }
        }
        Ok(Self { maps })
    }

    pub fn maps(&self) -> &CoilStack {
        &self.maps
    }

    pub fn coils(&self) -> usize {
        self.maps.planes()
    }

    pub fn height(&self) -> usize {
        self.maps.height()
    }

    pub fn width(&self) -> usize {
        self.maps.width()
    }
}

/// `sqrt(sum_c |I_c|^2)` per pixel.
pub fn sos_combine(coils: &CoilStack) -> Result<RealImage> {
    let (c, h, w) = coils.dims();
    if c == 0 {
        return Err(Error::Parameter("cannot combine an empty coil stack".into()));
    }
    let n = h * w;
    let data = (0..n)
        .map(|i| (0..c).map(|k| coils.data()[k * n + i].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    RealImage::new(h, w, data)
}

/// `I_c = S_c * I` for a one-plane image `I`.
pub fn apply_sensitivities(image: &ComplexTensor, s: &SensitivityMaps) -> Result<CoilStack> {
    if image.planes() != 1 {
        return shape_err(format!("expected one image plane, got {}", image.planes()));
    }
    image.check_plane_dims(s.height(), s.width())?;
    let mut out = s.maps.clone();
    let n = out.plane_len();
    for (i, z) in out.data_mut().iter_mut().enumerate() {
        *z *= image.data()[i % n];
    }
    Ok(out)
}

/// Adjoint of [`apply_sensitivities`]: `sum_c conj(S_c) * I_c`.
pub fn adjoint_sensitivities(coils: &CoilStack, s: &SensitivityMaps) -> Result<ComplexTensor> {
    coils.check_same_dims(&s.maps)?;
    let (c, h, w) = coils.dims();
    let n = h * w;
    let mut out = ComplexTensor::zeros(1, h, w);
    for k in 0..c {
        let sp = s.maps.plane(k);
        let cp = coils.plane(k);
        for (o, (a, b)) in out.data_mut().iter_mut().zip(sp.iter().zip(cp)) {
            *o += a.conj() * b;
        }
    }
    debug_assert_eq!(out.plane_len(), n);
    Ok(out)
}

/// Smooth synthetic coil profiles: Gaussian lobes centred just outside the
/// field of view at equally spaced angles (offset by `rotation` radians),
/// each with a gentle linear phase ramp, then SOS-normalised.
pub fn synth_sensitivities_rotated(coils: usize, height: usize, width: usize, rotation: f64) -> Result<SensitivityMaps> {
    if coils == 0 {
        return Err(Error::Parameter("need at least one coil".into()));
    }
    let mut maps = ComplexTensor::zeros(coils, height, width);
    let sigma2 = 2.0 * 0.9 * 0.9;
    for c in 0..coils {
        let theta = rotation + 2.0 * PI * c as f64 / coils as f64;
        let (cx, cy) = (1.2 * theta.cos(), 1.2 * theta.sin());
        let plane = maps.plane_mut(c);
        for y in 0..height {
            let v = 1.0 - (2 * y + 1) as f64 / height as f64;
            for x in 0..width {
                let u = (2 * x + 1) as f64 / width as f64 - 1.0;
                let d2 = (u - cx).powi(2) + (v - cy).powi(2);
                let mag = (-d2 / sigma2).exp();
                let phase = theta + 0.5 * PI * 0.5 * (u * theta.cos() + v * theta.sin());
                plane[y * width + x] = Complex64::from_polar(mag, phase);
            }
        }
    }
    SensitivityMaps::normalized(maps)
}

pub fn synth_sensitivities(coils: usize, height: usize, width: usize) -> Result<SensitivityMaps> {
    synth_sensitivities_rotated(coils, height, width, 0.0)
}
