//! Langevin dynamics `x' = x - (step/2) clip(dE/dx) + noise`.

use kiebm_grad::{RealTensor, Scalar};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ebm::model::Energy;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LangevinConfig {
    /// Step size `lambda`; the injected noise has variance `noise_scale^2 * step`.
    pub step: f64,
    /// Iterations per call to [`langevin_sample`].
    pub steps: usize,
    pub noise_scale: f64,
    /// Per-element clamp on `dE/dx`.
    pub grad_clip: f64,
    /// Geometric decay of `noise_scale` per outer reconstruction iteration.
    #[serde(default = "unit_anneal")]
    pub anneal: f64,
    /// Box every iterate is projected onto after each step.
    #[serde(default)]
    pub clamp: Option<(f64, f64)>,
}

impl Default for LangevinConfig {
    fn default() -> Self {
        Self {
            step: 1e-2,
            steps: 60,
            noise_scale: 1.0,
            grad_clip: 0.01,
            anneal: 1.0,
            clamp: None,
        }
    }
}

fn unit_anneal() -> f64 {
    1.0
}

impl LangevinConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("langevin: {m}")));
        if !(self.step >= 0.0) {
            return bad("step must be >= 0");
        }
        if self.steps < 1 {
            return bad("steps must be >= 1");
        }
        if !(self.noise_scale >= 0.0) {
            return bad("noise_scale must be >= 0");
        }
        if !(self.grad_clip > 0.0) {
            return bad("grad_clip must be > 0");
        }
        if !(self.anneal > 0.0 && self.anneal <= 1.0) {
            return bad("anneal must lie in (0, 1]");
        }
        if let Some((lo, hi)) = self.clamp {
            if !(lo < hi) {
                return bad("clamp must be an increasing pair");
            }
        }
        Ok(())
    }

    /// Copy with the noise annealed for outer iteration `t` (0-based).
    pub fn annealed(&self, t: usize) -> Self {
        Self {
            noise_scale: self.noise_scale * self.anneal.powi(t as i32),
            ..*self
        }
    }
}

/// One Langevin update. Noise is always drawn so that the RNG stream does
/// not depend on `noise_scale`.
pub fn langevin_step<T: Scalar, E: Energy<T> + ?Sized, R: Rng + ?Sized>(
    model: &E,
    x: &RealTensor<T>,
    step: f64,
    noise_scale: f64,
    grad_clip: f64,
    rng: &mut R,
) -> Result<RealTensor<T>> {
    let (_, grad) = model.energy_grad(x)?;
    let half = T::from_f64_lossy(0.5 * step);
    let sigma = noise_scale * step.sqrt();
    let clip = T::from_f64_lossy(grad_clip.min(f64::MAX));
    let mut out = x.clone();
    for (v, &g) in out.data_mut().iter_mut().zip(grad.data()) {
        if !g.is_finite() {
            return Err(Error::Numerical("non-finite energy gradient in Langevin step".into()));
        }
        let z: f64 = StandardNormal.sample(rng);
        let g = g.max(-clip).min(clip);
        *v = *v - half * g + T::from_f64_lossy(sigma * z);
    }
    if !out.is_finite() {
        return Err(Error::Numerical("Langevin iterate became non-finite".into()));
    }
    Ok(out)
}

/// Runs `config.steps` Langevin updates from `x0`.
pub fn langevin_sample<T: Scalar, E: Energy<T> + ?Sized, R: Rng + ?Sized>(
    model: &E,
    x0: &RealTensor<T>,
    config: &LangevinConfig,
    rng: &mut R,
) -> Result<RealTensor<T>> {
    config.validate()?;
    let mut x = x0.clone();
    for _ in 0..config.steps {
        x = langevin_step(model, &x, config.step, config.noise_scale, config.grad_clip, rng)?;
        if let Some((lo, hi)) = config.clamp {
            let (lo, hi) = (T::from_f64_lossy(lo), T::from_f64_lossy(hi));
            x.data_mut().iter_mut().for_each(|v| *v = v.max(lo).min(hi));
        }
    }
    Ok(x)
}
