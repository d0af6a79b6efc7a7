//! Maximum-likelihood training with replay-buffer-initialised Langevin
//! negatives.

use kiebm_grad::{LayerParams, RealTensor, Scalar};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ebm::adam::AdamState;
use crate::ebm::buffer::ReplayBuffer;
use crate::ebm::langevin::{langevin_sample, LangevinConfig};
use crate::ebm::model::TrainableEnergy;
use crate::error::{shape_err, Error, Result};

/// `mean_b dE(x+_b)/dtheta - mean_b dE(x-_b)/dtheta`.
pub fn ml_gradient<T: Scalar, M: TrainableEnergy<T> + ?Sized>(
    model: &M,
    positive: &RealTensor<T>,
    negative: &RealTensor<T>,
) -> Result<LayerParams<T>> {
    Ok(contrastive_gradient(model, positive, negative, 0.0)?.grad)
}

/// Output of [`contrastive_gradient`].
#[derive(Debug, Clone)]
pub struct Contrastive<T> {
    pub grad: LayerParams<T>,
    pub loss: f64,
    pub mean_pos: f64,
    pub mean_neg: f64,
}

/// Gradient of `mean E(x+) - mean E(x-) + alpha (mean E(x+)^2 + mean E(x-)^2)`.
pub fn contrastive_gradient<T: Scalar, M: TrainableEnergy<T> + ?Sized>(
    model: &M,
    positive: &RealTensor<T>,
    negative: &RealTensor<T>,
    alpha: f64,
) -> Result<Contrastive<T>> {
    let (np, nn) = (positive.batch(), negative.batch());
    if np == 0 || nn == 0 {
        return Err(Error::Parameter("contrastive batches must be non-empty".into()));
    }
    if positive.shape()[1..] != negative.shape()[1..] {
        return shape_err(format!(
            "positive {:?} and negative {:?} batches differ",
            positive.shape(),
            negative.shape()
        ));
    }
    let both = RealTensor::concat_batch(&[positive, negative])?;
    let mut weights = |e: &[T]| -> Vec<T> {
        e.iter()
            .enumerate()
            .map(|(i, &ei)| {
                let ei = ei.to_f64_lossy();
                let w = if i < np {
                    (1.0 + 2.0 * alpha * ei) / np as f64
                } else {
                    (-1.0 + 2.0 * alpha * ei) / nn as f64
                };
                T::from_f64_lossy(w)
            })
            .collect()
    };
    let (energies, grad) = model.weighted_param_grad(&both, &mut weights)?;
    let e: Vec<f64> = energies.iter().map(|v| v.to_f64_lossy()).collect();
    let mean_pos = e[..np].iter().sum::<f64>() / np as f64;
    let mean_neg = e[np..].iter().sum::<f64>() / nn as f64;
    let sq_pos = e[..np].iter().map(|v| v * v).sum::<f64>() / np as f64;
    let sq_neg = e[np..].iter().map(|v| v * v).sum::<f64>() / nn as f64;
    Ok(Contrastive {
        grad,
        loss: mean_pos - mean_neg + alpha * (sq_pos + sq_neg),
        mean_pos,
        mean_neg,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Optimizer steps.
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub langevin: LangevinConfig,
    pub buffer_capacity: usize,
    /// Probability of starting a negative chain from the buffer.
    pub buffer_fraction: f64,
    /// Value range of the uniform-noise chain starts.
    pub noise_range: (f64, f64),
    /// Uniform perturbation amplitudes for positives, as fractions of the
    /// noise range width; one is drawn per batch.
    pub data_noise_levels: Vec<f64>,
    /// Coefficient of the squared-energy regulariser.
    pub energy_penalty: f64,
    /// Square crop size for positives and negatives (`None` = full size).
    pub crop: Option<usize>,
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            batch: 16,
            lr: 3e-4,
            langevin: LangevinConfig {
                clamp: Some((-1.0, 1.0)),
                ..LangevinConfig::default()
            },
            buffer_capacity: 10_000,
            buffer_fraction: 0.95,
            noise_range: (-1.0, 1.0),
            data_noise_levels: vec![0.0, 1.0 / 256.0, 2.0 / 256.0, 4.0 / 256.0],
            energy_penalty: 0.1,
            crop: None,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.langevin.validate()?;
        let bad = |m: String| Err(Error::Config(format!("train: {m}")));
        if self.batch == 0 {
            return bad("batch must be >= 1".into());
        }
        if !(self.lr > 0.0) {
            return bad(format!("lr must be > 0, got {}", self.lr));
        }
        if !(0.0..=1.0).contains(&self.buffer_fraction) {
            return bad("buffer_fraction must lie in [0, 1]".into());
        }
        if !(self.noise_range.1 > self.noise_range.0) {
            return bad("noise_range must be increasing".into());
        }
        if self.data_noise_levels.is_empty() || self.data_noise_levels.iter().any(|v| !(*v >= 0.0)) {
            return bad("data_noise_levels must be non-empty and non-negative".into());
        }
        if self.buffer_capacity == 0 {
            return bad("buffer_capacity must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    /// Contrastive loss per step.
    pub losses: Vec<f64>,
    pub mean_pos: Vec<f64>,
    pub mean_neg: Vec<f64>,
    /// Root-mean-square value of the refined negatives.
    pub neg_rms: Vec<f64>,
    /// Negative chains started from the buffer / total chains started.
    pub buffer_draws: usize,
    pub total_draws: usize,
}

fn positives<T: Scalar, R: Rng + ?Sized>(
    dataset: &RealTensor<T>,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<RealTensor<T>> {
    let [n, c, h, w] = dataset.shape();
    let (ch, cw) = match cfg.crop {
        Some(s) => (s.min(h), s.min(w)),
        None => (h, w),
    };
    let width = cfg.noise_range.1 - cfg.noise_range.0;
    let amp = cfg.data_noise_levels[rng.gen_range(0..cfg.data_noise_levels.len())] * width;
    let mut data = Vec::with_capacity(cfg.batch * c * ch * cw);
    for _ in 0..cfg.batch {
        let item = dataset.item(rng.gen_range(0..n));
        let (oy, ox) = (rng.gen_range(0..=h - ch), rng.gen_range(0..=w - cw));
        for k in 0..c {
            for y in 0..ch {
                for x in 0..cw {
                    let v = item[(k * h + oy + y) * w + ox + x];
                    let noise = if amp > 0.0 { rng.gen_range(-amp..amp) } else { 0.0 };
                    data.push(v + T::from_f64_lossy(noise));
                }
            }
        }
    }
    Ok(RealTensor::new([cfg.batch, c, ch, cw], data)?)
}

/// Trains `model` in place; `adam` must be built for the model's parameters.
pub fn train<T: Scalar, M: TrainableEnergy<T>, R: Rng + ?Sized>(
    model: &mut M,
    dataset: &RealTensor<T>,
    buffer: &mut ReplayBuffer<T>,
    adam: &mut AdamState<T>,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<TrainReport> {
    cfg.validate()?;
    if dataset.batch() == 0 {
        return Err(Error::Parameter("training dataset is empty".into()));
    }
    let mut report = TrainReport::default();
    for _ in 0..cfg.steps {
        let pos = positives(dataset, cfg, rng)?;
        let [_, c, h, w] = pos.shape();
        let init = buffer.init_negatives(cfg.batch, [c, h, w], cfg.buffer_fraction, cfg.noise_range)?;
        report.buffer_draws += init.from_buffer;
        report.total_draws += cfg.batch;
        let neg = langevin_sample(&*model, &init.batch, &cfg.langevin, rng)?;
        buffer.push(&neg)?;
        let step = contrastive_gradient(&*model, &pos, &neg, cfg.energy_penalty)?;
        if !step.loss.is_finite() {
            return Err(Error::Numerical("training loss became non-finite".into()));
        }
        adam.update(model.params_mut(), &step.grad)?;
        if !model.params().is_finite() {
            return Err(Error::Numerical("parameters became non-finite".into()));
        }
        report.losses.push(step.loss);
        report.mean_pos.push(step.mean_pos);
        report.mean_neg.push(step.mean_neg);
        let sq: f64 = neg.data().iter().map(|v| v.to_f64_lossy().powi(2)).sum();
        report.neg_rms.push((sq / neg.data().len() as f64).sqrt());
    }
    Ok(report)
}
