use kiebm_grad::{LayerParams, Scalar};

use crate::error::{Error, Result};

/// Adam optimizer state with bias-corrected moments.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Rescales the gradient to this global L2 norm when exceeded.
    pub clip_norm: Option<f64>,
    step: u64,
    m: LayerParams<T>,
    v: LayerParams<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(template: &LayerParams<T>, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: None,
            step: 0,
            m: template.zeros_like(),
            v: template.zeros_like(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update to `params` in place.
    pub fn update(&mut self, params: &mut LayerParams<T>, grad: &LayerParams<T>) -> Result<()> {
        params.check_layout(grad)?;
        params.check_layout(&self.m)?;
        if !grad.is_finite() {
            return Err(Error::Numerical("non-finite gradient passed to Adam".into()));
        }
        let mut g_scale = 1.0;
        if let Some(max) = self.clip_norm {
            let n = grad.norm().to_f64_lossy();
            if n > max {
                g_scale = max / n;
            }
        }
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let params_it = params.tensors_mut().iter_mut();
        let moments = self.m.tensors_mut().iter_mut().zip(self.v.tensors_mut().iter_mut());
        for ((p, g), (m, v)) in params_it.zip(grad.tensors()).zip(moments) {
            for i in 0..p.data.len() {
                let gi = g.data[i].to_f64_lossy() * g_scale;
                let mi = b1 * m.data[i].to_f64_lossy() + (1.0 - b1) * gi;
                let vi = b2 * v.data[i].to_f64_lossy() + (1.0 - b2) * gi * gi;
                m.data[i] = T::from_f64_lossy(mi);
                v.data[i] = T::from_f64_lossy(vi);
                let delta = self.lr * (mi / c1) / ((vi / c2).sqrt() + self.eps);
                p.data[i] -= T::from_f64_lossy(delta);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use kiebm_grad::ParamTensor;

    fn params(v: &[f64]) -> LayerParams<f64> {
        let mut p = LayerParams::new();
        let mut t = ParamTensor::zeros("w", vec![v.len()]);
        t.data = v.to_vec();
        p.push(t);
        p
    }

    #[test]
    fn zero_gradient_is_a_null_update() {
        let mut p = params(&[1.0, -2.0]);
        let before = p.clone();
        let mut adam = AdamState::new(&p, 1e-3);
        adam.update(&mut p, &params(&[0.0, 0.0])).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr_against_the_gradient() {
        // step 1: m_hat = g, v_hat = g^2, so delta = lr * g / (|g| + eps)
        let mut p = params(&[0.0, 0.0]);
        let mut adam = AdamState::new(&p, 3e-4);
        adam.update(&mut p, &params(&[2.5, -0.1])).unwrap();
        let d0 = -3e-4 * 2.5 / (2.5 + 1e-8);
        let d1 = 3e-4 * 0.1 / (0.1 + 1e-8);
        assert!((p.tensors()[0].data[0] - d0).abs() < 1e-18);
        assert!((p.tensors()[0].data[1] - d1).abs() < 1e-18);
    }

    #[test]
    fn constant_gradient_step_converges_to_lr() {
        let mut p = params(&[0.0]);
        let mut adam = AdamState::new(&p, 5e-4);
        let g = params(&[0.7]);
        let mut last = 0.0;
        for _ in 0..2000 {
            let before = p.tensors()[0].data[0];
            adam.update(&mut p, &g).unwrap();
            last = before - p.tensors()[0].data[0];
        }
        assert!((last - 5e-4).abs() < 1e-9);
    }

    #[test]
    fn layout_mismatch_and_nan_rejected() {
        let mut p = params(&[0.0]);
        let mut adam = AdamState::new(&p, 1e-3);
        assert!(adam.update(&mut p, &params(&[0.0, 1.0])).is_err());
        assert!(adam.update(&mut p, &params(&[f64::NAN])).is_err());
    }

    #[test]
    fn clip_norm_rescales() {
        let mut p = params(&[0.0]);
        let mut a = AdamState::new(&p, 1e-3);
        a.clip_norm = Some(1.0);
        a.update(&mut p, &params(&[100.0])).unwrap();
        // direction preserved, Adam normalises magnitude anyway
        assert!(p.tensors()[0].data[0] < 0.0);
    }
}
