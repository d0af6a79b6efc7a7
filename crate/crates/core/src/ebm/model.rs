use kiebm_grad::{Architecture, EnergyNet, LayerParams, RealTensor, Scalar, Wants};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Data domain an energy model was trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    Image,
    WeightedKspace,
}

impl Domain {
    pub fn as_str(&self) -> &'static str {
        match self {
            Domain::Image => "image",
            Domain::WeightedKspace => "weighted-kspace",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "image" => Ok(Domain::Image),
            "weighted-kspace" | "kspace" => Ok(Domain::WeightedKspace),
            _ => Err(Error::Parameter(format!("unknown domain {s:?}"))),
        }
    }
}

/// Anything Langevin dynamics can sample from.
pub trait Energy<T: Scalar> {
    /// Energy of every batch item.
    fn energy(&self, x: &RealTensor<T>) -> Result<Vec<T>>;
    /// Energies and `dE/dx`.
    fn energy_grad(&self, x: &RealTensor<T>) -> Result<(Vec<T>, RealTensor<T>)>;
}

/// Energies with learnable parameters.
pub trait TrainableEnergy<T: Scalar>: Energy<T> {
    fn params(&self) -> &LayerParams<T>;
    fn params_mut(&mut self) -> &mut LayerParams<T>;
    /// Energies and the parameter gradient of `sum_b w_b E(x_b)`, where the
    /// weights may depend on the energies.
    fn weighted_param_grad(
        &self,
        x: &RealTensor<T>,
        weights: &mut dyn FnMut(&[T]) -> Vec<T>,
    ) -> Result<(Vec<T>, LayerParams<T>)>;
}

/// Residual energy network tagged with the domain it models.
#[derive(Debug, Clone)]
pub struct EnergyModel<T> {
    pub net: EnergyNet<T>,
    domain: Domain,
}

impl<T: Scalar> EnergyModel<T> {
    pub fn new(net: EnergyNet<T>, domain: Domain) -> Self {
        Self { net, domain }
    }

    pub fn init<R: Rng + ?Sized>(arch: Architecture, domain: Domain, rng: &mut R) -> Self {
        Self::new(EnergyNet::init(arch, rng), domain)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn expect_domain(&self, domain: Domain) -> Result<()> {
        if self.domain != domain {
            return Err(Error::Config(format!(
                "model is tagged {} but a {} model is required",
                self.domain.as_str(),
                domain.as_str()
            )));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> EnergyModel<U> {
        EnergyModel {
            net: self.net.cast(),
            domain: self.domain,
        }
    }
}

impl<T: Scalar> Energy<T> for EnergyModel<T> {
    fn energy(&self, x: &RealTensor<T>) -> Result<Vec<T>> {
        Ok(self.net.energy(x)?)
    }

    fn energy_grad(&self, x: &RealTensor<T>) -> Result<(Vec<T>, RealTensor<T>)> {
        Ok(self.net.grad_input(x)?)
    }
}

impl<T: Scalar> TrainableEnergy<T> for EnergyModel<T> {
    fn params(&self) -> &LayerParams<T> {
        self.net.params()
    }

    fn params_mut(&mut self) -> &mut LayerParams<T> {
        self.net.params_mut()
    }

    fn weighted_param_grad(
        &self,
        x: &RealTensor<T>,
        weights: &mut dyn FnMut(&[T]) -> Vec<T>,
    ) -> Result<(Vec<T>, LayerParams<T>)> {
        let (e, g) = self.net.gradients_with(x, Wants::PARAMS, weights)?;
        Ok((e, g.params.expect("parameter gradient requested")))
    }
}

/// Standard-Gaussian energy `E(x) = |x|^2 / 2` per batch item.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuadraticEnergy;

impl<T: Scalar> Energy<T> for QuadraticEnergy {
    fn energy(&self, x: &RealTensor<T>) -> Result<Vec<T>> {
        let half = T::from_f64_lossy(0.5);
        Ok((0..x.batch())
            .map(|b| x.item(b).iter().map(|&v| v * v).sum::<T>() * half)
            .collect())
    }

    fn energy_grad(&self, x: &RealTensor<T>) -> Result<(Vec<T>, RealTensor<T>)> {
        Ok((self.energy(x)?, x.clone()))
    }
}
