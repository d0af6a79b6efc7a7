//! Energy models, Langevin sampling and maximum-likelihood training.

pub mod adam;
pub mod buffer;
pub mod data;
pub mod langevin;
pub mod model;
pub mod train;

pub use adam::AdamState;
pub use buffer::{NegativeInit, ReplayBuffer};
pub use data::{domain_samples, image_samples, kspace_samples, two_blob_images};
pub use langevin::{langevin_sample, langevin_step, LangevinConfig};
pub use model::{Domain, Energy, EnergyModel, QuadraticEnergy, TrainableEnergy};
pub use train::{contrastive_gradient, ml_gradient, train, Contrastive, TrainConfig, TrainReport};
