//! Energy-based priors in weighted k-space and image space for
//! undersampled parallel MRI reconstruction.

pub mod complex;
pub mod ebm;
pub mod error;
pub mod io;
pub mod metrics;
pub mod mri;
pub mod recon;

pub use complex::{CoilStack, ComplexTensor, RealImage};
pub use error::{Error, Result};
