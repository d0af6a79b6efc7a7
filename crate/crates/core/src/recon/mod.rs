//! Reconstruction solvers alternating Langevin prior steps with
//! data consistency.

pub mod dc;
pub mod solver;

pub use dc::{dc_image, dc_image_with_kspace, dc_kspace};
pub use solver::{
    recon_iebm, recon_kebm, recon_pki, recon_ski, reconstruct, zero_filled_sos, Calibration, Method, Priors,
    ReconConfig, ReconProblem, ReconResult,
};
