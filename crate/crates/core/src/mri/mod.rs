//! MRI signal plumbing: transforms, masks, weighting, coils, phantoms.

pub mod coils;
pub mod fft;
pub mod mask;
pub mod phantom;
pub mod weight;

pub use coils::{adjoint_sensitivities, apply_sensitivities, sos_combine, synth_sensitivities, SensitivityMaps};
pub use fft::{fft2c, ifft2c};
pub use mask::{generate_mask, MaskKind, MaskSpec, SamplingMask};
pub use phantom::{apply_mask, coil_image_dataset, random_phantom, shepp_logan, simulate_acquisition, zero_filled};
pub use weight::{weight_matrix, WeightMatrix, WeightParams};
