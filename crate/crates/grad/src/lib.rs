//! Reverse-mode differentiation for a residual convolutional energy network.
//!
//! Only the layers the energy network needs are provided: "same" 3x3 and
//! 1x1 convolutions with stride 1 or 2, Swish, residual addition, global sum
//! pooling and a scalar dense head. Gradients are available with respect to
//! the input (for Langevin sampling) and the parameters (for training).

pub mod error;
pub mod layers;
pub mod net;
pub mod params;
pub mod scalar;
pub mod tape;
pub mod tensor;

pub use error::{GradError, Result};
pub use layers::KernelShape;
pub use net::{resblock, Architecture, BlockKind, BlockParams, EnergyNet};
pub use params::{LayerParams, ParamId, ParamTensor};
pub use scalar::Scalar;
pub use tape::{Gradients, Tape, Var, Wants};
pub use tensor::RealTensor;
