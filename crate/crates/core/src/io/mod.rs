//! File formats and run configuration.

pub mod checkpoint;
pub mod config;
pub mod tensorfile;

pub use checkpoint::{Checkpoint, CheckpointMeta};
pub use config::{ModelConfig, PathConfig, RunConfig};
pub use tensorfile::{write_atomic, DType, TensorData, TensorFile};
