//! Residual-learning resolution enhancement for histology-style RGB images.
//!
//! The pipeline degrades high-resolution images by cubic down/up resampling,
//! trains a U-Net to predict the shifted residual `hr - lr + 127`, and
//! reconstructs enhanced images by adding the predicted residual back onto
//! the low-resolution input.
//!
//! * [`tensor`]: NHWC tensors and the forward/backward layer set.
//! * [`model`]: the U-Net, its gradients and the weights file format.
//! * [`data`]: PNG I/O, cubic degradation, residual codec, augmentation,
//!   splitting and a synthetic texture generator.
//! * [`train`]: BCE + Adam training loop, early stopping, relative MSE.
//! * [`cli`]: subcommand implementations behind the `placenta-sr` binary.

pub mod cli;
pub mod data;
pub mod error;
pub mod model;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use rng::Rng;
