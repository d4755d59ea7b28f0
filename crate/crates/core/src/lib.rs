//! Heart-rate estimation from wrist PPG and accelerometer windows with
//! temporal convolutional networks.
//!
//! - [`ops`]: tensors kernels and gradients (dilated causal convolution, batch
//!   norm, pooling, linear, LogCosh).
//! - [`model`]: declarative topologies, the seed network, forward pass and
//!   parameter/MAC accounting.
//! - [`train`]: Adam with decoupled weight decay, early stopping,
//!   leave-one-subject-out cross-validation.
//! - [`nas`]: group-Lasso channel shrinking, pruning, uniform expansion and
//!   Pareto extraction.
//! - [`quant`]: dilation flattening and int8 post-training quantization.
//! - [`pipeline`]: windowing, the physiological clipper, subject fine-tuning.
//! - [`synth`]: synthetic PPG/accelerometer recordings with known heart rate.
//! - [`io`]: the `TPPG` container and CSV writers.

// `!(x >= 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod model;
pub mod nas;
pub mod ops;
mod par;
pub mod pipeline;
pub mod quant;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
