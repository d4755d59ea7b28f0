//! Forward kernels and their gradients for every layer type of the network.

pub mod activation;
pub mod conv;
mod kernels;
pub mod linear;
pub mod loss;
pub mod norm;
pub mod tape;

pub use activation::{avgpool1d, avgpool1d_backward, relu, relu_backward};
pub use conv::{conv1d_backward, conv1d_causal, conv1d_forward, conv_output_len, ConvGrads};
pub use linear::{linear, linear_backward};
pub use loss::{log_cosh, logcosh_loss};
pub use norm::{batchnorm_backward, batchnorm_forward, NormMode, RunningStats, BN_EPS, BN_MOMENTUM};
pub use tape::{GradTape, ParamId};
