//! Dilation flattening and full-integer int8 post-training quantization.

mod calibrate;
mod engine;
mod flatten;
mod fold;
mod qparams;

pub use calibrate::{calibrate, Calibration};
pub use engine::{infer_int8, infer_int8_batch, quantize_model, QLayer, QuantizedModel};
pub use flatten::{flatten_dilation, is_flat};
pub use fold::{fold_network, FoldedLayer, FoldedNet};
pub use qparams::{quantize_weights, round_half_away, FixedMultiplier, QuantParams, MIN_RANGE};
