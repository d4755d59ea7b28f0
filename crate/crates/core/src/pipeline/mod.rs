//! Sliding-window preprocessing, the post-processing clipper and subject
//! fine-tuning.

mod finetune;
mod postprocess;
mod window;

pub use finetune::{finetune, finetune_split, FinetuneConfig, FinetuneReport};
pub use postprocess::{HRPostProcessor, DEFAULT_CLIP_FRACTION, DEFAULT_HISTORY};
pub use window::{fit_normalization, make_windows, window_count, Window, HOP, WINDOW};
