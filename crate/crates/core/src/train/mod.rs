//! Adam training with decoupled weight decay, early stopping, MAE
//! evaluation and leave-one-subject-out cross-validation.

mod config;
mod data;
mod fit;
mod loso;
mod optim;
mod stopping;

pub use config::TrainConfig;
pub use data::Dataset;
pub use fit::{evaluate_mae, mae, predict, train, EpochStats, Regularizer, TrainOptions, TrainReport};
pub use loso::{loso_crossval, CrossValReport, FoldResult, SubjectWindows};
pub use optim::Adam;
pub use stopping::{EarlyStopping, Verdict};
