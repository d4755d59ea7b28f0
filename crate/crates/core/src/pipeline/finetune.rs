use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::pipeline::Window;
use crate::train::{evaluate_mae, train, Dataset, TrainConfig, TrainOptions, TrainReport};

/// Minimum number of windows a subject needs for fine-tuning.
pub const MIN_WINDOWS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneConfig {
    pub lr: f32,
    pub weight_decay: f32,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    /// Leading share of the subject's windows used for adaptation.
    pub adapt_fraction: f32,
    /// Trailing share of the adaptation windows held back for early stopping.
    pub val_fraction: f32,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            weight_decay: 5e-4,
            batch_size: 16,
            epochs: 50,
            patience: 10,
            adapt_fraction: 0.25,
            val_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneReport {
    /// Windows `0..split` adapted on, `split..` evaluated.
    pub split: usize,
    pub mae_before: f32,
    pub mae_after: f32,
    pub training: TrainReport,
}

/// Number of leading windows used for adaptation: `round(fraction · n)`.
pub fn finetune_split(n: usize, fraction: f32) -> Result<usize> {
    if n < MIN_WINDOWS {
        return Err(Error::arg(format!(
            "fine-tuning needs at least {MIN_WINDOWS} windows, got {n}"
        )));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::arg(format!("adaptation fraction {fraction} must lie in (0, 1)")));
    }
    Ok(((fraction as f64 * n as f64).round() as usize).clamp(2, n - 1))
}

/// Adapts `model` to one subject on the chronologically first windows with
/// the first convolutional block frozen, and reports MAE on the rest.
pub fn finetune(model: &Model, windows: &[Window], cfg: &FinetuneConfig) -> Result<(Model, FinetuneReport)> {
    let split = finetune_split(windows.len(), cfg.adapt_fraction)?;
    if !(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0) {
        return Err(Error::arg(format!(
            "validation fraction {} must lie in (0, 1)",
            cfg.val_fraction
        )));
    }
    let n_val = ((cfg.val_fraction as f64 * split as f64).round() as usize).clamp(1, split - 1);
    let adapt = &windows[..split - n_val];
    let val = &windows[split - n_val..split];
    let test = Dataset::from_windows(&windows[split..], &model.norm)?;
    let mae_before = evaluate_mae(model, &test)?;
    let train_cfg = TrainConfig {
        lr: cfg.lr,
        weight_decay: cfg.weight_decay,
        batch_size: cfg.batch_size,
        max_epochs: cfg.epochs,
        patience: cfg.patience,
        seed: cfg.seed,
    };
    let opts = TrainOptions {
        frozen_layers: model.spec.first_block_end(),
        ..Default::default()
    };
    let (tuned, training) = train(
        model.clone(),
        &Dataset::from_windows(adapt, &model.norm)?,
        &Dataset::from_windows(val, &model.norm)?,
        &train_cfg,
        &opts,
    )?;
    let mae_after = evaluate_mae(&tuned, &test)?;
    Ok((
        tuned,
        FinetuneReport {
            split,
            mae_before,
            mae_after,
            training,
        },
    ))
}
