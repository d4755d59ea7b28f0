use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Adam, Dataset, EarlyStopping, TrainConfig, Verdict};
use crate::error::{Error, Result};
use crate::model::{forward_batch, forward_train, Model, NetworkSpec, Normalization, Weights};
use crate::ops::{logcosh_loss, GradTape};
use crate::tensor::Tensor;

const EVAL_CHUNK: usize = 64;

/// An extra loss term on the weights. Returns its value and adds its
/// gradient into `grads` (canonical parameter order).
pub trait Regularizer {
    fn apply(&self, spec: &NetworkSpec, weights: &Weights, grads: &mut [Tensor]) -> Result<f32>;
}

#[derive(Default)]
pub struct TrainOptions<'a> {
    /// Layers with index below this are frozen: no updates, and their batch
    /// norms use running statistics.
    pub frozen_layers: usize,
    pub regularizer: Option<&'a dyn Regularizer>,
    /// Return the final weights instead of those of the best validation
    /// epoch (still stopping early when validation stalls).
    pub keep_last: bool,
    pub on_epoch: Option<&'a dyn Fn(&EpochStats)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f32,
    pub penalty: f32,
    pub val_mae: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub curve: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_mae: f32,
}

/// Trains `model` on `train`, early-stopping on `val` MAE, and returns the
/// model of the best validation epoch.
pub fn train(
    model: Model,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
    opts: &TrainOptions,
) -> Result<(Model, TrainReport)> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::arg("training and validation sets must be non-empty"));
    }
    model.weights.check(&model.spec)?;
    let Model { spec, mut weights, norm } = model;
    let targets: Vec<f32> = train.bpm().iter().map(|&b| norm.to_target(b)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut adam = Adam::new(&weights, cfg.lr, cfg.weight_decay);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = weights.clone();
    let mut curve = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut penalty_sum, mut batches) = (0f64, 0f64, 0usize);
        for idx in order.chunks(cfg.batch_size) {
            let x = train.batch(idx)?;
            let y: Vec<f32> = idx.iter().map(|&i| targets[i]).collect();
            let mut tape = GradTape::new(weights.params().into_iter().map(|(_, t)| t));
            let out = forward_train(&spec, &mut weights, x, &mut tape, opts.frozen_layers)?;
            let (loss, grad) = logcosh_loss(out.data(), &y)?;
            if !loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    reason: format!("loss became {loss}"),
                });
            }
            tape.backward(Tensor::new(&[idx.len(), 1], grad)?)?;
            let mut grads = tape.into_grads();
            let penalty = match opts.regularizer {
                Some(r) => r.apply(&spec, &weights, &mut grads)?,
                None => 0.0,
            };
            adam.step(&mut weights, &grads, |p| p.layer < opts.frozen_layers);
            loss_sum += loss as f64;
            penalty_sum += penalty as f64;
            batches += 1;
        }
        if !weights.is_finite() {
            return Err(Error::Training {
                epoch,
                reason: "weights became non-finite".into(),
            });
        }
        let val_mae = mae(&predict_with(&spec, &weights, &norm, val)?, val.bpm())?;
        let stats = EpochStats {
            epoch,
            train_loss: (loss_sum / batches as f64) as f32,
            penalty: (penalty_sum / batches as f64) as f32,
            val_mae,
        };
        curve.push(stats);
        if let Some(f) = opts.on_epoch {
            f(&stats);
        }
        match stopper.observe(epoch, val_mae) {
            Verdict::Improved => best.clone_from(&weights),
            Verdict::NoImprovement => {}
            Verdict::Stop => break,
        }
    }
    let (best_epoch, best_val_mae) = stopper.best().ok_or_else(|| Error::Training {
        epoch: curve.len(),
        reason: "validation error never became finite".into(),
    })?;
    Ok((
        Model {
            spec,
            weights: if opts.keep_last { weights } else { best },
            norm,
        },
        TrainReport {
            curve,
            best_epoch,
            best_val_mae,
        },
    ))
}

/// BPM predictions for every window of `data`, in order.
pub fn predict(model: &Model, data: &Dataset) -> Result<Vec<f32>> {
    predict_with(&model.spec, &model.weights, &model.norm, data)
}

fn predict_with(spec: &NetworkSpec, weights: &Weights, norm: &Normalization, data: &Dataset) -> Result<Vec<f32>> {
    let mut out = Vec::with_capacity(data.len());
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(EVAL_CHUNK) {
        let raw = forward_batch(spec, weights, &data.batch(chunk)?)?;
        out.extend(raw.into_iter().map(|y| norm.to_bpm(y)));
    }
    Ok(out)
}

pub fn evaluate_mae(model: &Model, data: &Dataset) -> Result<f32> {
    mae(&predict(model, data)?, data.bpm())
}

/// Mean absolute error in BPM.
pub fn mae(pred: &[f32], truth: &[f32]) -> Result<f32> {
    if pred.len() != truth.len() {
        return Err(Error::arg(format!("{} predictions for {} labels", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(Error::arg("MAE of an empty set is undefined"));
    }
    let sum: f64 = pred.iter().zip(truth).map(|(p, t)| (*p as f64 - *t as f64).abs()).sum();
    Ok((sum / pred.len() as f64) as f32)
}
