use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{predict, train, Dataset, TrainConfig, TrainOptions};
use crate::error::{Error, Result};
use crate::model::{Model, NetworkSpec, Weights};
use crate::par::par_map;
use crate::pipeline::{fit_normalization, Window};

/// All windows of one subject in recording order.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectWindows {
    pub id: u32,
    pub windows: Vec<Window>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub subject: u32,
    /// Subject whose windows drove early stopping.
    pub val_subject: u32,
    pub train_subjects: Vec<u32>,
    pub predictions: Vec<f32>,
    pub truths: Vec<f32>,
    pub mae: f32,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValReport {
    pub folds: Vec<FoldResult>,
    pub mean_mae: f32,
}

/// Leave-one-subject-out: each subject is tested by a network trained on the
/// others, one of which (chosen by seed) is held back for early stopping.
/// With only one other subject it serves for both training and validation.
pub fn loso_crossval(spec: &NetworkSpec, subjects: &[SubjectWindows], cfg: &TrainConfig) -> Result<CrossValReport> {
    cfg.validate()?;
    spec.validate()?;
    if subjects.len() < 2 {
        return Err(Error::arg("cross-validation needs at least two subjects"));
    }
    if let Some(s) = subjects.iter().find(|s| s.windows.is_empty()) {
        return Err(Error::arg(format!("subject {} has no windows", s.id)));
    }
    let folds = par_map(subjects, |held_out| run_fold(spec, subjects, held_out, cfg));
    let folds = folds.into_iter().collect::<Result<Vec<_>>>()?;
    let mean_mae = (folds.iter().map(|f| f.mae as f64).sum::<f64>() / folds.len() as f64) as f32;
    Ok(CrossValReport { folds, mean_mae })
}

fn run_fold(spec: &NetworkSpec, subjects: &[SubjectWindows], held_out: &SubjectWindows, cfg: &TrainConfig) -> Result<FoldResult> {
    let pool: Vec<&SubjectWindows> = subjects.iter().filter(|s| s.id != held_out.id).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (held_out.id as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let val = pool[rng.gen_range(0..pool.len())];
    let train_pool: Vec<&SubjectWindows> = if pool.len() > 1 {
        pool.iter().copied().filter(|s| s.id != val.id).collect()
    } else {
        pool.clone()
    };
    let train_windows: Vec<Window> = train_pool.iter().flat_map(|s| s.windows.iter().cloned()).collect();
    let norm = fit_normalization(&train_windows)?;
    let train_set = Dataset::from_windows(&train_windows, &norm)?;
    let val_set = Dataset::from_windows(&val.windows, &norm)?;
    let test_set = Dataset::from_windows(&held_out.windows, &norm)?;
    let model = Model {
        spec: spec.clone(),
        weights: Weights::init(spec, cfg.seed),
        norm,
    };
    let (model, report) = train(model, &train_set, &val_set, cfg, &TrainOptions::default())?;
    let predictions = predict(&model, &test_set)?;
    let truths = test_set.bpm().to_vec();
    Ok(FoldResult {
        subject: held_out.id,
        val_subject: val.id,
        train_subjects: train_pool.iter().map(|s| s.id).collect(),
        mae: super::mae(&predictions, &truths)?,
        predictions,
        truths,
        best_epoch: report.best_epoch,
    })
}
