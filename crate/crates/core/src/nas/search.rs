use super::{expand, prune, GroupLasso, RegularizerConfig};
use crate::error::{Error, Result};
use crate::model::{count_macs, count_params, Model, NetworkSpec, Normalization, Weights};
use crate::par::par_map;
use crate::train::{evaluate_mae, train, Dataset, EpochStats, TrainConfig, TrainOptions};

/// Normalized data for a search: `train` fits weights, `val` drives early
/// stopping, `eval` scores the final network.
#[derive(Debug, Clone)]
pub struct SearchData {
    pub norm: Normalization,
    pub train: Dataset,
    pub val: Dataset,
    pub eval: Dataset,
}

/// Default step size of the sparsifying phase. γ moves about one step per
/// update, so the training default of 1e-3 barely reaches τ in a few epochs.
pub const SHRINK_LR: f32 = 1e-2;

#[derive(Debug, Clone)]
pub struct SearchOptions {
    /// Shrink→prune(→expand) rounds per grid point.
    pub iterations: usize,
    /// Training of the sparsifying phase; its final weights are pruned.
    pub shrink: TrainConfig,
    /// Training of the surviving network without penalty.
    pub retrain: TrainConfig,
    /// Points whose every conv is down to one channel and whose MAE exceeds
    /// this bound are flagged degenerate.
    pub degenerate_mae: f32,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            iterations: 1,
            shrink: TrainConfig {
                lr: SHRINK_LR,
                ..TrainConfig::default()
            },
            retrain: TrainConfig::default(),
            degenerate_mae: 20.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchPoint {
    pub config: RegularizerConfig,
    pub model: Model,
    pub mae: f32,
    pub params: u64,
    pub macs: u64,
    pub degenerate: bool,
}

impl SearchPoint {
    pub fn spec(&self) -> &NetworkSpec {
        &self.model.spec
    }
}

/// Per-epoch callback of a search: grid point index and epoch statistics.
pub type SearchProgress<'a> = dyn Fn(usize, &EpochStats) + Sync + 'a;

/// Runs every grid point from the same seed network and initialization.
/// When a point expands, the expanded network is trained from a fresh
/// initialization; otherwise the pruned weights are trained further.
pub fn morph_search(
    seed: &NetworkSpec,
    data: &SearchData,
    grid: &[RegularizerConfig],
    opts: &SearchOptions,
    progress: Option<&SearchProgress>,
) -> Result<Vec<SearchPoint>> {
    if grid.is_empty() {
        return Err(Error::arg("search grid is empty"));
    }
    if opts.iterations == 0 {
        return Err(Error::arg("search needs at least one iteration"));
    }
    grid.iter().try_for_each(RegularizerConfig::validate)?;
    opts.shrink.validate()?;
    opts.retrain.validate()?;
    seed.validate()?;
    let indexed: Vec<(usize, RegularizerConfig)> = grid.iter().copied().enumerate().collect();
    par_map(&indexed, |(i, cfg)| {
        run_point(seed, data, *cfg, opts, &|s| {
            if let Some(p) = progress {
                p(*i, s)
            }
        })
    })
    .into_iter()
    .collect()
}

fn run_point(
    seed: &NetworkSpec,
    data: &SearchData,
    cfg: RegularizerConfig,
    opts: &SearchOptions,
    progress: &dyn Fn(&EpochStats),
) -> Result<SearchPoint> {
    let mut spec = seed.clone();
    let mut weights = Weights::init(&spec, opts.shrink.seed);
    let lasso = GroupLasso(cfg);
    for round in 0..opts.iterations {
        let shrink_opts = TrainOptions {
            regularizer: Some(&lasso),
            keep_last: true,
            on_epoch: Some(progress),
            ..Default::default()
        };
        let model = Model {
            spec: spec.clone(),
            weights,
            norm: data.norm.clone(),
        };
        let (shrunk, _) = train(model, &data.train, &data.val, &opts.shrink, &shrink_opts)?;
        (spec, weights) = prune(&shrunk.spec, &shrunk.weights, cfg.prune_threshold, cfg.group)?;
        if cfg.expansion > 1.0 {
            spec = expand(&spec, cfg.expansion)?;
            weights = Weights::init(&spec, opts.shrink.seed.wrapping_add(round as u64 + 1));
        }
    }
    let model = Model {
        spec: spec.clone(),
        weights,
        norm: data.norm.clone(),
    };
    let retrain_opts = TrainOptions {
        on_epoch: Some(progress),
        ..Default::default()
    };
    let (model, _) = train(model, &data.train, &data.val, &opts.retrain, &retrain_opts)?;
    let mae = evaluate_mae(&model, &data.eval)?;
    let degenerate = spec.conv_widths().iter().all(|&w| w == 1) && mae > opts.degenerate_mae;
    Ok(SearchPoint {
        config: cfg,
        params: count_params(&spec),
        macs: count_macs(&spec)?,
        model,
        mae,
        degenerate,
    })
}
