use std::fs;
use std::path::Path;

use serde::Deserialize;

use ppg_tcn::model::SeedOptions;
use ppg_tcn::nas::{default_grid, ChannelGroup, CostKind, RegularizerConfig, SHRINK_LR};
use ppg_tcn::pipeline::FinetuneConfig;
use ppg_tcn::train::TrainConfig;

use crate::Failure;

/// Settings shared by the training-type commands, read from TOML.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: SeedOptions,
    pub train: TrainConfig,
    pub split: SplitConfig,
    pub finetune: FinetuneConfig,
    pub search: SearchConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Trailing share of each subject's windows used for early stopping.
    pub val_fraction: f32,
    /// Trailing share of each subject's windows scoring search points.
    pub eval_fraction: f32,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            val_fraction: 0.2,
            eval_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub iterations: usize,
    /// Epoch limits of the sparsifying and retraining phases (the `train`
    /// table's limit when absent).
    pub shrink_epochs: Option<usize>,
    pub retrain_epochs: Option<usize>,
    /// Learning rate of the sparsifying phase.
    pub shrink_lr: f32,
    pub degenerate_mae: f32,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            iterations: 1,
            shrink_epochs: None,
            retrain_epochs: None,
            shrink_lr: SHRINK_LR,
            degenerate_mae: 20.0,
        }
    }
}

/// Grid file: a cartesian product and/or explicit points.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridFile {
    pub kinds: Vec<CostKind>,
    pub strengths: Vec<f32>,
    pub thresholds: Vec<f32>,
    pub expansions: Vec<f32>,
    pub group: ChannelGroup,
    pub points: Vec<RegularizerConfig>,
}

impl GridFile {
    pub fn expand(&self) -> Vec<RegularizerConfig> {
        let mut grid = Vec::new();
        let expansions = if self.expansions.is_empty() {
            vec![1.0]
        } else {
            self.expansions.clone()
        };
        for &kind in &self.kinds {
            for &strength in &self.strengths {
                for &prune_threshold in &self.thresholds {
                    for &expansion in &expansions {
                        grid.push(RegularizerConfig {
                            kind,
                            strength,
                            prune_threshold,
                            expansion,
                            group: self.group,
                        });
                    }
                }
            }
        }
        grid.extend(self.points.iter().copied());
        grid
    }
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

pub fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    let cfg: RunConfig = match path {
        Some(p) => read_toml(p)?,
        None => RunConfig::default(),
    };
    cfg.train.validate().map_err(|e| Failure::usage(e.to_string()))?;
    for (name, f) in [
        ("val_fraction", cfg.split.val_fraction),
        ("eval_fraction", cfg.split.eval_fraction),
    ] {
        if !(f > 0.0 && f < 0.5) {
            return Err(Failure::usage(format!("split.{name} must lie in (0, 0.5), got {f}")));
        }
    }
    Ok(cfg)
}

pub fn load_grid(path: Option<&Path>) -> Result<Vec<RegularizerConfig>, Failure> {
    let grid = match path {
        Some(p) => read_toml::<GridFile>(p)?.expand(),
        None => default_grid(),
    };
    if grid.is_empty() {
        return Err(Failure::usage("the search grid is empty"));
    }
    for g in &grid {
        g.validate().map_err(|e| Failure::usage(e.to_string()))?;
    }
    Ok(grid)
}
