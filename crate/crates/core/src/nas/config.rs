use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    /// Penalize channels by the parameters they carry.
    Size,
    /// Penalize channels by the multiply-accumulates they cause.
    Flops,
}

impl CostKind {
    pub fn name(self) -> &'static str {
        match self {
            CostKind::Size => "size",
            CostKind::Flops => "flops",
        }
    }
}

/// What measures a channel's magnitude for the penalty and for pruning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelGroup {
    /// L2 norm of the channel's slice of the conv weight tensor. Under batch
    /// norm this is scale-free for the loss, so it rarely reaches τ.
    ConvWeights,
    /// Absolute value of the scale of the batch norm following the conv
    /// (falls back to the weight slice for convs without one).
    #[default]
    BnGamma,
}

impl ChannelGroup {
    pub fn name(self) -> &'static str {
        match self {
            ChannelGroup::ConvWeights => "conv_weights",
            ChannelGroup::BnGamma => "bn_gamma",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularizerConfig {
    pub kind: CostKind,
    pub strength: f32,
    pub prune_threshold: f32,
    #[serde(default = "unit")]
    pub expansion: f32,
    #[serde(default)]
    pub group: ChannelGroup,
}

fn unit() -> f32 {
    1.0
}

impl RegularizerConfig {
    pub fn new(kind: CostKind, strength: f32, prune_threshold: f32) -> Self {
        Self {
            kind,
            strength,
            prune_threshold,
            expansion: 1.0,
            group: ChannelGroup::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strength >= 0.0 && self.strength.is_finite()) {
            return Err(Error::arg(format!(
                "regularizer strength {} must be non-negative",
                self.strength
            )));
        }
        if !(self.prune_threshold >= 0.0 && self.prune_threshold.is_finite()) {
            return Err(Error::arg(format!(
                "pruning threshold {} must be non-negative",
                self.prune_threshold
            )));
        }
        if !(self.expansion >= 1.0 && self.expansion.is_finite()) {
            return Err(Error::arg(format!("expansion {} must be at least 1", self.expansion)));
        }
        Ok(())
    }
}

/// Strengths {1e-6, 1e-5, 1e-4} × thresholds {0.001, 0.01, 0.05} × both
/// cost kinds.
pub fn default_grid() -> Vec<RegularizerConfig> {
    let mut grid = Vec::new();
    for kind in [CostKind::Size, CostKind::Flops] {
        for strength in [1e-6, 1e-5, 1e-4] {
            for threshold in [0.001, 0.01, 0.05] {
                grid.push(RegularizerConfig::new(kind, strength, threshold));
            }
        }
    }
    grid
}
