use super::{channel_costs, ChannelGroup, RegularizerConfig};
use crate::error::Result;
use crate::model::{LayerWeights, NetworkSpec, Weights};
use crate::tensor::Tensor;
use crate::train::Regularizer;

/// `λ · Σ_layers Σ_channels cost · ‖group‖₂` and its (sub)gradient, added
/// into `grads` (canonical parameter order). The subgradient at a zero
/// group is zero.
pub fn group_lasso_penalty(
    spec: &NetworkSpec,
    weights: &Weights,
    cfg: &RegularizerConfig,
    grads: Option<&mut [Tensor]>,
) -> Result<f32> {
    cfg.validate()?;
    weights.check(spec)?;
    if cfg.strength == 0.0 {
        return Ok(0.0);
    }
    let slots = param_slots(weights);
    let mut grads = grads;
    let mut total = 0f64;
    for c in channel_costs(spec, cfg.kind)? {
        let coeff = cfg.strength as f64 * c.per_channel;
        let target = match (cfg.group, c.norm) {
            (ChannelGroup::BnGamma, Some(n)) => (n, 1),
            _ => (c.layer, 0),
        };
        let tensor = match &weights.layers[target.0] {
            LayerWeights::Conv { weight, .. } => weight,
            LayerWeights::BatchNorm { gamma, .. } => gamma,
            _ => unreachable!("channel groups live in conv or batch-norm layers"),
        };
        let rows = tensor.dim(0);
        let width = tensor.len() / rows;
        for ch in 0..rows {
            let slice = &tensor.data()[ch * width..(ch + 1) * width];
            let norm = slice.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt();
            total += coeff * norm;
            if let Some(g) = grads.as_deref_mut() {
                if norm > 0.0 {
                    let g = &mut g[slots[target.0]].data_mut()[ch * width..(ch + 1) * width];
                    for (gi, &w) in g.iter_mut().zip(slice) {
                        *gi += (coeff * w as f64 / norm) as f32;
                    }
                }
            }
        }
    }
    Ok(total as f32)
}

/// Index in canonical parameter order of each layer's first tensor
/// (the weight, or gamma for batch norm).
fn param_slots(weights: &Weights) -> Vec<usize> {
    let mut slots = Vec::with_capacity(weights.layers.len());
    let mut k = 0;
    for lw in &weights.layers {
        slots.push(k);
        if !matches!(lw, LayerWeights::None) {
            k += 2;
        }
    }
    slots
}

/// Adapter plugging the penalty into the training loop.
pub struct GroupLasso(pub RegularizerConfig);

impl Regularizer for GroupLasso {
    fn apply(&self, spec: &NetworkSpec, weights: &Weights, grads: &mut [Tensor]) -> Result<f32> {
        group_lasso_penalty(spec, weights, &self.0, Some(grads))
    }
}
