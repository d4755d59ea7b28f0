use super::CostKind;
use crate::error::Result;
use crate::model::{ActShape, LayerKind, NetworkSpec};

/// Per-output-channel cost of one conv layer, with the layers that share
/// its channel dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelCosts {
    pub layer: usize,
    /// Batch norm directly normalizing this conv's output.
    pub norm: Option<usize>,
    /// Next layer reading these channels (conv or the first linear).
    pub consumer: Option<usize>,
    /// Cost of each single channel; identical across the layer's channels.
    pub per_channel: f64,
}

/// Costs for every conv layer. Size: the channel's own weights and bias,
/// its two batch-norm parameters and its input slice in the consumer.
/// Flops: the channel's own MACs plus its input contribution to the
/// consumer's MACs.
pub fn channel_costs(spec: &NetworkSpec, kind: CostKind) -> Result<Vec<ChannelCosts>> {
    let shapes = spec.shapes()?;
    let mut out = Vec::new();
    for i in spec.conv_indices() {
        let l = &spec.layers[i];
        let norm = spec
            .layers
            .get(i + 1)
            .filter(|n| n.kind == LayerKind::BatchNorm)
            .map(|_| i + 1);
        let consumer = spec.layers[i + 1..]
            .iter()
            .position(|n| matches!(n.kind, LayerKind::Conv | LayerKind::Linear | LayerKind::Head))
            .map(|p| p + i + 1);
        let t_out = shapes[i + 1].len() as f64;
        let (k, c_in) = (l.kernel as f64, l.c_in as f64);
        let mut cost = match kind {
            CostKind::Size => c_in * k + 1.0 + if norm.is_some() { 2.0 } else { 0.0 },
            CostKind::Flops => c_in * k * t_out,
        };
        if let Some(j) = consumer {
            let n = &spec.layers[j];
            cost += match n.kind {
                LayerKind::Conv => {
                    let per_tap = n.kernel as f64 * n.c_out as f64;
                    match kind {
                        CostKind::Size => per_tap,
                        CostKind::Flops => per_tap * shapes[j + 1].len() as f64,
                    }
                }
                // flattened features are channel-major: each channel owns
                // `len` input columns of the linear layer
                _ => match shapes[j] {
                    ActShape::Seq { len, .. } => len as f64 * n.c_out as f64,
                    ActShape::Flat { .. } => n.c_out as f64,
                },
            };
        }
        out.push(ChannelCosts {
            layer: i,
            norm,
            consumer,
            per_channel: cost,
        });
    }
    Ok(out)
}
