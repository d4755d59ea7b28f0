use super::{channel_costs, ChannelGroup, CostKind};
use crate::error::{Error, Result};
use crate::model::{ActShape, LayerKind, LayerWeights, NetworkSpec, Weights};
use crate::ops::{RunningStats, BN_EPS};
use crate::tensor::Tensor;

/// Magnitude of every output channel of every conv layer, measured on the
/// chosen group. Returned in conv-layer order as `(layer, magnitudes)`.
pub fn channel_magnitudes(spec: &NetworkSpec, weights: &Weights, group: ChannelGroup) -> Result<Vec<(usize, Vec<f32>)>> {
    weights.check(spec)?;
    let mut out = Vec::new();
    for c in channel_costs(spec, CostKind::Size)? {
        let mags = match (group, c.norm.map(|n| &weights.layers[n])) {
            (ChannelGroup::BnGamma, Some(LayerWeights::BatchNorm { gamma, .. })) => {
                gamma.data().iter().map(|g| g.abs()).collect()
            }
            _ => {
                let LayerWeights::Conv { weight, .. } = &weights.layers[c.layer] else {
                    unreachable!("layer kinds checked against the NetworkSpec")
                };
                let width = weight.len() / weight.dim(0);
                weight
                    .data()
                    .chunks(width)
                    .map(|s| s.iter().map(|&v| v as f64 * v as f64).sum::<f64>().sqrt() as f32)
                    .collect()
            }
        };
        out.push((c.layer, mags));
    }
    Ok(out)
}

/// Removes every conv output channel whose magnitude is strictly below
/// `threshold`, keeping at least the strongest channel of each layer.
pub fn prune(spec: &NetworkSpec, weights: &Weights, threshold: f32, group: ChannelGroup) -> Result<(NetworkSpec, Weights)> {
    if !(threshold >= 0.0) {
        return Err(Error::arg(format!("pruning threshold {threshold} must be non-negative")));
    }
    let keep: Vec<(usize, Vec<bool>)> = channel_magnitudes(spec, weights, group)?
        .into_iter()
        .map(|(layer, mags)| {
            let mut mask: Vec<bool> = mags.iter().map(|&m| !(m < threshold)).collect();
            if !mask.iter().any(|&k| k) {
                let best = (0..mags.len()).max_by(|&a, &b| mags[a].total_cmp(&mags[b])).unwrap_or(0);
                mask[best] = true;
            }
            (layer, mask)
        })
        .collect();
    prune_channels(spec, weights, &keep, group)
}

/// Removes the conv output channels marked `false` together with their
/// batch-norm entries and their input slices in the consumer. The constant
/// a removed channel would still emit (its bias through batch norm and
/// ReLU, or its batch-norm shift when grouped by scale) is folded into the
/// consumer's bias. For a conv consumer the fold is exact except at the
/// first outputs, whose taps reach into the causal zero padding.
pub fn prune_channels(
    spec: &NetworkSpec,
    weights: &Weights,
    keep: &[(usize, Vec<bool>)],
    group: ChannelGroup,
) -> Result<(NetworkSpec, Weights)> {
    weights.check(spec)?;
    let shapes = spec.shapes()?;
    let costs = channel_costs(spec, CostKind::Size)?;
    let mut new_spec = spec.clone();
    let mut new_w = weights.clone();
    for (layer, mask) in keep {
        let c = costs
            .iter()
            .find(|c| c.layer == *layer)
            .ok_or_else(|| Error::dim(format!("layer {layer} is not a convolution")))?;
        let c_out = spec.layers[*layer].c_out;
        if mask.len() != c_out {
            return Err(Error::dim(format!(
                "layer {layer}: mask covers {} channels, layer has {c_out}",
                mask.len()
            )));
        }
        if !mask.iter().any(|&k| k) {
            return Err(Error::arg(format!("layer {layer}: at least one channel must be kept")));
        }
        let kept: Vec<usize> = (0..c_out).filter(|&i| mask[i]).collect();
        if kept.len() == c_out {
            continue;
        }
        let residual = removed_constants(spec, &new_w, c.layer, c.norm, mask, group);

        // own layer and everything up to the consumer
        let end = c.consumer.unwrap_or(spec.layers.len());
        for j in *layer..end {
            let l = &mut new_spec.layers[j];
            if j != *layer {
                l.c_in = kept.len();
            }
            l.c_out = kept.len();
            new_w.layers[j] = match &new_w.layers[j] {
                LayerWeights::Conv { weight, bias } => LayerWeights::Conv {
                    weight: select_rows(weight, &kept)?,
                    bias: select_rows(bias, &kept)?,
                },
                LayerWeights::BatchNorm { gamma, beta, stats } => LayerWeights::BatchNorm {
                    gamma: select_rows(gamma, &kept)?,
                    beta: select_rows(beta, &kept)?,
                    stats: RunningStats {
                        mean: select_rows(&stats.mean, &kept)?,
                        var: select_rows(&stats.var, &kept)?,
                    },
                },
                other => other.clone(),
            };
        }

        if let Some(j) = c.consumer {
            let per_channel = match (spec.layers[j].kind, &shapes[j]) {
                (LayerKind::Conv, _) => spec.layers[j].kernel,
                (_, ActShape::Seq { len, .. }) => *len,
                (_, ActShape::Flat { .. }) => 1,
            };
            let (LayerWeights::Conv { weight, bias } | LayerWeights::Linear { weight, bias }) = &mut new_w.layers[j] else {
                unreachable!("consumers are conv or linear")
            };
            fold_constants(weight, bias, per_channel, &residual);
            *weight = select_inputs(weight, per_channel, &kept)?;
            new_spec.layers[j].c_in = kept.len()
                * if spec.layers[j].kind == LayerKind::Conv {
                    1
                } else {
                    per_channel
                };
        }
    }
    new_spec.validate()?;
    new_w.check(&new_spec)?;
    Ok((new_spec, new_w))
}

/// Constant output (after any batch norm and ReLU directly following)
/// of each removed channel, as `(channel, value)`.
fn removed_constants(
    spec: &NetworkSpec,
    weights: &Weights,
    layer: usize,
    norm: Option<usize>,
    mask: &[bool],
    group: ChannelGroup,
) -> Vec<(usize, f32)> {
    let LayerWeights::Conv { bias, .. } = &weights.layers[layer] else {
        unreachable!("layer is a conv")
    };
    let after = norm.map_or(layer + 1, |n| n + 1);
    let relu = spec.layers.get(after).is_some_and(|l| l.kind == LayerKind::Relu);
    (0..mask.len())
        .filter(|&c| !mask[c])
        .map(|c| {
            let mut v = bias.data()[c];
            if let Some(LayerWeights::BatchNorm { gamma, beta, stats }) = norm.map(|n| &weights.layers[n]) {
                v = match group {
                    ChannelGroup::BnGamma => beta.data()[c],
                    ChannelGroup::ConvWeights => {
                        let inv = 1.0 / (stats.var.data()[c] + BN_EPS).sqrt();
                        gamma.data()[c] * (v - stats.mean.data()[c]) * inv + beta.data()[c]
                    }
                };
            }
            if relu {
                v = v.max(0.0);
            }
            (c, v)
        })
        .collect()
}

fn fold_constants(weight: &Tensor, bias: &mut Tensor, per_channel: usize, residual: &[(usize, f32)]) {
    let (rows, cols) = (weight.dim(0), weight.len() / weight.dim(0));
    for &(c, v) in residual {
        if v == 0.0 {
            continue;
        }
        for o in 0..rows {
            let row = &weight.data()[o * cols..(o + 1) * cols];
            let s: f32 = row[c * per_channel..(c + 1) * per_channel].iter().sum();
            bias.data_mut()[o] += v * s;
        }
    }
}

fn select_rows(t: &Tensor, rows: &[usize]) -> Result<Tensor> {
    let width = t.len() / t.dim(0);
    let mut data = Vec::with_capacity(rows.len() * width);
    for &r in rows {
        data.extend_from_slice(&t.data()[r * width..(r + 1) * width]);
    }
    let mut shape = t.shape().to_vec();
    shape[0] = rows.len();
    Tensor::new(&shape, data)
}

/// Keeps the input blocks (`per_channel` wide) listed in `channels` for
/// every output row; works for conv `[out, in, K]` and linear `[out, in·len]`.
fn select_inputs(t: &Tensor, per_channel: usize, channels: &[usize]) -> Result<Tensor> {
    let (rows, cols) = (t.dim(0), t.len() / t.dim(0));
    let mut data = Vec::with_capacity(rows * channels.len() * per_channel);
    for o in 0..rows {
        let row = &t.data()[o * cols..(o + 1) * cols];
        for &c in channels {
            data.extend_from_slice(&row[c * per_channel..(c + 1) * per_channel]);
        }
    }
    let shape = if t.rank() == 3 {
        vec![rows, channels.len(), per_channel]
    } else {
        vec![rows, channels.len() * per_channel]
    };
    Tensor::new(&shape, data)
}

/// Scales every conv width by `factor` (rounded, at least 1); the
/// classifier's hidden widths stay as they are.
pub fn expand(spec: &NetworkSpec, factor: f32) -> Result<NetworkSpec> {
    if !(factor >= 1.0 && factor.is_finite()) {
        return Err(Error::arg(format!("expansion {factor} must be at least 1")));
    }
    let shapes = spec.shapes()?;
    let mut out = spec.clone();
    let mut width = spec.input_channels;
    let mut flattened = false;
    for (j, l) in out.layers.iter_mut().enumerate() {
        match l.kind {
            LayerKind::Conv => {
                l.c_in = width;
                l.c_out = ((l.c_out as f32 * factor).round() as usize).max(1);
                width = l.c_out;
            }
            LayerKind::BatchNorm | LayerKind::Relu | LayerKind::AvgPool if !flattened => {
                l.c_in = width;
                l.c_out = width;
            }
            LayerKind::Linear | LayerKind::Head if !flattened => {
                flattened = true;
                if let ActShape::Seq { len, .. } = shapes[j] {
                    l.c_in = width * len;
                }
            }
            _ => {}
        }
    }
    out.validate()?;
    Ok(out)
}
