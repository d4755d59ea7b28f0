//! Forward passes over a chain.

use super::spec::{LayerKind, NetworkSpec};
use super::weights::{LayerWeights, Weights};
use crate::error::{Error, Result};
use crate::ops::{self, GradTape, NormMode, ParamId};
use crate::tensor::Tensor;

fn check_input(spec: &NetworkSpec, x: &Tensor) -> Result<usize> {
    if x.rank() != 3 || x.dim(1) != spec.input_channels || x.dim(2) != spec.input_len {
        return Err(Error::dim(format!(
            "network expects input [B, {}, {}], got {:?}",
            spec.input_channels,
            spec.input_len,
            x.shape()
        )));
    }
    Ok(x.dim(0))
}

fn mismatch(i: usize) -> Error {
    Error::dim(format!("layer {i}: weights do not match the layer kind"))
}

/// Inference over a batch `[B, C, T]`, returning the output of every layer.
pub fn forward_activations(spec: &NetworkSpec, weights: &Weights, x: &Tensor) -> Result<Vec<Tensor>> {
    let mut acts = Vec::with_capacity(spec.layers.len());
    infer(spec, weights, x, |t| acts.push(t.clone()))?;
    Ok(acts)
}

fn infer(spec: &NetworkSpec, weights: &Weights, x: &Tensor, mut visit: impl FnMut(&Tensor)) -> Result<Tensor> {
    weights.check(spec)?;
    let batch = check_input(spec, x)?;
    let mut cur = x.clone();
    for (i, (l, lw)) in spec.layers.iter().zip(&weights.layers).enumerate() {
        cur = match (l.kind, lw) {
            (LayerKind::Conv, LayerWeights::Conv { weight, bias }) => {
                ops::conv1d_forward(&cur, weight, bias, l.dilation, l.stride)?
            }
            (LayerKind::BatchNorm, LayerWeights::BatchNorm { gamma, beta, stats }) => {
                let mut stats = stats.clone();
                ops::batchnorm_forward(&cur, gamma, beta, &mut stats, NormMode::Infer)?.0
            }
            (LayerKind::Relu, _) => ops::relu(&cur),
            (LayerKind::AvgPool, _) => ops::avgpool1d(&cur, l.kernel, l.stride)?,
            (LayerKind::Linear | LayerKind::Head, LayerWeights::Linear { weight, bias }) => {
                let features = cur.len() / batch;
                let flat = cur.reshape(&[batch, features])?;
                ops::linear(&flat, weight, bias)?
            }
            _ => return Err(mismatch(i)),
        };
        visit(&cur);
    }
    Ok(cur)
}

/// Inference over a batch `[B, C, T]`: one network output per window.
pub fn forward_batch(spec: &NetworkSpec, weights: &Weights, x: &Tensor) -> Result<Vec<f32>> {
    Ok(infer(spec, weights, x, |_| {})?.into_data())
}

/// Inference on a single window `[C, T]`.
pub fn forward(spec: &NetworkSpec, weights: &Weights, x: &Tensor) -> Result<f32> {
    if x.rank() != 2 {
        return Err(Error::dim(format!("expected a single window [C, T], got {:?}", x.shape())));
    }
    let out = forward_batch(spec, weights, &x.clone().unsqueeze0())?;
    Ok(out[0])
}

/// Training-mode forward pass recorded on `tape`. Batch-norm layers with
/// index below `frozen_prefix` normalize with their running statistics and
/// leave them untouched. Returns `[B, 1]`.
pub fn forward_train(
    spec: &NetworkSpec,
    weights: &mut Weights,
    x: Tensor,
    tape: &mut GradTape,
    frozen_prefix: usize,
) -> Result<Tensor> {
    weights.check(spec)?;
    check_input(spec, &x)?;
    let mut next_id = 0usize;
    let mut ids = || {
        next_id += 2;
        (ParamId(next_id - 2), ParamId(next_id - 1))
    };
    let mut cur = x;
    let mut flat = false;
    for (i, (l, lw)) in spec.layers.iter().zip(weights.layers.iter_mut()).enumerate() {
        cur = match (l.kind, lw) {
            (LayerKind::Conv, LayerWeights::Conv { weight, bias }) => {
                tape.conv1d(cur, weight, bias, ids(), l.dilation, l.stride)?
            }
            (LayerKind::BatchNorm, LayerWeights::BatchNorm { gamma, beta, stats }) => {
                let mode = if i < frozen_prefix { NormMode::Infer } else { NormMode::Train };
                tape.batchnorm(cur, gamma, beta, stats, mode, ids())?
            }
            (LayerKind::Relu, _) => tape.relu(cur),
            (LayerKind::AvgPool, _) => tape.avgpool(cur, l.kernel, l.stride)?,
            (LayerKind::Linear | LayerKind::Head, LayerWeights::Linear { weight, bias }) => {
                if !flat {
                    cur = tape.flatten(cur)?;
                    flat = true;
                }
                tape.linear(cur, weight, bias, ids())?
            }
            _ => return Err(mismatch(i)),
        };
    }
    Ok(cur)
}
