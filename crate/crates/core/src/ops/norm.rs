//! Per-channel batch normalization over `[B, C, T]` (or `[B, C]`) tensors.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const BN_EPS: f32 = 1e-5;
pub const BN_MOMENTUM: f32 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// Normalize with batch statistics and update the running estimates.
    Train,
    /// Normalize with the running estimates; no state change.
    Infer,
}

/// Running mean/variance estimates of one batch-norm layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Tensor,
    pub var: Tensor,
}

impl RunningStats {
    pub fn new(channels: usize) -> Self {
        Self {
            mean: Tensor::zeros(&[channels]),
            var: Tensor::full(&[channels], 1.0),
        }
    }
}

/// Values saved by the forward pass for [`batchnorm_backward`].
#[derive(Debug, Clone)]
pub struct NormCache {
    pub xhat: Tensor,
    pub inv_std: Vec<f32>,
    pub mode: NormMode,
}

#[derive(Debug, Clone)]
pub struct NormGrads {
    pub input: Tensor,
    pub gamma: Tensor,
    pub beta: Tensor,
}

fn layout(x: &Tensor) -> Result<(usize, usize, usize)> {
    match x.shape() {
        [b, c] => Ok((*b, *c, 1)),
        [b, c, t] => Ok((*b, *c, *t)),
        s => Err(Error::dim(format!("batchnorm expects [B, C] or [B, C, T], got {s:?}"))),
    }
}

pub fn batchnorm_forward(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    stats: &mut RunningStats,
    mode: NormMode,
) -> Result<(Tensor, NormCache)> {
    let (batch, channels, steps) = layout(x)?;
    for (name, p) in [
        ("gamma", gamma),
        ("beta", beta),
        ("running mean", &stats.mean),
        ("running var", &stats.var),
    ] {
        if p.shape() != [channels] {
            return Err(Error::dim(format!(
                "batchnorm {name} {:?} does not match {channels} channels of input {:?}",
                p.shape(),
                x.shape()
            )));
        }
    }
    let n = batch * steps;
    if n == 0 {
        return Err(Error::arg("batchnorm over an empty batch"));
    }
    let xs = x.data();
    let row = |b: usize, c: usize| (b * channels + c) * steps..(b * channels + c + 1) * steps;
    let mut xhat = Tensor::zeros(x.shape());
    let mut y = Tensor::zeros(x.shape());
    let mut inv_std = vec![0.0f32; channels];
    for c in 0..channels {
        let (mean, var) = match mode {
            NormMode::Train => {
                let mut sum = 0.0f64;
                for b in 0..batch {
                    sum += xs[row(b, c)].iter().map(|&v| v as f64).sum::<f64>();
                }
                let mean = sum / n as f64;
                let mut sq = 0.0f64;
                for b in 0..batch {
                    sq += xs[row(b, c)]
                        .iter()
                        .map(|&v| {
                            let d = v as f64 - mean;
                            d * d
                        })
                        .sum::<f64>();
                }
                let var = sq / n as f64;
                let unbiased = if n > 1 { sq / (n - 1) as f64 } else { var };
                let rm = &mut stats.mean.data_mut()[c];
                *rm = (1.0 - BN_MOMENTUM) * *rm + BN_MOMENTUM * mean as f32;
                let rv = &mut stats.var.data_mut()[c];
                *rv = (1.0 - BN_MOMENTUM) * *rv + BN_MOMENTUM * unbiased as f32;
                (mean as f32, var as f32)
            }
            NormMode::Infer => (stats.mean.data()[c], stats.var.data()[c]),
        };
        let is = 1.0 / (var + BN_EPS).sqrt();
        inv_std[c] = is;
        let (g, bt) = (gamma.data()[c], beta.data()[c]);
        for b in 0..batch {
            let r = row(b, c);
            let src = &xs[r.clone()];
            for (h, &v) in xhat.data_mut()[r.clone()].iter_mut().zip(src) {
                *h = (v - mean) * is;
            }
            for (o, &h) in y.data_mut()[r.clone()].iter_mut().zip(&xhat.data()[r]) {
                *o = g * h + bt;
            }
        }
    }
    Ok((y, NormCache { xhat, inv_std, mode }))
}

pub fn batchnorm_backward(grad_out: &Tensor, cache: &NormCache, gamma: &Tensor) -> Result<NormGrads> {
    if grad_out.shape() != cache.xhat.shape() {
        return Err(Error::dim(format!(
            "batchnorm gradient {:?} does not match saved activation {:?}",
            grad_out.shape(),
            cache.xhat.shape()
        )));
    }
    let (batch, channels, steps) = layout(grad_out)?;
    let n = (batch * steps) as f32;
    let (gs, hs) = (grad_out.data(), cache.xhat.data());
    let mut dx = Tensor::zeros(grad_out.shape());
    let mut dgamma = Tensor::zeros(&[channels]);
    let mut dbeta = Tensor::zeros(&[channels]);
    let row = |b: usize, c: usize| (b * channels + c) * steps..(b * channels + c + 1) * steps;
    for c in 0..channels {
        let (mut sum_g, mut sum_gh) = (0.0f32, 0.0f32);
        for b in 0..batch {
            let r = row(b, c);
            for (&g, &h) in gs[r.clone()].iter().zip(&hs[r]) {
                sum_g += g;
                sum_gh += g * h;
            }
        }
        dgamma.data_mut()[c] = sum_gh;
        dbeta.data_mut()[c] = sum_g;
        let scale = gamma.data()[c] * cache.inv_std[c];
        let (mg, mgh) = (sum_g / n, sum_gh / n);
        for b in 0..batch {
            let r = row(b, c);
            let dst = &mut dx.data_mut()[r.clone()];
            match cache.mode {
                NormMode::Train => {
                    for ((d, &g), &h) in dst.iter_mut().zip(&gs[r.clone()]).zip(&hs[r]) {
                        *d = scale * (g - mg - h * mgh);
                    }
                }
                NormMode::Infer => {
                    for (d, &g) in dst.iter_mut().zip(&gs[r]) {
                        *d = scale * g;
                    }
                }
            }
        }
    }
    Ok(NormGrads {
        input: dx,
        gamma: dgamma,
        beta: dbeta,
    })
}
