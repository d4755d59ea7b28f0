//! Independent reference implementations used as test oracles.
//!
//! Everything here works in `f64` with plain nested loops and never calls the
//! library's kernels.

#![allow(dead_code)]

pub mod data;
pub mod specs;
pub mod suites;

use ppg_tcn::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn to64(t: &Tensor) -> Vec<f64> {
    t.data().iter().map(|&v| v as f64).collect()
}

pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::uniform(shape, 1.0, rng)
}

/// `max |a − b| / max |b|`: error relative to the reference's magnitude.
pub fn rel_err(actual: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(actual.len(), reference.len());
    let scale = reference.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let diff = actual.iter().zip(reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    diff / scale
}

/// Direct evaluation of `y[m][t] = b[m] + Σ_i Σ_l x[l][t·s − d·i]·w[m][l][i]`
/// with out-of-range (negative) time indices reading zero.
/// `x` is `[B, C_in, T]`, `w` is `[C_out, C_in, K]`.
#[allow(clippy::too_many_arguments)]
pub fn conv_ref(
    x: &[f64],
    shape: (usize, usize, usize),
    w: &[f64],
    c_out: usize,
    k: usize,
    bias: &[f64],
    d: usize,
    s: usize,
) -> Vec<f64> {
    let (batch, c_in, t_in) = shape;
    let t_out = t_in.div_ceil(s);
    let mut y = vec![0.0; batch * c_out * t_out];
    for b in 0..batch {
        for m in 0..c_out {
            for t in 0..t_out {
                let mut acc = bias[m];
                for l in 0..c_in {
                    for i in 0..k {
                        let src = (t * s) as i64 - (d * i) as i64;
                        if src >= 0 {
                            acc += x[(b * c_in + l) * t_in + src as usize] * w[(m * c_in + l) * k + i];
                        }
                    }
                }
                y[(b * c_out + m) * t_out + t] = acc;
            }
        }
    }
    y
}

/// Training-mode batch norm over `[B, C, T]` with batch statistics.
pub fn batchnorm_train_ref(x: &[f64], shape: (usize, usize, usize), gamma: &[f64], beta: &[f64], eps: f64) -> Vec<f64> {
    let (batch, c, t) = shape;
    let n = (batch * t) as f64;
    let mut y = vec![0.0; x.len()];
    for ch in 0..c {
        let idx = |b: usize, tt: usize| (b * c + ch) * t + tt;
        let mut mean = 0.0;
        for b in 0..batch {
            for tt in 0..t {
                mean += x[idx(b, tt)];
            }
        }
        mean /= n;
        let mut var = 0.0;
        for b in 0..batch {
            for tt in 0..t {
                var += (x[idx(b, tt)] - mean).powi(2);
            }
        }
        var /= n;
        for b in 0..batch {
            for tt in 0..t {
                y[idx(b, tt)] = gamma[ch] * (x[idx(b, tt)] - mean) / (var + eps).sqrt() + beta[ch];
            }
        }
    }
    y
}

pub fn batchnorm_infer_ref(
    x: &[f64],
    shape: (usize, usize, usize),
    gamma: &[f64],
    beta: &[f64],
    mean: &[f64],
    var: &[f64],
    eps: f64,
) -> Vec<f64> {
    let (_, c, t) = shape;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let ch = (i / t) % c;
            gamma[ch] * (v - mean[ch]) / (var[ch] + eps).sqrt() + beta[ch]
        })
        .collect()
}

pub fn avgpool_ref(x: &[f64], rows: usize, t_in: usize, window: usize, stride: usize) -> Vec<f64> {
    let t_out = (t_in - window) / stride + 1;
    let mut y = Vec::with_capacity(rows * t_out);
    for r in 0..rows {
        for t in 0..t_out {
            let s: f64 = (0..window).map(|j| x[r * t_in + t * stride + j]).sum();
            y.push(s / window as f64);
        }
    }
    y
}

pub fn linear_ref(x: &[f64], batch: usize, n_in: usize, w: &[f64], n_out: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; batch * n_out];
    for i in 0..batch {
        for o in 0..n_out {
            let mut acc = b[o];
            for j in 0..n_in {
                acc += w[o * n_in + j] * x[i * n_in + j];
            }
            y[i * n_out + o] = acc;
        }
    }
    y
}

pub fn logcosh_ref(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter().zip(target).map(|(p, t)| (p - t).cosh().ln()).sum::<f64>() / pred.len() as f64
}

/// Central finite differences of `f` with respect to every element of `at`.
pub fn finite_diff(at: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = at.to_vec();
    (0..at.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn uniform_vec(n: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Pareto front by exhaustive pairwise domination over (error, cost):
/// a point survives when no other point is at least as good on both axes
/// and strictly better on one.
pub fn pareto_brute(points: &[(f64, u64)]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            !(0..points.len()).any(|j| {
                j != i
                    && points[j].0 <= points[i].0
                    && points[j].1 <= points[i].1
                    && (points[j].0 < points[i].0 || points[j].1 < points[i].1)
            })
        })
        .collect()
}
