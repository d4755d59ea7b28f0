//! Random chain topologies and brute-force counters.

#![allow(dead_code)]

use ppg_tcn::model::{LayerKind, LayerSpec, LayerWeights, NetworkSpec, Weights};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::*;

/// A random valid chain: convs (each optionally followed by batch norm,
/// ReLU and pooling), then 0-2 hidden linear layers and the head.
pub fn random_spec(r: &mut ChaCha8Rng) -> NetworkSpec {
    let c0: usize = r.gen_range(1..5);
    let len0: usize = r.gen_range(4..48);
    let mut layers = Vec::new();
    let (mut c, mut t) = (c0, len0);
    for _ in 0..r.gen_range(1..5) {
        let c_out = r.gen_range(1..9);
        let k = r.gen_range(1..6);
        let d = [1, 2, 4, 8][r.gen_range(0..4)];
        let s = r.gen_range(1..3);
        layers.push(LayerSpec::conv(c, c_out, k, d, s));
        c = c_out;
        t = t.div_ceil(s);
        if r.gen_bool(0.6) {
            layers.push(LayerSpec::batchnorm(c));
        }
        if r.gen_bool(0.6) {
            layers.push(LayerSpec::relu(c));
        }
        if t >= 2 && r.gen_bool(0.3) {
            layers.push(LayerSpec::avgpool(c, 2, 2));
            t = (t - 2) / 2 + 1;
        }
    }
    let mut features = c * t;
    for _ in 0..r.gen_range(0..3) {
        let out = r.gen_range(1..12);
        layers.push(LayerSpec::linear(features, out));
        layers.push(LayerSpec::relu(out));
        features = out;
    }
    layers.push(LayerSpec::head(features));
    NetworkSpec::new(c0, len0, layers).unwrap()
}

/// Sum of the sizes of every trainable tensor a spec instantiates.
pub fn enumerate_params(spec: &NetworkSpec) -> u64 {
    let w = Weights::zeros(spec);
    w.layers
        .iter()
        .map(|lw| match lw {
            LayerWeights::Conv { weight, bias } | LayerWeights::Linear { weight, bias } => weight.len() + bias.len(),
            LayerWeights::BatchNorm { gamma, beta, .. } => gamma.len() + beta.len(),
            LayerWeights::None => 0,
        })
        .sum::<usize>() as u64
}

/// Counts multiply-accumulates by walking every output element and every
/// tap, tracking the time axis independently of the library.
pub fn enumerate_macs(spec: &NetworkSpec) -> u64 {
    let mut t = spec.input_len;
    let mut macs = 0u64;
    for l in &spec.layers {
        match l.kind {
            LayerKind::Conv => {
                let t_out = t.div_ceil(l.stride);
                for _m in 0..l.c_out {
                    for _tt in 0..t_out {
                        for _c in 0..l.c_in {
                            for _k in 0..l.kernel {
                                macs += 1;
                            }
                        }
                    }
                }
                t = t_out;
            }
            LayerKind::AvgPool => t = (t - l.kernel) / l.stride + 1,
            LayerKind::Linear | LayerKind::Head => {
                for _o in 0..l.c_out {
                    for _i in 0..l.c_in {
                        macs += 1;
                    }
                }
            }
            LayerKind::BatchNorm | LayerKind::Relu => {}
        }
    }
    macs
}

/// Inference of a whole chain on one window `[C, T]`, composed from the
/// f64 layer oracles.
pub fn forward_ref(spec: &NetworkSpec, weights: &Weights, x: &[f64]) -> f64 {
    let (mut c, mut t) = (spec.input_channels, spec.input_len);
    let mut cur = x.to_vec();
    for (l, lw) in spec.layers.iter().zip(&weights.layers) {
        cur = match (l.kind, lw) {
            (LayerKind::Conv, LayerWeights::Conv { weight, bias }) => {
                let y = conv_ref(
                    &cur,
                    (1, c, t),
                    &to64(weight),
                    l.c_out,
                    l.kernel,
                    &to64(bias),
                    l.dilation,
                    l.stride,
                );
                c = l.c_out;
                t = t.div_ceil(l.stride);
                y
            }
            (LayerKind::BatchNorm, LayerWeights::BatchNorm { gamma, beta, stats }) => batchnorm_infer_ref(
                &cur,
                (1, c, t),
                &to64(gamma),
                &to64(beta),
                &to64(&stats.mean),
                &to64(&stats.var),
                1e-5,
            ),
            (LayerKind::Relu, _) => cur.iter().map(|v| v.max(0.0)).collect(),
            (LayerKind::AvgPool, _) => {
                let y = avgpool_ref(&cur, c, t, l.kernel, l.stride);
                t = (t - l.kernel) / l.stride + 1;
                y
            }
            (LayerKind::Linear | LayerKind::Head, LayerWeights::Linear { weight, bias }) => {
                linear_ref(&cur, 1, cur.len(), &to64(weight), l.c_out, &to64(bias))
            }
            _ => panic!("weights do not match the NetworkSpec layers"),
        };
    }
    assert_eq!(cur.len(), 1);
    cur[0]
}

/// Seeded weights with non-trivial batch-norm statistics.
pub fn random_weights(spec: &NetworkSpec, seed: u64) -> Weights {
    let mut w = Weights::init(spec, seed);
    let mut r = rng(seed ^ 0xb17);
    for lw in &mut w.layers {
        if let LayerWeights::BatchNorm { gamma, beta, stats } = lw {
            gamma.data_mut().iter_mut().for_each(|v| *v = r.gen_range(0.5..1.5));
            beta.data_mut().iter_mut().for_each(|v| *v = r.gen_range(-0.5..0.5));
            stats.mean.data_mut().iter_mut().for_each(|v| *v = r.gen_range(-0.3..0.3));
            stats.var.data_mut().iter_mut().for_each(|v| *v = r.gen_range(0.5..2.0));
        }
    }
    w
}
