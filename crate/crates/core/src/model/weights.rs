//! Parameter storage aligned with a [`NetworkSpec`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::spec::{LayerKind, NetworkSpec};
use crate::error::{Error, Result};
use crate::ops::RunningStats;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub enum LayerWeights {
    None,
    /// `weight` is `[c_out, c_in, K]`.
    Conv {
        weight: Tensor,
        bias: Tensor,
    },
    BatchNorm {
        gamma: Tensor,
        beta: Tensor,
        stats: RunningStats,
    },
    /// `weight` is `[out, in]`; also used by the head.
    Linear {
        weight: Tensor,
        bias: Tensor,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    Weight,
    Bias,
    Gamma,
    Beta,
}

/// Where a trainable tensor lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamInfo {
    pub layer: usize,
    pub role: ParamRole,
}

impl ParamInfo {
    /// Weight decay applies to conv and linear weights only.
    pub fn decays(&self) -> bool {
        self.role == ParamRole::Weight
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub layers: Vec<LayerWeights>,
}

impl Weights {
    /// All-zero weights with unit running variance.
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let layers = spec
            .layers
            .iter()
            .map(|l| match l.kind {
                LayerKind::Conv => LayerWeights::Conv {
                    weight: Tensor::zeros(&[l.c_out, l.c_in, l.kernel]),
                    bias: Tensor::zeros(&[l.c_out]),
                },
                LayerKind::BatchNorm => LayerWeights::BatchNorm {
                    gamma: Tensor::zeros(&[l.c_out]),
                    beta: Tensor::zeros(&[l.c_out]),
                    stats: RunningStats::new(l.c_out),
                },
                LayerKind::Linear | LayerKind::Head => LayerWeights::Linear {
                    weight: Tensor::zeros(&[l.c_out, l.c_in]),
                    bias: Tensor::zeros(&[l.c_out]),
                },
                LayerKind::Relu | LayerKind::AvgPool => LayerWeights::None,
            })
            .collect();
        Self { layers }
    }

    /// He-uniform conv/linear weights, zero biases, identity batch norm.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Self::zeros(spec);
        for (l, lw) in spec.layers.iter().zip(&mut w.layers) {
            match lw {
                LayerWeights::Conv { weight, .. } => {
                    let fan_in = (l.c_in * l.kernel) as f32;
                    *weight = Tensor::uniform(weight.shape(), (6.0 / fan_in).sqrt(), &mut rng);
                }
                LayerWeights::Linear { weight, .. } => {
                    let fan_in = l.c_in as f32;
                    *weight = Tensor::uniform(weight.shape(), (6.0 / fan_in).sqrt(), &mut rng);
                }
                LayerWeights::BatchNorm { gamma, .. } => gamma.fill(1.0),
                LayerWeights::None => {}
            }
        }
        w
    }

    /// Checks every tensor against the shapes implied by `spec`.
    pub fn check(&self, spec: &NetworkSpec) -> Result<()> {
        if self.layers.len() != spec.layers.len() {
            return Err(Error::dim(format!(
                "weights cover {} layers but the topology has {}",
                self.layers.len(),
                spec.layers.len()
            )));
        }
        let expect = Self::zeros(spec);
        for (i, (have, want)) in self.layers.iter().zip(&expect.layers).enumerate() {
            let same = match (have, want) {
                (LayerWeights::None, LayerWeights::None) => true,
                (LayerWeights::Conv { weight: a, bias: b }, LayerWeights::Conv { weight: c, bias: d })
                | (LayerWeights::Linear { weight: a, bias: b }, LayerWeights::Linear { weight: c, bias: d }) => {
                    a.shape() == c.shape() && b.shape() == d.shape()
                }
                (LayerWeights::BatchNorm { gamma, beta, stats }, LayerWeights::BatchNorm { gamma: g2, .. }) => {
                    gamma.shape() == g2.shape()
                        && beta.shape() == g2.shape()
                        && stats.mean.shape() == g2.shape()
                        && stats.var.shape() == g2.shape()
                }
                _ => false,
            };
            if !same {
                return Err(Error::dim(format!(
                    "layer {i}: weights {} do not match the topology {}",
                    describe(have),
                    describe(want)
                )));
            }
        }
        Ok(())
    }

    /// Trainable tensors in canonical order with their location.
    pub fn params(&self) -> Vec<(ParamInfo, &Tensor)> {
        let mut out = Vec::new();
        for (layer, lw) in self.layers.iter().enumerate() {
            let info = |role| ParamInfo { layer, role };
            match lw {
                LayerWeights::Conv { weight, bias } | LayerWeights::Linear { weight, bias } => {
                    out.push((info(ParamRole::Weight), weight));
                    out.push((info(ParamRole::Bias), bias));
                }
                LayerWeights::BatchNorm { gamma, beta, .. } => {
                    out.push((info(ParamRole::Gamma), gamma));
                    out.push((info(ParamRole::Beta), beta));
                }
                LayerWeights::None => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<(ParamInfo, &mut Tensor)> {
        let mut out = Vec::new();
        for (layer, lw) in self.layers.iter_mut().enumerate() {
            let info = |role| ParamInfo { layer, role };
            match lw {
                LayerWeights::Conv { weight, bias } | LayerWeights::Linear { weight, bias } => {
                    out.push((info(ParamRole::Weight), weight));
                    out.push((info(ParamRole::Bias), bias));
                }
                LayerWeights::BatchNorm { gamma, beta, .. } => {
                    out.push((info(ParamRole::Gamma), gamma));
                    out.push((info(ParamRole::Beta), beta));
                }
                LayerWeights::None => {}
            }
        }
        out
    }

    /// Every stored tensor (trainable and running statistics) in declared
    /// layer order, as serialized in checkpoints.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for lw in &self.layers {
            match lw {
                LayerWeights::Conv { weight, bias } | LayerWeights::Linear { weight, bias } => {
                    out.extend([weight, bias]);
                }
                LayerWeights::BatchNorm { gamma, beta, stats } => {
                    out.extend([gamma, beta, &stats.mean, &stats.var]);
                }
                LayerWeights::None => {}
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for lw in &mut self.layers {
            match lw {
                LayerWeights::Conv { weight, bias } | LayerWeights::Linear { weight, bias } => {
                    out.push(weight);
                    out.push(bias);
                }
                LayerWeights::BatchNorm { gamma, beta, stats } => {
                    out.push(gamma);
                    out.push(beta);
                    out.push(&mut stats.mean);
                    out.push(&mut stats.var);
                }
                LayerWeights::None => {}
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }
}

fn describe(lw: &LayerWeights) -> String {
    match lw {
        LayerWeights::None => "(none)".into(),
        LayerWeights::Conv { weight, .. } => format!("conv {:?}", weight.shape()),
        LayerWeights::Linear { weight, .. } => format!("linear {:?}", weight.shape()),
        LayerWeights::BatchNorm { gamma, .. } => format!("batchnorm {:?}", gamma.shape()),
    }
}
