//! Network topology, weights, forward pass and complexity accounting.

pub mod count;
pub mod forward;
pub mod spec;
pub mod weights;

pub use count::{count_macs, count_params, layer_macs, layer_params};
pub use forward::{forward, forward_activations, forward_batch, forward_train};
pub use spec::{
    build_seed, build_seed_with, ActShape, LayerKind, LayerSpec, NetworkSpec, SeedOptions, INPUT_CHANNELS, WINDOW_LEN,
};
pub use weights::{LayerWeights, ParamInfo, ParamRole, Weights};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Input standardization and output scaling that travel with a network.
///
/// Inputs are z-scored per channel before the network; the network's raw
/// output `y` maps to `target_offset + target_scale · y` BPM.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub input_mean: Vec<f32>,
    pub input_std: Vec<f32>,
    pub target_offset: f32,
    pub target_scale: f32,
}

impl Normalization {
    pub fn identity(channels: usize) -> Self {
        Self {
            input_mean: vec![0.0; channels],
            input_std: vec![1.0; channels],
            target_offset: 0.0,
            target_scale: 1.0,
        }
    }

    /// Standardizes a raw window `[C, T]`.
    pub fn apply(&self, raw: &Tensor) -> Result<Tensor> {
        let channels = self.input_mean.len();
        if raw.rank() != 2 || raw.dim(0) != channels {
            return Err(Error::dim(format!(
                "normalization covers {channels} channels, window is {:?}",
                raw.shape()
            )));
        }
        let mut out = raw.clone();
        for c in 0..channels {
            let (m, s) = (self.input_mean[c], self.input_std[c]);
            out.row_mut(c).iter_mut().for_each(|v| *v = (*v - m) / s);
        }
        Ok(out)
    }

    pub fn to_bpm(&self, raw_output: f32) -> f32 {
        self.target_offset + self.target_scale * raw_output
    }

    pub fn to_target(&self, bpm: f32) -> f32 {
        (bpm - self.target_offset) / self.target_scale
    }
}

/// A float network with its normalization: the unit that is trained,
/// searched, saved and deployed.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: NetworkSpec,
    pub weights: Weights,
    pub norm: Normalization,
}

impl Model {
    /// BPM estimates for already-normalized windows `[B, C, T]`.
    pub fn predict_normalized(&self, x: &Tensor) -> Result<Vec<f32>> {
        Ok(forward_batch(&self.spec, &self.weights, x)?
            .into_iter()
            .map(|y| self.norm.to_bpm(y))
            .collect())
    }

    /// BPM estimate for one raw (unnormalized) window `[C, T]`.
    pub fn predict_raw(&self, window: &Tensor) -> Result<f32> {
        let x = self.norm.apply(window)?;
        Ok(self.norm.to_bpm(forward(&self.spec, &self.weights, &x)?))
    }
}
