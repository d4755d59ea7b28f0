use crate::error::{Error, Result};
use crate::model::Normalization;
use crate::pipeline::{Window, WINDOW};
use crate::tensor::Tensor;

/// Normalized windows held contiguously, with BPM labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    channels: usize,
    samples: Vec<f32>,
    bpm: Vec<f32>,
}

impl Dataset {
    pub fn from_windows(windows: &[Window], norm: &Normalization) -> Result<Self> {
        let channels = norm.input_mean.len();
        let mut samples = Vec::with_capacity(windows.len() * channels * WINDOW);
        for w in windows {
            samples.extend_from_slice(norm.apply(&w.samples)?.data());
        }
        Ok(Self {
            channels,
            samples,
            bpm: windows.iter().map(|w| w.truth_bpm).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.bpm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bpm.is_empty()
    }

    pub fn bpm(&self) -> &[f32] {
        &self.bpm
    }

    fn stride(&self) -> usize {
        self.channels * WINDOW
    }

    /// Stacks the selected windows into `[B, C, T]`.
    pub fn batch(&self, indices: &[usize]) -> Result<Tensor> {
        let stride = self.stride();
        let mut data = Vec::with_capacity(indices.len() * stride);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::arg(format!("window {i} out of range for {} windows", self.len())));
            }
            data.extend_from_slice(&self.samples[i * stride..(i + 1) * stride]);
        }
        Tensor::new(&[indices.len(), self.channels, WINDOW], data)
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let stride = self.stride();
        let mut out = Self {
            channels: self.channels,
            samples: Vec::with_capacity(indices.len() * stride),
            bpm: Vec::with_capacity(indices.len()),
        };
        for &i in indices {
            if i >= self.len() {
                return Err(Error::arg(format!("window {i} out of range for {} windows", self.len())));
            }
            out.samples.extend_from_slice(&self.samples[i * stride..(i + 1) * stride]);
            out.bpm.push(self.bpm[i]);
        }
        Ok(out)
    }
}
