use std::collections::VecDeque;

use crate::error::{Error, Result};

pub const DEFAULT_HISTORY: usize = 10;
pub const DEFAULT_CLIP_FRACTION: f32 = 0.10;

/// Clips each prediction to within a fraction of the mean of the recent
/// outputs. Clipped values (not raw ones) enter the history; with an empty
/// history predictions pass through.
#[derive(Debug, Clone, PartialEq)]
pub struct HRPostProcessor {
    history: VecDeque<f32>,
    capacity: usize,
    fraction: f32,
}

impl Default for HRPostProcessor {
    fn default() -> Self {
        Self::new(DEFAULT_HISTORY, DEFAULT_CLIP_FRACTION).expect("default clipper is valid")
    }
}

impl HRPostProcessor {
    pub fn new(capacity: usize, fraction: f32) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::arg("post-processor history must hold at least one value"));
        }
        if !(fraction >= 0.0) {
            return Err(Error::arg(format!("clip fraction {fraction} must be non-negative")));
        }
        Ok(Self {
            history: VecDeque::with_capacity(capacity),
            capacity,
            fraction,
        })
    }

    pub fn fraction(&self) -> f32 {
        self.fraction
    }

    pub fn history(&self) -> impl Iterator<Item = f32> + '_ {
        self.history.iter().copied()
    }

    pub fn mean(&self) -> Option<f32> {
        if self.history.is_empty() {
            return None;
        }
        let sum: f64 = self.history.iter().map(|&v| v as f64).sum();
        Some((sum / self.history.len() as f64) as f32)
    }

    pub fn reset(&mut self) {
        self.history.clear();
    }

    pub fn process(&mut self, raw: f32) -> f32 {
        let out = match self.mean() {
            Some(m) => {
                let band = self.fraction * m;
                if (raw - m).abs() > band {
                    m + band * (raw - m).signum()
                } else {
                    raw
                }
            }
            None => raw,
        };
        if out > 0.0 && out.is_finite() {
            if self.history.len() == self.capacity {
                self.history.pop_front();
            }
            self.history.push_back(out);
        }
        out
    }

    pub fn process_all(&mut self, raw: &[f32]) -> Vec<f32> {
        raw.iter().map(|&r| self.process(r)).collect()
    }
}
