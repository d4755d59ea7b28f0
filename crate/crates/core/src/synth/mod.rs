//! Synthetic multi-subject PPG + accelerometer recordings with known heart
//! rate, and the ingestion path for externally converted datasets.

mod dalia;
mod generator;

pub use dalia::{downsample_by_two, recording_from_dalia, DaliaSubject};
pub use generator::{default_profiles, synth_set, synth_subject, SubjectProfile};

use crate::error::{Error, Result};

pub const SAMPLE_RATE_HZ: f32 = 32.0;

/// Raw streams of one subject: PPG and three accelerometer axes at
/// [`SAMPLE_RATE_HZ`], plus a ground-truth heart-rate stream at its own rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub subject_id: u32,
    pub sample_rate_hz: f32,
    pub ppg: Vec<f32>,
    pub accel: [Vec<f32>; 3],
    pub truth_rate_hz: f32,
    pub truth_bpm: Vec<f32>,
}

impl Recording {
    pub fn len(&self) -> usize {
        self.ppg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ppg.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate_hz != SAMPLE_RATE_HZ {
            return Err(Error::arg(format!(
                "subject {}: sample rate {} Hz, expected {SAMPLE_RATE_HZ} Hz",
                self.subject_id, self.sample_rate_hz
            )));
        }
        if self.accel.iter().any(|a| a.len() != self.ppg.len()) {
            return Err(Error::arg(format!(
                "subject {}: accelerometer and PPG stream lengths differ",
                self.subject_id
            )));
        }
        if !(self.truth_rate_hz > 0.0) || self.truth_bpm.is_empty() {
            return Err(Error::arg(format!("subject {}: empty ground-truth stream", self.subject_id)));
        }
        Ok(())
    }
}

/// Recordings of several subjects with unique ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecordingSet {
    pub recordings: Vec<Recording>,
}

impl RecordingSet {
    pub fn new(recordings: Vec<Recording>) -> Result<Self> {
        let set = Self { recordings };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids: Vec<u32> = self.recordings.iter().map(|r| r.subject_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::arg("subject ids are not unique"));
        }
        self.recordings.iter().try_for_each(Recording::validate)
    }

    pub fn subject_ids(&self) -> Vec<u32> {
        self.recordings.iter().map(|r| r.subject_id).collect()
    }

    pub fn get(&self, id: u32) -> Option<&Recording> {
        self.recordings.iter().find(|r| r.subject_id == id)
    }
}
