//! Converter contract for PPG-Dalia exports.
//!
//! Each subject is exported as its raw streams: wrist PPG at 64 Hz, wrist
//! accelerometer at 32 Hz and the reference heart-rate labels at 0.5 Hz (one
//! label per 8 s window shifted by 2 s, label `i` time-stamped at `2·i` s).
//! [`recording_from_dalia`] turns that into a [`Recording`] at 32 Hz, which
//! is then written to a dataset container.

use super::{Recording, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};

pub const DALIA_PPG_RATE_HZ: f32 = 64.0;
pub const DALIA_LABEL_RATE_HZ: f32 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct DaliaSubject {
    pub id: u32,
    pub ppg_64hz: Vec<f32>,
    pub accel_32hz: [Vec<f32>; 3],
    pub hr_labels: Vec<f32>,
}

pub fn recording_from_dalia(subject: &DaliaSubject) -> Result<Recording> {
    if subject.hr_labels.is_empty() {
        return Err(Error::arg(format!("subject {}: no heart-rate labels", subject.id)));
    }
    let mut ppg = downsample_by_two(&subject.ppg_64hz);
    let n = subject.accel_32hz.iter().map(Vec::len).min().unwrap_or(0).min(ppg.len());
    if n == 0 {
        return Err(Error::arg(format!("subject {}: empty signal streams", subject.id)));
    }
    ppg.truncate(n);
    let accel = subject.accel_32hz.clone().map(|mut a| {
        a.truncate(n);
        a
    });
    Ok(Recording {
        subject_id: subject.id,
        sample_rate_hz: SAMPLE_RATE_HZ,
        ppg,
        accel,
        truth_rate_hz: DALIA_LABEL_RATE_HZ,
        truth_bpm: subject.hr_labels.clone(),
    })
}

/// 64 Hz → 32 Hz: zero-phase 4th-order Butterworth low-pass at 16 Hz, then
/// every second sample.
pub fn downsample_by_two(x: &[f32]) -> Vec<f32> {
    let fc = SAMPLE_RATE_HZ / 2.0;
    let mut y: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    // pole-pair quality factors of a 4th-order Butterworth
    for q in [0.541_196_100_146_197, 1.306_562_964_876_376_8] {
        let bq = Biquad::lowpass(fc as f64, DALIA_PPG_RATE_HZ as f64, q);
        bq.run(&mut y);
        y.reverse();
        bq.run(&mut y);
        y.reverse();
    }
    y.iter().step_by(2).map(|&v| v as f32).collect()
}

struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

impl Biquad {
    fn lowpass(fc: f64, fs: f64, q: f64) -> Self {
        let w0 = std::f64::consts::TAU * fc / fs;
        let alpha = w0.sin() / (2.0 * q);
        let cos = w0.cos();
        let a0 = 1.0 + alpha;
        let b1 = (1.0 - cos) / a0;
        Self {
            b: [b1 / 2.0, b1, b1 / 2.0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    fn run(&self, x: &mut [f64]) {
        let (mut z1, mut z2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let out = self.b[0] * *v + z1;
            z1 = self.b[1] * *v - self.a[0] * out + z2;
            z2 = self.b[2] * *v - self.a[1] * out;
            *v = out;
        }
    }
}
