use crate::error::{Error, Result};
use crate::model::{Normalization, INPUT_CHANNELS};
use crate::synth::Recording;
use crate::tensor::Tensor;

/// Window length in samples (8 s at 32 Hz).
pub const WINDOW: usize = 256;
/// Hop between consecutive windows (2 s, 75% overlap).
pub const HOP: usize = 64;

/// One raw (unnormalized) input window: channel 0 is PPG, 1–3 the
/// accelerometer axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub samples: Tensor,
    pub truth_bpm: f32,
    pub subject: u32,
    /// Position of the window in its recording.
    pub index: usize,
}

pub fn window_count(len: usize) -> usize {
    if len < WINDOW {
        0
    } else {
        (len - WINDOW) / HOP + 1
    }
}

/// Cuts a recording into overlapping windows labeled with the mean
/// ground-truth heart rate inside each window.
pub fn make_windows(rec: &Recording) -> Result<Vec<Window>> {
    rec.validate()?;
    let len = rec.len();
    if len < WINDOW {
        return Err(Error::arg(format!(
            "subject {}: {len} samples is shorter than one {WINDOW}-sample window",
            rec.subject_id
        )));
    }
    let streams = [&rec.ppg, &rec.accel[0], &rec.accel[1], &rec.accel[2]];
    (0..window_count(len))
        .map(|index| {
            let start = index * HOP;
            let mut data = Vec::with_capacity(INPUT_CHANNELS * WINDOW);
            for s in streams {
                data.extend_from_slice(&s[start..start + WINDOW]);
            }
            let truth_bpm = window_label(rec, start)?;
            Ok(Window {
                samples: Tensor::new(&[INPUT_CHANNELS, WINDOW], data)?,
                truth_bpm,
                subject: rec.subject_id,
                index,
            })
        })
        .collect()
}

fn window_label(rec: &Recording, start: usize) -> Result<f32> {
    let t0 = start as f64 / rec.sample_rate_hz as f64;
    let t1 = (start + WINDOW) as f64 / rec.sample_rate_hz as f64;
    let rate = rec.truth_rate_hz as f64;
    let last = rec.truth_bpm.len() - 1;
    let first = ((t0 * rate).ceil() as usize).min(last);
    // truth samples time-stamped inside [t0, t1)
    let end = ((t1 * rate).ceil() as usize).min(rec.truth_bpm.len());
    let slice = if end > first {
        &rec.truth_bpm[first..end]
    } else {
        &rec.truth_bpm[first..=first]
    };
    let mean = (slice.iter().map(|&v| v as f64).sum::<f64>() / slice.len() as f64) as f32;
    if !(mean > 20.0 && mean < 250.0) {
        return Err(Error::arg(format!(
            "subject {}: window at sample {start} has implausible label {mean} BPM",
            rec.subject_id
        )));
    }
    Ok(mean)
}

/// Per-channel z-score statistics and target standardization fitted on
/// training windows only.
pub fn fit_normalization(train: &[Window]) -> Result<Normalization> {
    if train.is_empty() {
        return Err(Error::arg("cannot fit normalization on zero windows"));
    }
    let channels = train[0].samples.dim(0);
    let mut mean = vec![0f64; channels];
    let mut sq = vec![0f64; channels];
    let mut count = 0f64;
    for w in train {
        if w.samples.shape() != [channels, WINDOW] {
            return Err(Error::dim(format!("window has shape {:?}", w.samples.shape())));
        }
        for c in 0..channels {
            for &v in w.samples.row(c) {
                mean[c] += v as f64;
                sq[c] += v as f64 * v as f64;
            }
        }
        count += WINDOW as f64;
    }
    let mut input_mean = Vec::with_capacity(channels);
    let mut input_std = Vec::with_capacity(channels);
    for c in 0..channels {
        let m = mean[c] / count;
        let var = (sq[c] / count - m * m).max(0.0);
        input_mean.push(m as f32);
        input_std.push(var.sqrt().max(1e-6) as f32);
    }
    let n = train.len() as f64;
    let t_mean = train.iter().map(|w| w.truth_bpm as f64).sum::<f64>() / n;
    let t_var = train.iter().map(|w| (w.truth_bpm as f64 - t_mean).powi(2)).sum::<f64>() / n;
    Ok(Normalization {
        input_mean,
        input_std,
        target_offset: t_mean as f32,
        target_scale: t_var.sqrt().max(1.0) as f32,
    })
}
