use std::f32::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex, FftPlanner};

use super::{Recording, RecordingSet, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};

const MAX_STEP_BPM_PER_S: f32 = 2.0;
const HARMONIC_GAIN: f32 = 0.3;
const NOISE_STD: f32 = 0.05;
const ACCEL_BAND_HZ: (f32, f32) = (0.5, 5.0);

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectProfile {
    pub id: u32,
    pub bpm_lo: f32,
    pub bpm_hi: f32,
    /// Motion-artifact intensity in `[0, 1]`.
    pub motion: f32,
    pub duration_s: f32,
    pub seed: u64,
}

impl SubjectProfile {
    pub fn validate(&self) -> Result<()> {
        if !(40.0..=200.0).contains(&self.bpm_lo) || !(40.0..=200.0).contains(&self.bpm_hi) || self.bpm_lo > self.bpm_hi {
            return Err(Error::arg(format!(
                "subject {}: heart-rate band [{}, {}] must satisfy 40 <= lo <= hi <= 200",
                self.id, self.bpm_lo, self.bpm_hi
            )));
        }
        if !(0.0..=1.0).contains(&self.motion) {
            return Err(Error::arg(format!(
                "subject {}: motion intensity {} outside [0, 1]",
                self.id, self.motion
            )));
        }
        if !(self.duration_s >= 16.0) {
            return Err(Error::arg(format!(
                "subject {}: duration {} s is below 16 s",
                self.id, self.duration_s
            )));
        }
        Ok(())
    }
}

/// The default cohort: subject 5 lives in a 160–180 BPM band that no other
/// subject visits; the rest share overlapping resting/active bands.
pub fn default_profiles(subjects: usize, minutes: f32, seed: u64) -> Vec<SubjectProfile> {
    const IN_BAND: [(f32, f32, f32); 8] = [
        (60.0, 110.0, 0.3),
        (65.0, 120.0, 0.4),
        (55.0, 105.0, 0.2),
        (70.0, 125.0, 0.5),
        (60.0, 115.0, 0.3),
        (62.0, 118.0, 0.4),
        (58.0, 112.0, 0.3),
        (66.0, 122.0, 0.2),
    ];
    let mut in_band = IN_BAND.iter().cycle();
    (1..=subjects as u32)
        .map(|id| {
            let (lo, hi, motion) = if id == 5 {
                (160.0, 180.0, 0.3)
            } else {
                *in_band.next().unwrap()
            };
            SubjectProfile {
                id,
                bpm_lo: lo,
                bpm_hi: hi,
                motion,
                duration_s: minutes * 60.0,
                seed: seed.wrapping_mul(1_000_003).wrapping_add(id as u64),
            }
        })
        .collect()
}

pub fn synth_set(profiles: &[SubjectProfile]) -> Result<RecordingSet> {
    RecordingSet::new(profiles.iter().map(synth_subject).collect::<Result<_>>()?)
}

/// Generates one subject. Fully determined by the profile (including its seed).
pub fn synth_subject(profile: &SubjectProfile) -> Result<Recording> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let n = (profile.duration_s * SAMPLE_RATE_HZ).round() as usize;
    let hr = heart_rate_trace(profile, n, &mut rng);
    let accel = [0, 1, 2].map(|_| accel_axis(n, &mut rng));
    // projection of the wrist motion onto the optical path
    let mix = [0.6f32, 0.3, 0.1];
    let mut phase = rng.gen_range(0.0..TAU);
    let mut ppg = Vec::with_capacity(n);
    for (i, &bpm) in hr.iter().enumerate() {
        let motion: f32 = mix.iter().zip(&accel).map(|(m, a)| m * a[i]).sum();
        let noise: f32 = rng.sample::<f32, _>(StandardNormal) * NOISE_STD;
        ppg.push(phase.sin() + HARMONIC_GAIN * (2.0 * phase).sin() + profile.motion * motion + noise);
        phase = (phase + TAU * bpm / 60.0 / SAMPLE_RATE_HZ) % TAU;
    }
    Ok(Recording {
        subject_id: profile.id,
        sample_rate_hz: SAMPLE_RATE_HZ,
        ppg,
        accel,
        truth_rate_hz: SAMPLE_RATE_HZ,
        truth_bpm: hr,
    })
}

/// Bounded random walk with per-second knots, linearly interpolated.
fn heart_rate_trace(profile: &SubjectProfile, n: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let (lo, hi) = (profile.bpm_lo, profile.bpm_hi);
    let seconds = n.div_ceil(SAMPLE_RATE_HZ as usize) + 1;
    let mut knots = Vec::with_capacity(seconds + 1);
    let mut cur = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
    let mut drift = 0.0f32;
    for _ in 0..=seconds {
        knots.push(cur);
        // smooth the walk with a slowly varying drift
        drift = (0.8 * drift + rng.gen_range(-0.8..0.8)).clamp(-MAX_STEP_BPM_PER_S, MAX_STEP_BPM_PER_S);
        let mut next = cur + drift;
        if next > hi {
            next = 2.0 * hi - next;
            drift = -drift;
        }
        if next < lo {
            next = 2.0 * lo - next;
            drift = -drift;
        }
        cur = next.clamp(lo, hi);
    }
    (0..n)
        .map(|i| {
            let t = i as f32 / SAMPLE_RATE_HZ;
            let k = t.floor() as usize;
            let f = t - k as f32;
            (knots[k] * (1.0 - f) + knots[k + 1] * f).clamp(lo, hi)
        })
        .collect()
}

/// Band-limited noise gated by random activity bursts, unit RMS while active.
fn accel_axis(n: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let mut buf: Vec<Complex<f32>> = (0..n)
        .map(|_| Complex::new(rng.sample::<f32, _>(StandardNormal), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let df = SAMPLE_RATE_HZ / n as f32;
    for (k, v) in buf.iter_mut().enumerate() {
        let f = k.min(n - k) as f32 * df;
        if f < ACCEL_BAND_HZ.0 || f > ACCEL_BAND_HZ.1 {
            *v = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let mut x: Vec<f32> = buf.iter().map(|c| c.re).collect();
    let rms = (x.iter().map(|v| v * v).sum::<f32>() / n as f32).sqrt().max(1e-12);
    x.iter_mut().for_each(|v| *v /= rms);

    // bursts: alternating rest/activity segments with 1 s raised-cosine ramps
    let ramp = SAMPLE_RATE_HZ as usize;
    let mut envelope = vec![0.0f32; n];
    let mut i = 0;
    let mut active = rng.gen_bool(0.5);
    while i < n {
        let len = (rng.gen_range(5.0..25.0) * SAMPLE_RATE_HZ) as usize;
        let end = (i + len).min(n);
        if active {
            for (j, e) in envelope[i..end].iter_mut().enumerate() {
                let edge = j.min(end - i - 1 - j);
                *e = if edge >= ramp {
                    1.0
                } else {
                    0.5 - 0.5 * (std::f32::consts::PI * edge as f32 / ramp as f32).cos()
                };
            }
        }
        active = !active;
        i = end;
    }
    x.iter().zip(&envelope).map(|(v, e)| v * (0.05 + 0.95 * e)).collect()
}
