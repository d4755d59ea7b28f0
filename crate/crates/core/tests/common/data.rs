//! Small synthetic cohorts and tiny networks for training tests.

#![allow(dead_code)]

use ppg_tcn::model::{build_seed_with, Model, NetworkSpec, SeedOptions, Weights};
use ppg_tcn::pipeline::{fit_normalization, make_windows, Window};
use ppg_tcn::synth::{synth_subject, SubjectProfile};
use ppg_tcn::train::SubjectWindows;

pub fn profile(id: u32, lo: f32, hi: f32, motion: f32, seconds: f32) -> SubjectProfile {
    SubjectProfile {
        id,
        bpm_lo: lo,
        bpm_hi: hi,
        motion,
        duration_s: seconds,
        seed: 1000 + id as u64,
    }
}

pub fn subject(id: u32, lo: f32, hi: f32, seconds: f32) -> SubjectWindows {
    let rec = synth_subject(&profile(id, lo, hi, 0.3, seconds)).unwrap();
    SubjectWindows {
        id,
        windows: make_windows(&rec).unwrap(),
    }
}

pub fn tiny_spec() -> NetworkSpec {
    build_seed_with(&SeedOptions {
        block_channels: [4, 4, 4],
        classifier_hidden: [8, 8],
        ..Default::default()
    })
    .unwrap()
}

pub fn tiny_model(windows: &[Window], seed: u64) -> Model {
    let spec = tiny_spec();
    Model {
        weights: Weights::init(&spec, seed),
        spec,
        norm: fit_normalization(windows).unwrap(),
    }
}
