mod common;

use common::data::*;
use common::*;
use ppg_tcn::model::{LayerSpec, Model, NetworkSpec, Normalization, ParamRole, Weights};
use ppg_tcn::pipeline::Window;
use ppg_tcn::train::*;
use ppg_tcn::{Error, Tensor};
use proptest::prelude::*;

fn config(epochs: usize) -> TrainConfig {
    TrainConfig {
        max_epochs: epochs,
        patience: epochs,
        batch_size: 16,
        ..Default::default()
    }
}

#[test]
fn mae_examples() {
    assert_eq!(mae(&[70.0, 80.0], &[70.0, 80.0]).unwrap(), 0.0);
    assert_eq!(mae(&[72.0, 82.0, 62.0], &[70.0, 80.0, 60.0]).unwrap(), 2.0);
    let mut r = rng(5);
    let p = uniform_vec(100, 40.0, 200.0, &mut r);
    let t = uniform_vec(100, 40.0, 200.0, &mut r);
    let (pf, tf): (Vec<f32>, Vec<f32>) = (p.iter().map(|&v| v as f32).collect(), t.iter().map(|&v| v as f32).collect());
    let want = pf.iter().zip(&tf).map(|(a, b)| (*a as f64 - *b as f64).abs()).sum::<f64>() / 100.0;
    assert!((mae(&pf, &tf).unwrap() as f64 - want).abs() < 1e-4);
    assert!(mae(&[], &[]).is_err());
    assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
}

#[test]
fn constant_target_is_learned_by_the_bias() {
    // zero inputs: only the head bias can move the output
    let spec = NetworkSpec::new(4, 256, vec![LayerSpec::head(4 * 256)]).unwrap();
    let windows: Vec<Window> = (0..32)
        .map(|i| Window {
            samples: Tensor::zeros(&[4, 256]),
            truth_bpm: 80.0,
            subject: 1,
            index: i,
        })
        .collect();
    let norm = Normalization {
        target_offset: 70.0,
        target_scale: 10.0,
        ..Normalization::identity(4)
    };
    let data = Dataset::from_windows(&windows, &norm).unwrap();
    let model = Model {
        weights: Weights::zeros(&spec),
        spec,
        norm,
    };
    let cfg = TrainConfig { lr: 0.05, ..config(50) };
    let (model, report) = train(model, &data, &data, &cfg, &TrainOptions::default()).unwrap();
    assert!(report.curve.last().unwrap().train_loss < 1e-3, "{:?}", report.curve.last());
    assert!(evaluate_mae(&model, &data).unwrap() < 0.5);
}

#[test]
fn early_stopping_curve_example() {
    let mut es = EarlyStopping::new(3);
    let verdicts: Vec<Verdict> = [5.0, 4.0, 4.0, 4.0, 4.0, 3.0]
        .iter()
        .enumerate()
        .map(|(i, &v)| es.observe(i + 1, v))
        .take_while(|v| *v != Verdict::Stop)
        .collect();
    assert_eq!(verdicts.len(), 4);
    assert_eq!(es.best(), Some((2, 4.0)));
}

proptest! {
    #[test]
    fn early_stopping_keeps_the_running_minimum(curve in prop::collection::vec(0.0f32..10.0, 1..40), patience in 1usize..6) {
        let mut es = EarlyStopping::new(patience);
        let mut seen = Vec::new();
        for (i, &v) in curve.iter().enumerate() {
            seen.push(v);
            let verdict = es.observe(i + 1, v);
            let (epoch, best) = es.best().unwrap();
            let min = seen.iter().cloned().fold(f32::INFINITY, f32::min);
            prop_assert_eq!(best, min);
            prop_assert_eq!(curve[epoch - 1], min);
            if verdict == Verdict::Stop {
                prop_assert!(i + 1 - epoch >= patience);
                break;
            }
        }
    }
}

#[test]
fn decoupled_decay_contracts_weights_only() {
    let spec = NetworkSpec::new(
        2,
        8,
        vec![LayerSpec::conv(2, 3, 2, 1, 1), LayerSpec::batchnorm(3), LayerSpec::head(24)],
    )
    .unwrap();
    let mut w = Weights::init(&spec, 1);
    for (_, t) in w.params_mut() {
        t.fill(0.5);
    }
    let before = w.clone();
    let grads: Vec<Tensor> = w.params().iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
    let (lr, wd) = (1e-2f32, 0.1f32);
    let mut adam = Adam::new(&w, lr, wd);
    for _ in 0..3 {
        adam.step(&mut w, &grads, |_| false);
    }
    let factor = (1.0 - lr * wd).powi(3);
    for ((info, after), (_, orig)) in w.params().iter().zip(before.params()) {
        for (a, o) in after.data().iter().zip(orig.data()) {
            if info.role == ParamRole::Weight {
                assert!((a - o * factor).abs() < 1e-6, "{info:?}");
            } else {
                assert_eq!(a, o, "{info:?}");
            }
        }
    }
}

fn two_subjects() -> (Vec<Window>, Vec<Window>) {
    let a = subject(1, 60.0, 100.0, 90.0);
    let b = subject(2, 70.0, 110.0, 60.0);
    (a.windows, b.windows)
}

#[test]
fn seeded_training_is_bit_reproducible() {
    let (tr, va) = two_subjects();
    let model = tiny_model(&tr, 9);
    let train_set = Dataset::from_windows(&tr, &model.norm).unwrap();
    let val_set = Dataset::from_windows(&va, &model.norm).unwrap();
    let run = || train(model.clone(), &train_set, &val_set, &config(3), &TrainOptions::default()).unwrap();
    let (m1, r1) = run();
    let (m2, r2) = run();
    assert_eq!(m1.weights, m2.weights);
    assert_eq!(r1.curve, r2.curve);
    let other = TrainConfig { seed: 1, ..config(3) };
    let (m3, _) = train(model.clone(), &train_set, &val_set, &other, &TrainOptions::default()).unwrap();
    assert_ne!(m1.weights, m3.weights);
}

#[test]
fn returned_weights_belong_to_the_best_epoch() {
    let (tr, va) = two_subjects();
    let model = tiny_model(&tr, 4);
    let train_set = Dataset::from_windows(&tr, &model.norm).unwrap();
    let val_set = Dataset::from_windows(&va, &model.norm).unwrap();
    let (best, report) = train(model.clone(), &train_set, &val_set, &config(6), &TrainOptions::default()).unwrap();
    let min = report.curve.iter().map(|s| s.val_mae).fold(f32::INFINITY, f32::min);
    assert_eq!(report.best_val_mae, min);
    assert_eq!(report.curve[report.best_epoch - 1].val_mae, min);
    assert_eq!(evaluate_mae(&best, &val_set).unwrap(), min);
    let opts = TrainOptions {
        keep_last: true,
        ..Default::default()
    };
    let (last, _) = train(model, &train_set, &val_set, &config(6), &opts).unwrap();
    assert_eq!(evaluate_mae(&last, &val_set).unwrap(), report.curve.last().unwrap().val_mae);
}

#[test]
fn frozen_layers_stay_bit_identical() {
    let (tr, va) = two_subjects();
    let model = tiny_model(&tr, 2);
    let train_set = Dataset::from_windows(&tr, &model.norm).unwrap();
    let val_set = Dataset::from_windows(&va, &model.norm).unwrap();
    let frozen = model.spec.first_block_end();
    let opts = TrainOptions {
        frozen_layers: frozen,
        keep_last: true,
        ..Default::default()
    };
    let (after, _) = train(model.clone(), &train_set, &val_set, &config(2), &opts).unwrap();
    assert_eq!(after.weights.layers[..frozen], model.weights.layers[..frozen]);
    assert_ne!(after.weights.layers[frozen..], model.weights.layers[frozen..]);
}

#[test]
fn divergence_reports_the_epoch() {
    let (tr, va) = two_subjects();
    let model = tiny_model(&tr, 2);
    let train_set = Dataset::from_windows(&tr, &model.norm).unwrap();
    let val_set = Dataset::from_windows(&va, &model.norm).unwrap();
    let cfg = TrainConfig { lr: 1e35, ..config(5) };
    match train(model, &train_set, &val_set, &cfg, &TrainOptions::default()) {
        Err(Error::Training { epoch, .. }) => assert!((1..=5).contains(&epoch)),
        other => panic!("expected a training error, got {:?}", other.map(|r| r.1.curve)),
    }
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(TrainConfig {
        patience: 600,
        ..Default::default()
    }
    .validate()
    .is_err());
    assert!(TrainConfig {
        lr: 0.0,
        ..Default::default()
    }
    .validate()
    .is_err());
    assert!(TrainConfig {
        batch_size: 0,
        ..Default::default()
    }
    .validate()
    .is_err());
    assert!(TrainConfig::default().validate().is_ok());
}

#[test]
fn loso_protocol_on_three_subjects() {
    let subjects = vec![
        subject(1, 60.0, 100.0, 40.0),
        subject(2, 70.0, 110.0, 40.0),
        subject(3, 65.0, 105.0, 40.0),
    ];
    let report = loso_crossval(&tiny_spec(), &subjects, &config(2)).unwrap();
    assert_eq!(report.folds.len(), 3);
    for (fold, s) in report.folds.iter().zip(&subjects) {
        assert_eq!(fold.subject, s.id);
        assert!(!fold.train_subjects.contains(&s.id));
        assert_ne!(fold.val_subject, s.id);
        assert!(!fold.train_subjects.contains(&fold.val_subject));
        assert_eq!(fold.predictions.len(), s.windows.len());
        assert_eq!(mae(&fold.predictions, &fold.truths).unwrap(), fold.mae);
    }
    let mean = report.folds.iter().map(|f| f.mae as f64).sum::<f64>() / 3.0;
    assert!((report.mean_mae as f64 - mean).abs() < 1e-5);
    assert!(loso_crossval(&tiny_spec(), &subjects[..1], &config(2)).is_err());
}

/// Six in-band subjects: the default cohort with its 160-180 BPM subject
/// swapped for the next in-band profile.
#[test]
fn loso_on_in_band_cohort_stays_under_three_bpm() {
    use ppg_tcn::model::{build_seed_with, SeedOptions};
    use ppg_tcn::pipeline::make_windows;
    use ppg_tcn::synth::{default_profiles, synth_subject};

    let subjects: Vec<SubjectWindows> = default_profiles(7, 60.0, 0)
        .into_iter()
        .filter(|p| p.bpm_hi < 150.0)
        .map(|p| SubjectWindows {
            id: p.id,
            windows: make_windows(&synth_subject(&p).unwrap()).unwrap(),
        })
        .collect();
    assert_eq!(subjects.len(), 6);
    let spec = build_seed_with(&SeedOptions {
        block_channels: [8, 16, 32],
        classifier_hidden: [64, 32],
        ..SeedOptions::default()
    })
    .unwrap();
    let cfg = TrainConfig {
        max_epochs: 15,
        patience: 15,
        ..TrainConfig::default()
    };
    let report = loso_crossval(&spec, &subjects, &cfg).unwrap();
    let per: Vec<f32> = report.folds.iter().map(|f| f.mae).collect();
    assert!(report.mean_mae < 3.0, "mean {} per subject {per:?}", report.mean_mae);
}
