use std::fs;
use std::path::{Path, PathBuf};

use ppg_tcn::io::{self, csv, Checkpoint};
use ppg_tcn::model::{build_seed_with, Model, Weights};
use ppg_tcn::nas::{morph_search, pareto_indices, Axis, SearchData, SearchOptions};
use ppg_tcn::pipeline::{finetune, finetune_split, fit_normalization, make_windows, HRPostProcessor, Window};
use ppg_tcn::quant::{calibrate, flatten_dilation, infer_int8_batch, quantize_model};
use ppg_tcn::synth::{default_profiles, synth_set, RecordingSet};
use ppg_tcn::train::{loso_crossval, mae, predict, train, Dataset, EpochStats, SubjectWindows, TrainConfig, TrainOptions};

use crate::config::{load_config, load_grid, RunConfig};
use crate::{Command, Failure};

type Outcome = Result<(), Failure>;

pub fn run(command: Command, verbose: bool) -> Outcome {
    let progress = |s: &EpochStats| {
        if verbose {
            eprintln!(
                "epoch {:>4}  loss {:.5}  penalty {:.5}  val MAE {:.3}",
                s.epoch, s.train_loss, s.penalty, s.val_mae
            );
        }
    };
    match command {
        Command::Synth {
            subjects,
            minutes,
            seed,
            motion,
            out,
        } => synth(subjects, minutes, seed, motion, &out),
        Command::Train {
            data,
            config,
            out,
            curve,
        } => {
            let curve = curve.unwrap_or_else(|| sibling(&out, "curve.csv"));
            train_cmd(&data, config.as_deref(), &out, &curve, &progress)
        }
        Command::Crossval { data, config, out_dir } => crossval(&data, config.as_deref(), &out_dir),
        Command::Search {
            data,
            grid,
            config,
            out,
            pareto,
            axis,
        } => {
            let pareto = pareto.unwrap_or_else(|| sibling(&out, "pareto.csv"));
            search(&data, grid.as_deref(), config.as_deref(), &out, &pareto, axis.into(), verbose)
        }
        Command::Quantize {
            ckpt,
            calib,
            calib_windows,
            out,
        } => quantize(&ckpt, &calib, calib_windows, &out),
        Command::Eval {
            ckpt,
            data,
            postprocess,
            finetune,
            config,
            report,
            trace,
        } => eval(
            &ckpt,
            &data,
            postprocess,
            finetune,
            config.as_deref(),
            report.as_deref(),
            trace.as_deref(),
        ),
    }
}

/// `out` with its extension replaced by `suffix`.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn check_input(path: &Path) -> Outcome {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::usage(format!("input file {} does not exist", path.display())))
    }
}

fn check_output(path: &Path) -> Outcome {
    if path.is_dir() {
        return Err(Failure::usage(format!("output {} is a directory", path.display())));
    }
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => {
            Err(Failure::usage(format!("output directory {} does not exist", p.display())))
        }
        _ => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::from(ppg_tcn::Error::from(e)))
}

fn load_data(path: &Path) -> Result<RecordingSet, Failure> {
    Ok(io::load_recording_set(path)?)
}

fn subject_windows(set: &RecordingSet) -> Result<Vec<SubjectWindows>, Failure> {
    set.recordings
        .iter()
        .map(|r| {
            Ok(SubjectWindows {
                id: r.subject_id,
                windows: make_windows(r)?,
            })
        })
        .collect()
}

/// Chronological split of every subject: leading windows train, then
/// `val` and finally `eval` shares at the end.
fn split(subjects: &[SubjectWindows], val: f32, eval: f32) -> (Vec<Window>, Vec<Window>, Vec<Window>) {
    let (mut tr, mut va, mut ev) = (Vec::new(), Vec::new(), Vec::new());
    for s in subjects {
        let n = s.windows.len();
        let n_eval = ((eval as f64 * n as f64).round() as usize).min(n.saturating_sub(2));
        let n_val = ((val as f64 * n as f64).round() as usize).clamp(1, n.saturating_sub(n_eval + 1).max(1));
        let a = n.saturating_sub(n_eval + n_val);
        tr.extend_from_slice(&s.windows[..a]);
        va.extend_from_slice(&s.windows[a..n - n_eval]);
        ev.extend_from_slice(&s.windows[n - n_eval..]);
    }
    (tr, va, ev)
}

fn synth(subjects: usize, minutes: f32, seed: u64, motion: Option<f32>, out: &Path) -> Outcome {
    check_output(out)?;
    if subjects == 0 {
        return Err(Failure::usage("--subjects must be at least 1"));
    }
    let mut profiles = default_profiles(subjects, minutes, seed);
    if let Some(m) = motion {
        profiles.iter_mut().for_each(|p| p.motion = m);
    }
    for p in &profiles {
        p.validate().map_err(|e| Failure::usage(e.to_string()))?;
    }
    let set = synth_set(&profiles)?;
    io::save_dataset(out, &set)?;
    println!("wrote {} subjects × {} min to {}", subjects, minutes, out.display());
    Ok(())
}

fn train_cmd(data: &Path, config: Option<&Path>, out: &Path, curve: &Path, progress: &dyn Fn(&EpochStats)) -> Outcome {
    check_input(data)?;
    check_output(out)?;
    check_output(curve)?;
    let cfg = load_config(config)?;
    let spec = build_seed_with(&cfg.model).map_err(|e| Failure::usage(e.to_string()))?;
    let subjects = subject_windows(&load_data(data)?)?;
    let (tr, va, _) = split_train_val(&subjects, &cfg);
    let norm = fit_normalization(&tr)?;
    let model = Model {
        weights: Weights::init(&spec, cfg.train.seed),
        spec,
        norm,
    };
    let train_set = Dataset::from_windows(&tr, &model.norm)?;
    let val_set = Dataset::from_windows(&va, &model.norm)?;
    let opts = TrainOptions {
        on_epoch: Some(progress),
        ..Default::default()
    };
    let (model, report) = train(model, &train_set, &val_set, &cfg.train, &opts)?;
    io::save_checkpoint(out, &Checkpoint::Float(model))?;
    write_text(curve, &csv::curve(&report.curve))?;
    println!(
        "best epoch {} validation MAE {:.3} BPM; checkpoint {}",
        report.best_epoch,
        report.best_val_mae,
        out.display()
    );
    Ok(())
}

fn split_train_val(subjects: &[SubjectWindows], cfg: &RunConfig) -> (Vec<Window>, Vec<Window>, Vec<Window>) {
    let (mut tr, va, _) = split(subjects, cfg.split.val_fraction, 0.0);
    if tr.is_empty() {
        tr = va.clone();
    }
    (tr, va, Vec::new())
}

fn crossval(data: &Path, config: Option<&Path>, out_dir: &Path) -> Outcome {
    check_input(data)?;
    if !out_dir.is_dir() {
        return Err(Failure::usage(format!(
            "output directory {} does not exist",
            out_dir.display()
        )));
    }
    let cfg = load_config(config)?;
    let spec = build_seed_with(&cfg.model).map_err(|e| Failure::usage(e.to_string()))?;
    let subjects = subject_windows(&load_data(data)?)?;
    if subjects.len() < 2 {
        return Err(Failure::usage("cross-validation needs at least two subjects"));
    }
    let report = loso_crossval(&spec, &subjects, &cfg.train)?;
    write_text(&out_dir.join("folds.csv"), &csv::folds(&report))?;
    write_text(&out_dir.join("predictions.csv"), &csv::fold_predictions(&report))?;
    for f in &report.folds {
        println!("subject {:>3}: MAE {:.3} BPM", f.subject, f.mae);
    }
    println!("mean MAE {:.3} BPM", report.mean_mae);
    Ok(())
}

fn search(
    data: &Path,
    grid: Option<&Path>,
    config: Option<&Path>,
    out: &Path,
    pareto: &Path,
    axis: Axis,
    verbose: bool,
) -> Outcome {
    check_input(data)?;
    check_output(out)?;
    check_output(pareto)?;
    let cfg = load_config(config)?;
    let grid = load_grid(grid)?;
    let seed = build_seed_with(&cfg.model).map_err(|e| Failure::usage(e.to_string()))?;
    let epochs = |e: Option<usize>| TrainConfig {
        max_epochs: e.unwrap_or(cfg.train.max_epochs),
        patience: cfg.train.patience.min(e.unwrap_or(cfg.train.max_epochs)),
        ..cfg.train.clone()
    };
    let opts = SearchOptions {
        iterations: cfg.search.iterations,
        shrink: TrainConfig {
            lr: cfg.search.shrink_lr,
            ..epochs(cfg.search.shrink_epochs)
        },
        retrain: epochs(cfg.search.retrain_epochs),
        degenerate_mae: cfg.search.degenerate_mae,
    };
    let subjects = subject_windows(&load_data(data)?)?;
    let (tr, va, ev) = split(&subjects, cfg.split.val_fraction, cfg.split.eval_fraction);
    if tr.is_empty() || ev.is_empty() {
        return Err(Failure::usage("dataset too small for a train/validation/evaluation split"));
    }
    let norm = fit_normalization(&tr)?;
    let search_data = SearchData {
        train: Dataset::from_windows(&tr, &norm)?,
        val: Dataset::from_windows(&va, &norm)?,
        eval: Dataset::from_windows(&ev, &norm)?,
        norm,
    };
    let progress = |point: usize, s: &EpochStats| {
        if verbose {
            eprintln!(
                "point {point:>3} epoch {:>4}  loss {:.5}  penalty {:.5}  val MAE {:.3}",
                s.epoch, s.train_loss, s.penalty, s.val_mae
            );
        }
    };
    let points = morph_search(&seed, &search_data, &grid, &opts, Some(&progress))?;
    let keyed: Vec<(f32, u64)> = points
        .iter()
        .map(|p| (p.mae, if axis == Axis::Params { p.params } else { p.macs }))
        .collect();
    let front: Vec<(usize, &_)> = pareto_indices(&keyed).into_iter().map(|i| (i, &points[i])).collect();
    write_text(out, &csv::search_points(&points))?;
    write_text(pareto, &csv::pareto(&front))?;
    println!("{} grid points, {} on the Pareto front", points.len(), front.len());
    Ok(())
}

fn quantize(ckpt: &Path, calib: &Path, calib_windows: usize, out: &Path) -> Outcome {
    check_input(ckpt)?;
    check_input(calib)?;
    check_output(out)?;
    if calib_windows == 0 {
        return Err(Failure::usage("--calib-windows must be at least 1"));
    }
    let Checkpoint::Float(model) = io::load_checkpoint(ckpt)? else {
        return Err(Failure::usage(format!("{} is already quantized", ckpt.display())));
    };
    let windows: Vec<Window> = subject_windows(&load_data(calib)?)?
        .into_iter()
        .flat_map(|s| s.windows)
        .collect();
    let step = windows.len().div_ceil(calib_windows).max(1);
    let samples: Vec<_> = windows.iter().step_by(step).map(|w| w.samples.clone()).collect();
    let (spec, weights) = flatten_dilation(&model.spec, &model.weights)?;
    let flat = Model {
        spec,
        weights,
        norm: model.norm,
    };
    let calibration = calibrate(&flat, &samples)?;
    let qmodel = quantize_model(&flat, &calibration)?;
    io::save_checkpoint(out, &Checkpoint::Quantized(qmodel))?;
    println!(
        "quantized with {} calibration windows; wrote {}",
        samples.len(),
        out.display()
    );
    Ok(())
}

fn eval(
    ckpt: &Path,
    data: &Path,
    postprocess: bool,
    tune: bool,
    config: Option<&Path>,
    report: Option<&Path>,
    trace: Option<&Path>,
) -> Outcome {
    check_input(ckpt)?;
    check_input(data)?;
    report.map(check_output).transpose()?;
    trace.map(check_output).transpose()?;
    let cfg = load_config(config)?;
    let checkpoint = io::load_checkpoint(ckpt)?;
    if tune && matches!(checkpoint, Checkpoint::Quantized(_)) {
        return Err(Failure::usage("--finetune needs a float checkpoint"));
    }
    let subjects = subject_windows(&load_data(data)?)?;
    if tune {
        for s in &subjects {
            finetune_split(s.windows.len(), cfg.finetune.adapt_fraction)
                .map_err(|e| Failure::usage(format!("subject {}: {e}", s.id)))?;
        }
    }
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    let (mut all_pred, mut all_post, mut all_truth) = (Vec::new(), Vec::new(), Vec::new());
    for s in &subjects {
        let truth: Vec<f32> = s.windows.iter().map(|w| w.truth_bpm).collect();
        let pred = match &checkpoint {
            Checkpoint::Float(m) => predict(m, &Dataset::from_windows(&s.windows, &m.norm)?)?,
            Checkpoint::Quantized(q) => {
                let samples: Vec<_> = s.windows.iter().map(|w| w.samples.clone()).collect();
                infer_int8_batch(q, &samples)?
            }
        };
        let post = HRPostProcessor::default().process_all(&pred);
        let (before, after) = match (&checkpoint, tune) {
            (Checkpoint::Float(m), true) => {
                let (_, r) = finetune(m, &s.windows, &cfg.finetune)?;
                (Some(r.mae_before), Some(r.mae_after))
            }
            _ => (None, None),
        };
        rows.push(csv::MaeRow {
            subject: s.id.to_string(),
            windows: pred.len(),
            mae: mae(&pred, &truth)?,
            mae_postprocessed: postprocess.then(|| mae(&post, &truth)).transpose()?,
            mae_before_finetune: before,
            mae_finetuned: after,
        });
        for (i, w) in s.windows.iter().enumerate() {
            traces.push(csv::TraceRow {
                subject: s.id,
                window: i,
                raw_bpm: pred[i],
                post_bpm: if postprocess { post[i] } else { pred[i] },
                truth_bpm: w.truth_bpm,
            });
        }
        all_pred.extend(pred);
        all_post.extend(post);
        all_truth.extend(truth);
    }
    let overall = mae(&all_pred, &all_truth)?;
    let post_overall = postprocess.then(|| mae(&all_post, &all_truth)).transpose()?;
    let mean_of = |f: fn(&csv::MaeRow) -> Option<f32>| {
        let v: Vec<f32> = rows.iter().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f32>() / v.len() as f32)
    };
    let summary = csv::MaeRow {
        subject: "all".into(),
        windows: all_pred.len(),
        mae: overall,
        mae_postprocessed: post_overall,
        mae_before_finetune: mean_of(|r| r.mae_before_finetune),
        mae_finetuned: mean_of(|r| r.mae_finetuned),
    };
    rows.push(summary.clone());
    let table = csv::mae_report(&rows);
    match report {
        Some(p) => write_text(p, &table)?,
        None => print!("{table}"),
    }
    if let Some(p) = trace {
        write_text(p, &csv::trace(&traces))?;
    }
    println!("MAE {overall:.3} BPM");
    if let Some(p) = post_overall {
        println!("post-processed MAE {p:.3} BPM");
    }
    if let (Some(b), Some(a)) = (summary.mae_before_finetune, summary.mae_finetuned) {
        println!("fine-tuning: MAE {b:.3} -> {a:.3} BPM (mean over subjects, held-out windows)");
    }
    Ok(())
}
