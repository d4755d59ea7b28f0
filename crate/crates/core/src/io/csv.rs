//! CSV renderings of training, evaluation and search results. Numbers use
//! Rust's shortest round-trip formatting, so output is byte-stable.

use std::fmt::Write;

use crate::nas::SearchPoint;
use crate::train::{CrossValReport, EpochStats};

/// `epoch,train_loss,penalty,val_mae`
pub fn curve(stats: &[EpochStats]) -> String {
    let mut out = String::from("epoch,train_loss,penalty,val_mae\n");
    for s in stats {
        let _ = writeln!(out, "{},{},{},{}", s.epoch, s.train_loss, s.penalty, s.val_mae);
    }
    out
}

/// One row per held-out subject plus a closing `mean` row:
/// `subject,val_subject,windows,best_epoch,mae`
pub fn folds(report: &CrossValReport) -> String {
    let mut out = String::from("subject,val_subject,windows,best_epoch,mae\n");
    for f in &report.folds {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            f.subject,
            f.val_subject,
            f.predictions.len(),
            f.best_epoch,
            f.mae
        );
    }
    let _ = writeln!(out, "mean,,,,{}", report.mean_mae);
    out
}

/// Per-window fold predictions: `subject,window,prediction,truth`
pub fn fold_predictions(report: &CrossValReport) -> String {
    let mut out = String::from("subject,window,prediction,truth\n");
    for f in &report.folds {
        for (i, (p, t)) in f.predictions.iter().zip(&f.truths).enumerate() {
            let _ = writeln!(out, "{},{i},{p},{t}", f.subject);
        }
    }
    out
}

const POINT_HEADER: &str = "point,kind,strength,prune_threshold,expansion,group,params,macs,mae,degenerate,conv_widths\n";

fn point_row(out: &mut String, index: usize, p: &SearchPoint) {
    let widths: Vec<String> = p.spec().conv_widths().iter().map(|w| w.to_string()).collect();
    let _ = writeln!(
        out,
        "{index},{},{},{},{},{},{},{},{},{},{}",
        p.config.kind.name(),
        p.config.strength,
        p.config.prune_threshold,
        p.config.expansion,
        p.config.group.name(),
        p.params,
        p.macs,
        p.mae,
        p.degenerate,
        widths.join(" ")
    );
}

/// Every grid point in grid order.
pub fn search_points(points: &[SearchPoint]) -> String {
    let mut out = String::from(POINT_HEADER);
    points.iter().enumerate().for_each(|(i, p)| point_row(&mut out, i, p));
    out
}

/// Pareto-optimal points as `(grid index, point)`, already sorted.
pub fn pareto(points: &[(usize, &SearchPoint)]) -> String {
    let mut out = String::from(POINT_HEADER);
    points.iter().for_each(|(i, p)| point_row(&mut out, *i, p));
    out
}

/// One row of an evaluation report.
#[derive(Debug, Clone, PartialEq)]
pub struct MaeRow {
    pub subject: String,
    pub windows: usize,
    pub mae: f32,
    pub mae_postprocessed: Option<f32>,
    pub mae_before_finetune: Option<f32>,
    pub mae_finetuned: Option<f32>,
}

/// `subject,windows,mae,mae_postprocessed,mae_before_finetune,mae_finetuned`
/// (optional columns left empty when not computed).
pub fn mae_report(rows: &[MaeRow]) -> String {
    let opt = |v: Option<f32>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from("subject,windows,mae,mae_postprocessed,mae_before_finetune,mae_finetuned\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.subject,
            r.windows,
            r.mae,
            opt(r.mae_postprocessed),
            opt(r.mae_before_finetune),
            opt(r.mae_finetuned)
        );
    }
    out
}

/// One row of a prediction trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub subject: u32,
    pub window: usize,
    pub raw_bpm: f32,
    pub post_bpm: f32,
    pub truth_bpm: f32,
}

/// `subject,window,raw_bpm,post_bpm,truth_bpm`
pub fn trace(rows: &[TraceRow]) -> String {
    let mut out = String::from("subject,window,raw_bpm,post_bpm,truth_bpm\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.subject, r.window, r.raw_bpm, r.post_bpm, r.truth_bpm);
    }
    out
}
