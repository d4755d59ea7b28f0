//! LogCosh regression loss.

use std::f32::consts::LN_2;

use crate::error::{Error, Result};

/// Overflow-safe `log(cosh(e))`.
pub fn log_cosh(e: f32) -> f32 {
    let a = e.abs();
    a + (-2.0 * a).exp().ln_1p() - LN_2
}

/// Mean LogCosh over the batch and its gradient with respect to `pred`.
pub fn logcosh_loss(pred: &[f32], target: &[f32]) -> Result<(f32, Vec<f32>)> {
    if pred.len() != target.len() {
        return Err(Error::dim(format!(
            "prediction length {} does not match target length {}",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::arg("LogCosh loss over an empty batch"));
    }
    let n = pred.len() as f32;
    let mut loss = 0.0f64;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.iter().zip(target) {
        let e = p - t;
        loss += log_cosh(e) as f64;
        grad.push(e.tanh() / n);
    }
    Ok(((loss / n as f64) as f32, grad))
}
