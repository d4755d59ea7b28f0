use super::fold::normalize_stack;
use super::{fold_network, FoldedNet};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::tensor::Tensor;

/// Observed `[min, max]` of the normalized input and of every conv/linear
/// output (after its fused ReLU), in network order.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub ranges: Vec<(f32, f32)>,
}

impl Calibration {
    pub fn empty(net: &FoldedNet) -> Self {
        let points = 1 + net.layers.iter().filter(|l| l.has_output_range()).count();
        Self {
            ranges: vec![(f32::INFINITY, f32::NEG_INFINITY); points],
        }
    }

    /// Widens the ranges to cover `windows` (raw `[C, T]`).
    pub fn observe(&mut self, net: &FoldedNet, windows: &[Tensor]) -> Result<()> {
        for chunk in windows.chunks(64) {
            let x = normalize_stack(&net.norm, chunk)?;
            widen(&mut self.ranges[0], x.data());
            let mut slot = 1;
            let ranges = &mut self.ranges;
            net.forward_visit(&x, |i, y| {
                if net.layers[i].has_output_range() {
                    widen(&mut ranges[slot], y.data());
                    slot += 1;
                }
            })?;
        }
        Ok(())
    }

    pub fn is_complete(&self) -> bool {
        self.ranges.iter().all(|(lo, hi)| lo <= hi)
    }
}

fn widen(range: &mut (f32, f32), values: &[f32]) {
    for &v in values {
        range.0 = range.0.min(v);
        range.1 = range.1.max(v);
    }
}

/// Activation ranges of `model` over the calibration windows (raw `[C, T]`).
pub fn calibrate(model: &Model, windows: &[Tensor]) -> Result<Calibration> {
    if windows.is_empty() {
        return Err(Error::arg("calibration needs at least one window"));
    }
    let net = fold_network(model)?;
    let mut cal = Calibration::empty(&net);
    cal.observe(&net, windows)?;
    Ok(cal)
}
