//! Parameter and multiply-accumulate accounting, derived from the topology alone.
//!
//! Parameters: conv `c_out·c_in·K + c_out`, batch norm `2·c`, linear
//! `in·out + out`. MACs: conv `c_out·c_in·K·T_out`, linear `in·out`; batch
//! norm, activations and pooling are free.

use super::spec::{LayerKind, NetworkSpec};
use crate::error::Result;

pub fn layer_params(spec: &NetworkSpec, index: usize) -> u64 {
    let l = &spec.layers[index];
    let (ci, co, k) = (l.c_in as u64, l.c_out as u64, l.kernel as u64);
    match l.kind {
        LayerKind::Conv => co * ci * k + co,
        LayerKind::BatchNorm => 2 * co,
        LayerKind::Linear | LayerKind::Head => ci * co + co,
        LayerKind::Relu | LayerKind::AvgPool => 0,
    }
}

pub fn layer_macs(spec: &NetworkSpec, index: usize) -> Result<u64> {
    let shapes = spec.shapes()?;
    Ok(layer_macs_with(spec, index, shapes[index + 1].len()))
}

pub(crate) fn layer_macs_with(spec: &NetworkSpec, index: usize, t_out: usize) -> u64 {
    let l = &spec.layers[index];
    let (ci, co, k) = (l.c_in as u64, l.c_out as u64, l.kernel as u64);
    match l.kind {
        LayerKind::Conv => co * ci * k * t_out as u64,
        LayerKind::Linear | LayerKind::Head => ci * co,
        _ => 0,
    }
}

pub fn count_params(spec: &NetworkSpec) -> u64 {
    (0..spec.layers.len()).map(|i| layer_params(spec, i)).sum()
}

pub fn count_macs(spec: &NetworkSpec) -> Result<u64> {
    let shapes = spec.shapes()?;
    Ok((0..spec.layers.len())
        .map(|i| layer_macs_with(spec, i, shapes[i + 1].len()))
        .sum())
}
