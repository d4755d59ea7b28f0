//! Affine layer over `[B, in]` inputs.

use super::kernels;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct LinearGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

fn check(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<()> {
    if x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(1) || b.shape() != [w.dim(0)] {
        return Err(Error::dim(format!(
            "linear expects input [B, in], weight [out, in], bias [out]; got {:?}, {:?}, {:?}",
            x.shape(),
            w.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// `y = x·Wᵀ + b`.
pub fn linear(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    check(x, w, b)?;
    let (batch, out) = (x.dim(0), w.dim(0));
    let n_in = w.dim(1);
    let mut wt = vec![0.0f32; w.len()];
    for o in 0..out {
        for i in 0..n_in {
            wt[i * out + o] = w.data()[o * n_in + i];
        }
    }
    let mut y = Tensor::zeros(&[batch, out]);
    for i in 0..batch {
        kernels::linear_forward(x.row(i), &wt, b.data(), y.row_mut(i));
    }
    Ok(y)
}

pub fn linear_backward(grad_out: &Tensor, x: &Tensor, w: &Tensor) -> Result<LinearGrads> {
    check(x, w, &Tensor::zeros(&[w.dim(0)]))?;
    let (batch, out, n_in) = (x.dim(0), w.dim(0), w.dim(1));
    if grad_out.shape() != [batch, out] {
        return Err(Error::dim(format!(
            "linear gradient {:?} does not match output [{batch}, {out}]",
            grad_out.shape()
        )));
    }
    let mut gx = Tensor::zeros(x.shape());
    let mut gw = Tensor::zeros(w.shape());
    let mut gb = Tensor::zeros(&[out]);
    for i in 0..batch {
        let g = grad_out.row(i);
        let xi = x.row(i);
        for (o, &gv) in g.iter().enumerate() {
            if gv == 0.0 {
                continue;
            }
            gb.data_mut()[o] += gv;
            kernels::axpy(gv, xi, &mut gw.data_mut()[o * n_in..(o + 1) * n_in]);
            kernels::axpy(gv, &w.data()[o * n_in..(o + 1) * n_in], gx.row_mut(i));
        }
    }
    Ok(LinearGrads {
        input: gx,
        weight: gw,
        bias: gb,
    })
}
