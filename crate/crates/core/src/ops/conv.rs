//! Dilated causal 1-D convolution.
//!
//! `y[m][t] = bias[m] + Σ_i Σ_l x[l][t·s − d·i] · w[m][l][i]`, where the input
//! is left-padded with `(K − 1)·d` zeros so that no output reads the future.
//! Weight tap `i` multiplies the sample `i·d` steps in the past.

use super::kernels::{self, ConvGeom};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Gradients produced by [`conv1d_backward`].
#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Tensor,
    pub weight: Tensor,
    pub bias: Tensor,
}

fn check(x: &Tensor, w: &Tensor, bias: &Tensor, dilation: usize, stride: usize) -> Result<()> {
    if dilation == 0 || stride == 0 {
        return Err(Error::arg(format!(
            "dilation ({dilation}) and stride ({stride}) must be >= 1"
        )));
    }
    if x.rank() != 3 || w.rank() != 3 {
        return Err(Error::dim(format!(
            "conv1d expects input [B, C_in, T] and weight [C_out, C_in, K], got input {:?} and weight {:?}",
            x.shape(),
            w.shape()
        )));
    }
    if x.dim(1) != w.dim(1) {
        return Err(Error::dim(format!(
            "input {:?} has {} channels but weight {:?} expects {}",
            x.shape(),
            x.dim(1),
            w.shape(),
            w.dim(1)
        )));
    }
    if bias.shape() != [w.dim(0)] {
        return Err(Error::dim(format!(
            "bias {:?} does not match weight {:?}",
            bias.shape(),
            w.shape()
        )));
    }
    Ok(())
}

/// Output length of a causal convolution with stride `stride` over `t_in` steps.
pub fn conv_output_len(t_in: usize, stride: usize) -> usize {
    t_in.div_ceil(stride)
}

/// Batched causal convolution: `x` is `[B, C_in, T]`, result `[B, C_out, ceil(T/s)]`.
pub fn conv1d_forward(x: &Tensor, w: &Tensor, bias: &Tensor, dilation: usize, stride: usize) -> Result<Tensor> {
    check(x, w, bias, dilation, stride)?;
    let (batch, c_in, t_in) = (x.dim(0), x.dim(1), x.dim(2));
    let geom = ConvGeom::new(c_in, w.dim(0), w.dim(2), dilation, stride, t_in);
    let mut y = Tensor::zeros(&[batch, geom.c_out, geom.t_out]);
    let mut phases = vec![0.0f32; geom.phases_len()];
    for b in 0..batch {
        kernels::build_phases(&geom, x.row(b), t_in, &mut phases);
        kernels::conv_forward(&geom, &phases, w.data(), bias.data(), y.row_mut(b));
    }
    Ok(y)
}

/// Single-sample form: `x` is `[C_in, T]`, result `[C_out, ceil(T/s)]`.
pub fn conv1d_causal(x: &Tensor, w: &Tensor, bias: &Tensor, dilation: usize, stride: usize) -> Result<Tensor> {
    if x.rank() != 2 {
        return Err(Error::dim(format!(
            "conv1d_causal expects input [C_in, T], got {:?} (weight {:?})",
            x.shape(),
            w.shape()
        )));
    }
    let y = conv1d_forward(&x.clone().unsqueeze0(), w, bias, dilation, stride)?;
    let shape = y.shape()[1..].to_vec();
    y.reshape(&shape)
}

/// Backward pass of [`conv1d_forward`] given the saved input and weight.
pub fn conv1d_backward(grad_out: &Tensor, x: &Tensor, w: &Tensor, dilation: usize, stride: usize) -> Result<ConvGrads> {
    let bias = Tensor::zeros(&[w.dim(0)]);
    check(x, w, &bias, dilation, stride)?;
    let (batch, c_in, t_in) = (x.dim(0), x.dim(1), x.dim(2));
    let geom = ConvGeom::new(c_in, w.dim(0), w.dim(2), dilation, stride, t_in);
    if grad_out.shape() != [batch, geom.c_out, geom.t_out] {
        return Err(Error::dim(format!(
            "gradient {:?} does not match conv output [{batch}, {}, {}]",
            grad_out.shape(),
            geom.c_out,
            geom.t_out
        )));
    }
    let mut grad_x = Tensor::zeros(x.shape());
    let mut grad_w = Tensor::zeros(w.shape());
    let mut grad_b = Tensor::zeros(&[geom.c_out]);
    let per = geom.phases_len();
    let mut phases = vec![0.0f32; batch * per];
    for b in 0..batch {
        let g = grad_out.row(b);
        for (co, gb) in grad_b.data_mut().iter_mut().enumerate() {
            *gb += g[co * geom.t_out..(co + 1) * geom.t_out].iter().sum::<f32>();
        }
        kernels::build_phases(&geom, x.row(b), t_in, &mut phases[b * per..(b + 1) * per]);
    }
    let mut grad_phases = vec![0.0f32; batch * per];
    kernels::conv_backward(
        &geom,
        batch,
        &phases,
        w.data(),
        grad_out.data(),
        grad_w.data_mut(),
        &mut grad_phases,
    );
    for b in 0..batch {
        kernels::gather_phases(&geom, &grad_phases[b * per..(b + 1) * per], t_in, grad_x.row_mut(b));
    }
    Ok(ConvGrads {
        input: grad_x,
        weight: grad_w,
        bias: grad_b,
    })
}
