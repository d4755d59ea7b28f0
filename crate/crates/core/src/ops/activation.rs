//! ReLU and average pooling.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Passes gradient where the forward output was positive.
pub fn relu_backward(grad_out: &Tensor, output: &Tensor) -> Result<Tensor> {
    if grad_out.shape() != output.shape() {
        return Err(Error::dim(format!(
            "relu gradient {:?} does not match output {:?}",
            grad_out.shape(),
            output.shape()
        )));
    }
    let data = grad_out
        .data()
        .iter()
        .zip(output.data())
        .map(|(&g, &o)| if o > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::new(grad_out.shape(), data)
}

pub fn pool_output_len(t_in: usize, window: usize, stride: usize) -> usize {
    (t_in - window) / stride + 1
}

fn pool_dims(x: &Tensor, window: usize, stride: usize) -> Result<(usize, usize)> {
    if window == 0 || stride == 0 {
        return Err(Error::arg("pooling window and stride must be >= 1"));
    }
    if x.rank() < 1 {
        return Err(Error::dim("pooling needs a time axis"));
    }
    let t_in = x.dim(x.rank() - 1);
    if window > t_in {
        return Err(Error::arg(format!(
            "pooling window {window} larger than sequence length {t_in}"
        )));
    }
    Ok((t_in, pool_output_len(t_in, window, stride)))
}

/// Mean pooling along the last axis.
pub fn avgpool1d(x: &Tensor, window: usize, stride: usize) -> Result<Tensor> {
    let (t_in, t_out) = pool_dims(x, window, stride)?;
    let rows = x.len() / t_in;
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = t_out;
    let mut y = Tensor::zeros(&shape);
    let inv = 1.0 / window as f32;
    for r in 0..rows {
        let src = &x.data()[r * t_in..(r + 1) * t_in];
        let dst = &mut y.data_mut()[r * t_out..(r + 1) * t_out];
        for (t, out) in dst.iter_mut().enumerate() {
            let start = t * stride;
            *out = src[start..start + window].iter().sum::<f32>() * inv;
        }
    }
    Ok(y)
}

pub fn avgpool1d_backward(grad_out: &Tensor, input_shape: &[usize], window: usize, stride: usize) -> Result<Tensor> {
    let probe = Tensor::zeros(input_shape);
    let (t_in, t_out) = pool_dims(&probe, window, stride)?;
    if grad_out.len() * t_in != probe.len() * t_out {
        return Err(Error::dim(format!(
            "pool gradient {:?} does not match input {input_shape:?}",
            grad_out.shape()
        )));
    }
    let rows = probe.len() / t_in;
    let mut gx = probe;
    let inv = 1.0 / window as f32;
    for r in 0..rows {
        let g = &grad_out.data()[r * t_out..(r + 1) * t_out];
        let dst = &mut gx.data_mut()[r * t_in..(r + 1) * t_in];
        for (t, &gv) in g.iter().enumerate() {
            for v in &mut dst[t * stride..t * stride + window] {
                *v += gv * inv;
            }
        }
    }
    Ok(gx)
}
