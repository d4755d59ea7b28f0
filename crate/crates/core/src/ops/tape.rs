//! A chain-structured gradient tape.
//!
//! Each recorded op consumes the previous op's output, so backward walks the
//! record in reverse, threading a single upstream gradient. Parameter
//! gradients accumulate into per-parameter buffers until the tape is dropped.

use super::activation::{avgpool1d, avgpool1d_backward, relu, relu_backward};
use super::conv::{conv1d_backward, conv1d_forward};
use super::linear::{linear, linear_backward};
use super::norm::{batchnorm_backward, batchnorm_forward, NormCache, NormMode, RunningStats};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Index of a trainable tensor in the caller's parameter list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

enum Entry {
    Conv {
        input: Tensor,
        weight: Tensor,
        ids: (ParamId, ParamId),
        dilation: usize,
        stride: usize,
    },
    BatchNorm {
        cache: NormCache,
        gamma: Tensor,
        ids: (ParamId, ParamId),
    },
    Relu {
        output: Tensor,
    },
    AvgPool {
        input_shape: Vec<usize>,
        window: usize,
        stride: usize,
    },
    Flatten {
        input_shape: Vec<usize>,
    },
    Linear {
        input: Tensor,
        weight: Tensor,
        ids: (ParamId, ParamId),
    },
}

pub struct GradTape {
    entries: Vec<Entry>,
    grads: Vec<Tensor>,
}

impl GradTape {
    /// A fresh tape with zeroed accumulators shaped like `params`.
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        Self {
            entries: Vec::new(),
            grads: params.into_iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn grads(&self) -> &[Tensor] {
        &self.grads
    }

    pub fn into_grads(self) -> Vec<Tensor> {
        self.grads
    }

    pub fn conv1d(
        &mut self,
        x: Tensor,
        weight: &Tensor,
        bias: &Tensor,
        ids: (ParamId, ParamId),
        dilation: usize,
        stride: usize,
    ) -> Result<Tensor> {
        let y = conv1d_forward(&x, weight, bias, dilation, stride)?;
        self.entries.push(Entry::Conv {
            input: x,
            weight: weight.clone(),
            ids,
            dilation,
            stride,
        });
        Ok(y)
    }

    pub fn batchnorm(
        &mut self,
        x: Tensor,
        gamma: &Tensor,
        beta: &Tensor,
        stats: &mut RunningStats,
        mode: NormMode,
        ids: (ParamId, ParamId),
    ) -> Result<Tensor> {
        let (y, cache) = batchnorm_forward(&x, gamma, beta, stats, mode)?;
        self.entries.push(Entry::BatchNorm {
            cache,
            gamma: gamma.clone(),
            ids,
        });
        Ok(y)
    }

    pub fn relu(&mut self, x: Tensor) -> Tensor {
        let y = relu(&x);
        self.entries.push(Entry::Relu { output: y.clone() });
        y
    }

    pub fn avgpool(&mut self, x: Tensor, window: usize, stride: usize) -> Result<Tensor> {
        let y = avgpool1d(&x, window, stride)?;
        self.entries.push(Entry::AvgPool {
            input_shape: x.shape().to_vec(),
            window,
            stride,
        });
        Ok(y)
    }

    /// Collapses `[B, ...]` to `[B, features]`.
    pub fn flatten(&mut self, x: Tensor) -> Result<Tensor> {
        let shape = x.shape().to_vec();
        let batch = shape[0];
        let features = x.row_len();
        self.entries.push(Entry::Flatten { input_shape: shape });
        x.reshape(&[batch, features])
    }

    pub fn linear(&mut self, x: Tensor, weight: &Tensor, bias: &Tensor, ids: (ParamId, ParamId)) -> Result<Tensor> {
        let y = linear(&x, weight, bias)?;
        self.entries.push(Entry::Linear {
            input: x,
            weight: weight.clone(),
            ids,
        });
        Ok(y)
    }

    fn accumulate(&mut self, id: ParamId, grad: &Tensor) -> Result<()> {
        let slot = self
            .grads
            .get_mut(id.0)
            .ok_or_else(|| Error::Tape(format!("parameter id {} out of range", id.0)))?;
        slot.add_assign(grad)
    }

    /// Propagates `grad_out` through the recorded ops in reverse and returns
    /// the gradient with respect to the first op's input. Clears the record.
    pub fn backward(&mut self, grad_out: Tensor) -> Result<Tensor> {
        if self.entries.is_empty() {
            return Err(Error::Tape("backward called without a recorded forward pass".into()));
        }
        let mut grad = grad_out;
        while let Some(entry) = self.entries.pop() {
            grad = match entry {
                Entry::Conv {
                    input,
                    weight,
                    ids,
                    dilation,
                    stride,
                } => {
                    let g = conv1d_backward(&grad, &input, &weight, dilation, stride)?;
                    self.accumulate(ids.0, &g.weight)?;
                    self.accumulate(ids.1, &g.bias)?;
                    g.input
                }
                Entry::BatchNorm { cache, gamma, ids } => {
                    let g = batchnorm_backward(&grad, &cache, &gamma)?;
                    self.accumulate(ids.0, &g.gamma)?;
                    self.accumulate(ids.1, &g.beta)?;
                    g.input
                }
                Entry::Relu { output } => relu_backward(&grad, &output)?,
                Entry::AvgPool {
                    input_shape,
                    window,
                    stride,
                } => avgpool1d_backward(&grad, &input_shape, window, stride)?,
                Entry::Flatten { input_shape } => grad.reshape(&input_shape)?,
                Entry::Linear { input, weight, ids } => {
                    let g = linear_backward(&grad, &input, &weight)?;
                    self.accumulate(ids.0, &g.weight)?;
                    self.accumulate(ids.1, &g.bias)?;
                    g.input
                }
            };
        }
        Ok(grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_without_forward_is_tape_error() {
        let mut tape = GradTape::new([]);
        assert!(matches!(tape.backward(Tensor::zeros(&[1])), Err(Error::Tape(_))));
    }

    #[test]
    fn gradients_accumulate_across_passes() {
        let w = Tensor::full(&[1, 2], 0.5);
        let b = Tensor::zeros(&[1]);
        let mut tape = GradTape::new([&w, &b]);
        let ids = (ParamId(0), ParamId(1));
        for _ in 0..2 {
            let x = Tensor::new(&[1, 2], vec![1.0, 2.0]).unwrap();
            tape.linear(x, &w, &b, ids).unwrap();
            tape.backward(Tensor::full(&[1, 1], 1.0)).unwrap();
        }
        assert_eq!(tape.grads()[0].data(), &[2.0, 4.0]);
        assert_eq!(tape.grads()[1].data(), &[2.0]);
    }
}
