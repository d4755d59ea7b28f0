use crate::error::{Error, Result};
use crate::model::{LayerKind, LayerWeights, Model, Normalization};
use crate::ops::{self, BN_EPS};
use crate::tensor::Tensor;

/// Float network with batch norms folded into their convs and ReLUs fused
/// into the preceding layer: the graph that gets quantized.
#[derive(Debug, Clone, PartialEq)]
pub enum FoldedLayer {
    /// `weight` is `[c_out, c_in, K]`.
    Conv {
        weight: Tensor,
        bias: Tensor,
        dilation: usize,
        stride: usize,
        relu: bool,
    },
    AvgPool {
        window: usize,
        stride: usize,
    },
    /// `weight` is `[out, in]`.
    Linear {
        weight: Tensor,
        bias: Tensor,
        relu: bool,
    },
    Head {
        weight: Tensor,
        bias: Tensor,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldedNet {
    pub input_channels: usize,
    pub input_len: usize,
    pub layers: Vec<FoldedLayer>,
    pub norm: Normalization,
}

impl FoldedLayer {
    /// Layers whose output gets its own activation quantization.
    pub fn has_output_range(&self) -> bool {
        matches!(self, FoldedLayer::Conv { .. } | FoldedLayer::Linear { .. })
    }
}

pub fn fold_network(model: &Model) -> Result<FoldedNet> {
    let spec = &model.spec;
    model.weights.check(spec)?;
    let mut layers: Vec<FoldedLayer> = Vec::new();
    for (i, (l, lw)) in spec.layers.iter().zip(&model.weights.layers).enumerate() {
        match (l.kind, lw) {
            (LayerKind::Conv, LayerWeights::Conv { weight, bias }) => layers.push(FoldedLayer::Conv {
                weight: weight.clone(),
                bias: bias.clone(),
                dilation: l.dilation,
                stride: l.stride,
                relu: false,
            }),
            (LayerKind::BatchNorm, LayerWeights::BatchNorm { gamma, beta, stats }) => {
                let Some(FoldedLayer::Conv {
                    weight,
                    bias,
                    relu: false,
                    ..
                }) = layers.last_mut()
                else {
                    return Err(Error::Precondition(format!(
                        "layer {i}: batch norm must directly follow a convolution to be folded"
                    )));
                };
                let width = weight.len() / weight.dim(0);
                for c in 0..weight.dim(0) {
                    let g = gamma.data()[c] / (stats.var.data()[c] + BN_EPS).sqrt();
                    weight.data_mut()[c * width..(c + 1) * width].iter_mut().for_each(|w| *w *= g);
                    let b = &mut bias.data_mut()[c];
                    *b = (*b - stats.mean.data()[c]) * g + beta.data()[c];
                }
            }
            (LayerKind::Relu, _) => match layers.last_mut() {
                Some(FoldedLayer::Conv { relu, .. } | FoldedLayer::Linear { relu, .. }) if !*relu => *relu = true,
                _ => {
                    return Err(Error::Precondition(format!(
                        "layer {i}: ReLU must follow a convolution, batch norm or linear layer"
                    )))
                }
            },
            (LayerKind::AvgPool, _) => layers.push(FoldedLayer::AvgPool {
                window: l.kernel,
                stride: l.stride,
            }),
            (LayerKind::Linear, LayerWeights::Linear { weight, bias }) => layers.push(FoldedLayer::Linear {
                weight: weight.clone(),
                bias: bias.clone(),
                relu: false,
            }),
            (LayerKind::Head, LayerWeights::Linear { weight, bias }) => layers.push(FoldedLayer::Head {
                weight: weight.clone(),
                bias: bias.clone(),
            }),
            _ => return Err(Error::dim(format!("layer {i}: weights do not match the layer kind"))),
        }
    }
    Ok(FoldedNet {
        input_channels: spec.input_channels,
        input_len: spec.input_len,
        layers,
        norm: model.norm.clone(),
    })
}

impl FoldedNet {
    /// Float inference on normalized windows `[B, C, T]`, calling `visit`
    /// with each layer's output. Returns the raw network outputs.
    pub fn forward_visit(&self, x: &Tensor, mut visit: impl FnMut(usize, &Tensor)) -> Result<Vec<f32>> {
        let batch = x.dim(0);
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            cur = match layer {
                FoldedLayer::Conv {
                    weight,
                    bias,
                    dilation,
                    stride,
                    relu,
                } => {
                    let y = ops::conv1d_forward(&cur, weight, bias, *dilation, *stride)?;
                    if *relu {
                        ops::relu(&y)
                    } else {
                        y
                    }
                }
                FoldedLayer::AvgPool { window, stride } => ops::avgpool1d(&cur, *window, *stride)?,
                FoldedLayer::Linear { weight, bias, relu } => {
                    let flat = cur.reshape(&[batch, weight.dim(1)])?;
                    let y = ops::linear(&flat, weight, bias)?;
                    if *relu {
                        ops::relu(&y)
                    } else {
                        y
                    }
                }
                FoldedLayer::Head { weight, bias } => {
                    let flat = cur.reshape(&[batch, weight.dim(1)])?;
                    ops::linear(&flat, weight, bias)?
                }
            };
            visit(i, &cur);
        }
        Ok(cur.into_data())
    }

    /// BPM estimates for raw windows `[C, T]`.
    pub fn predict(&self, windows: &[Tensor]) -> Result<Vec<f32>> {
        let mut out = Vec::with_capacity(windows.len());
        for chunk in windows.chunks(64) {
            let x = normalize_stack(&self.norm, chunk)?;
            out.extend(self.forward_visit(&x, |_, _| {})?.into_iter().map(|y| self.norm.to_bpm(y)));
        }
        Ok(out)
    }
}

pub(crate) fn normalize_stack(norm: &Normalization, windows: &[Tensor]) -> Result<Tensor> {
    let normalized = windows.iter().map(|w| norm.apply(w)).collect::<Result<Vec<_>>>()?;
    Tensor::stack(&normalized.iter().collect::<Vec<_>>())
}
