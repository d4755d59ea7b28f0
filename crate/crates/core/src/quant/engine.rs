use super::{fold_network, is_flat, quantize_weights, Calibration, FixedMultiplier, FoldedLayer, QuantParams};
use crate::error::{Error, Result};
use crate::model::{Model, NetworkSpec, Normalization};
use crate::tensor::Tensor;

/// One integer layer. Weights are symmetric per-tensor int8 with scale
/// `w_scale`; biases are int32 in units of `input.scale · w_scale`.
#[derive(Debug, Clone, PartialEq)]
pub enum QLayer {
    Conv {
        c_in: usize,
        c_out: usize,
        kernel: usize,
        stride: usize,
        weight: Vec<i8>,
        w_scale: f32,
        bias: Vec<i32>,
        input: QuantParams,
        output: QuantParams,
        multiplier: FixedMultiplier,
        relu: bool,
    },
    AvgPool {
        window: usize,
        stride: usize,
    },
    Linear {
        inputs: usize,
        outputs: usize,
        weight: Vec<i8>,
        w_scale: f32,
        bias: Vec<i32>,
        input: QuantParams,
        output: QuantParams,
        multiplier: FixedMultiplier,
        relu: bool,
    },
    /// Single regression output, dequantized from its int32 accumulator.
    Head {
        inputs: usize,
        weight: Vec<i8>,
        w_scale: f32,
        bias: Vec<i32>,
        input: QuantParams,
    },
}

/// Immutable int8 network. `spec` is the (flattened) float topology it was
/// derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedModel {
    pub spec: NetworkSpec,
    pub input: QuantParams,
    pub layers: Vec<QLayer>,
    pub norm: Normalization,
}

fn quantize_bias(b: &[f32], scale: f64) -> Vec<i32> {
    b.iter()
        .map(|&v| (v as f64 / scale).round().clamp(i32::MIN as f64, i32::MAX as f64) as i32)
        .collect()
}

pub fn quantize_model(model: &Model, calibration: &Calibration) -> Result<QuantizedModel> {
    if !is_flat(&model.spec) {
        return Err(Error::Precondition(
            "model has dilated convolutions; apply flatten_dilation before quantizing".into(),
        ));
    }
    let net = fold_network(model)?;
    let expected = Calibration::empty(&net).ranges.len();
    if calibration.ranges.len() != expected || !calibration.is_complete() {
        return Err(Error::arg(format!(
            "calibration holds {} ranges, the network needs {expected}",
            calibration.ranges.len()
        )));
    }
    let mut ranges = calibration.ranges.iter();
    let (lo, hi) = *ranges.next().expect("input range");
    let input = QuantParams::asymmetric(lo, hi)?;
    let mut cur = input;
    let mut layers = Vec::with_capacity(net.layers.len());
    for layer in &net.layers {
        layers.push(match layer {
            FoldedLayer::Conv {
                weight,
                bias,
                stride,
                relu,
                ..
            } => {
                let (q, wq) = quantize_weights(weight.data());
                let (lo, hi) = *ranges.next().expect("one range per conv");
                let output = QuantParams::asymmetric(lo, hi)?;
                let acc_scale = cur.scale as f64 * wq.scale as f64;
                let l = QLayer::Conv {
                    c_in: weight.dim(1),
                    c_out: weight.dim(0),
                    kernel: weight.dim(2),
                    stride: *stride,
                    weight: q,
                    w_scale: wq.scale,
                    bias: quantize_bias(bias.data(), acc_scale),
                    input: cur,
                    output,
                    multiplier: FixedMultiplier::new(acc_scale / output.scale as f64)?,
                    relu: *relu,
                };
                cur = output;
                l
            }
            FoldedLayer::AvgPool { window, stride } => QLayer::AvgPool {
                window: *window,
                stride: *stride,
            },
            FoldedLayer::Linear { weight, bias, relu } => {
                let (q, wq) = quantize_weights(weight.data());
                let (lo, hi) = *ranges.next().expect("one range per linear layer");
                let output = QuantParams::asymmetric(lo, hi)?;
                let acc_scale = cur.scale as f64 * wq.scale as f64;
                let l = QLayer::Linear {
                    inputs: weight.dim(1),
                    outputs: weight.dim(0),
                    weight: q,
                    w_scale: wq.scale,
                    bias: quantize_bias(bias.data(), acc_scale),
                    input: cur,
                    output,
                    multiplier: FixedMultiplier::new(acc_scale / output.scale as f64)?,
                    relu: *relu,
                };
                cur = output;
                l
            }
            FoldedLayer::Head { weight, bias } => {
                let (q, wq) = quantize_weights(weight.data());
                QLayer::Head {
                    inputs: weight.dim(1),
                    weight: q,
                    w_scale: wq.scale,
                    bias: quantize_bias(bias.data(), cur.scale as f64 * wq.scale as f64),
                    input: cur,
                }
            }
        });
    }
    Ok(QuantizedModel {
        spec: model.spec.clone(),
        input,
        layers,
        norm: model.norm.clone(),
    })
}

/// Integer inference on one raw window `[C, T]`, returning BPM.
pub fn infer_int8(model: &QuantizedModel, window: &Tensor) -> Result<f32> {
    let x = model.norm.apply(window)?;
    if x.shape() != [model.spec.input_channels, model.spec.input_len] {
        return Err(Error::dim(format!(
            "quantized network expects [{}, {}], got {:?}",
            model.spec.input_channels,
            model.spec.input_len,
            x.shape()
        )));
    }
    let mut act: Vec<i8> = x.data().iter().map(|&v| model.input.quantize(v)).collect();
    let mut len = model.spec.input_len;
    for layer in &model.layers {
        match layer {
            QLayer::Conv {
                c_in,
                c_out,
                kernel,
                stride,
                weight,
                bias,
                input,
                output,
                multiplier,
                relu,
                ..
            } => {
                let t_out = len.div_ceil(*stride);
                let centered: Vec<i32> = act.iter().map(|&q| q as i32 - input.zero_point).collect();
                let floor = if *relu { output.zero_point } else { -128 };
                let mut out = Vec::with_capacity(c_out * t_out);
                for m in 0..*c_out {
                    for t in 0..t_out {
                        let pos = t * stride;
                        let mut acc = bias[m];
                        for ci in 0..*c_in {
                            let w = &weight[(m * c_in + ci) * kernel..(m * c_in + ci + 1) * kernel];
                            let x = &centered[ci * len..(ci + 1) * len];
                            for (lag, &wv) in w.iter().enumerate().take(pos + 1) {
                                acc = acc.wrapping_add(x[pos - lag] * wv as i32);
                            }
                        }
                        let q = output.zero_point + multiplier.apply(acc);
                        out.push(q.clamp(floor, 127) as i8);
                    }
                }
                act = out;
                len = t_out;
            }
            QLayer::AvgPool { window, stride } => {
                // pooled values keep the input's quantization parameters
                let channels = act.len() / len;
                let t_out = (len - window) / stride + 1;
                let mut out = Vec::with_capacity(channels * t_out);
                for c in 0..channels {
                    for t in 0..t_out {
                        let s: i32 = act[c * len + t * stride..c * len + t * stride + window]
                            .iter()
                            .map(|&q| q as i32)
                            .sum();
                        out.push(div_round(s, *window as i32).clamp(-128, 127) as i8);
                    }
                }
                act = out;
                len = t_out;
            }
            QLayer::Linear {
                inputs,
                outputs,
                weight,
                bias,
                input,
                output,
                multiplier,
                relu,
                ..
            } => {
                let acc = dense(&act, *inputs, *outputs, weight, bias, input.zero_point)?;
                let floor = if *relu { output.zero_point } else { -128 };
                act = acc
                    .into_iter()
                    .map(|a| (output.zero_point + multiplier.apply(a)).clamp(floor, 127) as i8)
                    .collect();
                len = 1;
            }
            QLayer::Head {
                inputs,
                weight,
                w_scale,
                bias,
                input,
            } => {
                let acc = dense(&act, *inputs, 1, weight, bias, input.zero_point)?;
                let raw = (acc[0] as f64 * input.scale as f64 * *w_scale as f64) as f32;
                return Ok(model.norm.to_bpm(raw));
            }
        }
    }
    Err(Error::Precondition("quantized network has no regression head".into()))
}

pub fn infer_int8_batch(model: &QuantizedModel, windows: &[Tensor]) -> Result<Vec<f32>> {
    windows.iter().map(|w| infer_int8(model, w)).collect()
}

fn dense(act: &[i8], inputs: usize, outputs: usize, weight: &[i8], bias: &[i32], zp: i32) -> Result<Vec<i32>> {
    if act.len() != inputs {
        return Err(Error::dim(format!("dense layer expects {inputs} inputs, got {}", act.len())));
    }
    let centered: Vec<i32> = act.iter().map(|&q| q as i32 - zp).collect();
    Ok((0..outputs)
        .map(|o| {
            weight[o * inputs..(o + 1) * inputs]
                .iter()
                .zip(&centered)
                .fold(bias[o], |acc, (&w, &x)| acc.wrapping_add(w as i32 * x))
        })
        .collect())
}

/// `a / b` rounded half away from zero, for `b > 0`.
fn div_round(a: i32, b: i32) -> i32 {
    a.signum() * ((2 * a.abs() + b) / (2 * b))
}
