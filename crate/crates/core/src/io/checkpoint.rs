use std::fs;
use std::path::Path;

use super::codec::{Reader, Writer};
use super::container::{read_container, write_container, Section, SectionKind};
use super::write_atomic;
use crate::error::{Error, Result};
use crate::model::{Model, NetworkSpec, Normalization, Weights};
use crate::quant::{FixedMultiplier, QLayer, QuantParams, QuantizedModel};
use crate::tensor::Tensor;

const MAX_RANK: u32 = 8;
const MAX_CHANNELS: u32 = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub enum Checkpoint {
    Float(Model),
    Quantized(QuantizedModel),
}

pub fn encode_float_checkpoint(model: &Model) -> Result<Vec<u8>> {
    model.weights.check(&model.spec)?;
    let mut w = Writer::default();
    let tensors = model.weights.tensors();
    w.u32(tensors.len() as u32);
    for t in tensors {
        w.u32(t.rank() as u32);
        t.shape().iter().for_each(|&d| w.u32(d as u32));
        w.f32s(t.data());
    }
    Ok(write_container(&[
        Section::new(SectionKind::Topology, model.spec.to_text().into_bytes()),
        Section::new(SectionKind::FloatWeights, w.buf),
        Section::new(SectionKind::Normalization, encode_norm(&model.norm)),
    ]))
}

pub fn encode_quantized_checkpoint(model: &QuantizedModel) -> Vec<u8> {
    let mut w = Writer::default();
    put_qparams(&mut w, &model.input);
    w.u32(model.layers.len() as u32);
    for layer in &model.layers {
        match layer {
            QLayer::Conv {
                c_in,
                c_out,
                kernel,
                stride,
                weight,
                w_scale,
                bias,
                input,
                output,
                multiplier,
                relu,
            } => {
                w.u8(1);
                [*c_in, *c_out, *kernel, *stride].iter().for_each(|&v| w.u32(v as u32));
                put_dense(&mut w, weight, *w_scale, bias, input);
                put_qparams(&mut w, output);
                w.i32(multiplier.m0);
                w.i32(multiplier.shift);
                w.u8(*relu as u8);
            }
            QLayer::AvgPool { window, stride } => {
                w.u8(2);
                w.u32(*window as u32);
                w.u32(*stride as u32);
            }
            QLayer::Linear {
                inputs,
                outputs,
                weight,
                w_scale,
                bias,
                input,
                output,
                multiplier,
                relu,
            } => {
                w.u8(3);
                w.u32(*inputs as u32);
                w.u32(*outputs as u32);
                put_dense(&mut w, weight, *w_scale, bias, input);
                put_qparams(&mut w, output);
                w.i32(multiplier.m0);
                w.i32(multiplier.shift);
                w.u8(*relu as u8);
            }
            QLayer::Head {
                inputs,
                weight,
                w_scale,
                bias,
                input,
            } => {
                w.u8(4);
                w.u32(*inputs as u32);
                put_dense(&mut w, weight, *w_scale, bias, input);
            }
        }
    }
    write_container(&[
        Section::new(SectionKind::Topology, model.spec.to_text().into_bytes()),
        Section::new(SectionKind::Quantized, w.buf),
        Section::new(SectionKind::Normalization, encode_norm(&model.norm)),
    ])
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let sections = read_container(bytes)?;
    let find = |kind: SectionKind| sections.iter().find(|s| s.kind == kind);
    let topo = find(SectionKind::Topology).ok_or_else(|| Error::format(0, "checkpoint has no topology section"))?;
    let text = std::str::from_utf8(&topo.data)
        .map_err(|e| Error::format(topo.offset + e.valid_up_to() as u64, "topology is not UTF-8"))?;
    let spec = NetworkSpec::from_text(text).map_err(|e| Error::format(topo.offset, e.to_string()))?;
    let norm_section =
        find(SectionKind::Normalization).ok_or_else(|| Error::format(0, "checkpoint has no normalization section"))?;
    let norm = decode_norm(norm_section)?;
    if norm.input_mean.len() != spec.input_channels {
        return Err(Error::format(
            norm_section.offset,
            "normalization channel count does not match the topology",
        ));
    }
    if let Some(s) = find(SectionKind::FloatWeights) {
        let weights = decode_weights(s, &spec)?;
        return Ok(Checkpoint::Float(Model { spec, weights, norm }));
    }
    if let Some(s) = find(SectionKind::Quantized) {
        let mut r = Reader::new(&s.data, s.offset);
        let input = get_qparams(&mut r)?;
        let count = r.small("layer count", 4096)?;
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let at = r.offset();
            layers.push(match r.u8()? {
                1 => {
                    let dims: Vec<usize> = (0..4)
                        .map(|_| r.small("conv dimension", MAX_CHANNELS))
                        .collect::<Result<_>>()?;
                    let (weight, w_scale, bias, input) = get_dense(&mut r, dims[1] * dims[0] * dims[2], dims[1])?;
                    let output = get_qparams(&mut r)?;
                    QLayer::Conv {
                        c_in: dims[0],
                        c_out: dims[1],
                        kernel: dims[2],
                        stride: dims[3].max(1),
                        weight,
                        w_scale,
                        bias,
                        input,
                        output,
                        multiplier: FixedMultiplier {
                            m0: r.i32()?,
                            shift: r.i32()?,
                        },
                        relu: r.u8()? != 0,
                    }
                }
                2 => QLayer::AvgPool {
                    window: r.small("pool window", MAX_CHANNELS)?.max(1),
                    stride: r.small("pool stride", MAX_CHANNELS)?.max(1),
                },
                3 => {
                    let inputs = r.small("linear inputs", u32::MAX)?;
                    let outputs = r.small("linear outputs", MAX_CHANNELS)?;
                    let (weight, w_scale, bias, input) = get_dense(&mut r, inputs * outputs, outputs)?;
                    let output = get_qparams(&mut r)?;
                    QLayer::Linear {
                        inputs,
                        outputs,
                        weight,
                        w_scale,
                        bias,
                        input,
                        output,
                        multiplier: FixedMultiplier {
                            m0: r.i32()?,
                            shift: r.i32()?,
                        },
                        relu: r.u8()? != 0,
                    }
                }
                4 => {
                    let inputs = r.small("head inputs", u32::MAX)?;
                    let (weight, w_scale, bias, input) = get_dense(&mut r, inputs, 1)?;
                    QLayer::Head {
                        inputs,
                        weight,
                        w_scale,
                        bias,
                        input,
                    }
                }
                tag => return Err(Error::format(at, format!("unknown quantized layer tag {tag}"))),
            });
        }
        r.finish()?;
        return Ok(Checkpoint::Quantized(QuantizedModel {
            spec,
            input,
            layers,
            norm,
        }));
    }
    Err(Error::format(0, "checkpoint has neither float nor quantized weights"))
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let bytes = match checkpoint {
        Checkpoint::Float(m) => encode_float_checkpoint(m)?,
        Checkpoint::Quantized(q) => encode_quantized_checkpoint(q),
    };
    write_atomic(path, &bytes)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&fs::read(path)?)
}

fn encode_norm(n: &Normalization) -> Vec<u8> {
    let mut w = Writer::default();
    w.f32s(&n.input_mean);
    w.f32s(&n.input_std);
    w.f32(n.target_offset);
    w.f32(n.target_scale);
    w.buf
}

fn decode_norm(s: &Section) -> Result<Normalization> {
    let mut r = Reader::new(&s.data, s.offset);
    let input_mean = r.f32s()?;
    let at = r.offset();
    let input_std = r.f32s()?;
    if input_std.len() != input_mean.len() || input_std.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::format(
            at,
            "input standard deviations must be positive, one per channel",
        ));
    }
    let norm = Normalization {
        input_mean,
        input_std,
        target_offset: r.f32()?,
        target_scale: r.f32()?,
    };
    r.finish()?;
    Ok(norm)
}

fn decode_weights(s: &Section, spec: &NetworkSpec) -> Result<Weights> {
    let mut r = Reader::new(&s.data, s.offset);
    let mut weights = Weights::zeros(spec);
    let count = r.small("tensor count", 1 << 20)?;
    let mut slots = weights.tensors_mut();
    if count != slots.len() {
        return Err(r.error(format!("{count} tensors stored, topology needs {}", slots.len())));
    }
    for slot in slots.iter_mut() {
        let at = r.offset();
        let rank = r.small("tensor rank", MAX_RANK)?;
        let shape: Vec<usize> = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<_>>()?;
        if shape != slot.shape() {
            return Err(Error::format(
                at,
                format!("stored tensor {shape:?} does not match the topology's {:?}", slot.shape()),
            ));
        }
        let data = r.f32s()?;
        **slot = Tensor::new(&shape, data).map_err(|e| Error::format(at, e.to_string()))?;
    }
    r.finish()?;
    Ok(weights)
}

fn put_qparams(w: &mut Writer, q: &QuantParams) {
    w.f32(q.scale);
    w.i32(q.zero_point);
}

fn get_qparams(r: &mut Reader) -> Result<QuantParams> {
    let at = r.offset();
    let q = QuantParams {
        scale: r.f32()?,
        zero_point: r.i32()?,
    };
    if !(q.scale > 0.0 && q.scale.is_finite()) || !(-128..=127).contains(&q.zero_point) {
        return Err(Error::format(at, "invalid scale or zero point"));
    }
    Ok(q)
}

fn put_dense(w: &mut Writer, weight: &[i8], w_scale: f32, bias: &[i32], input: &QuantParams) {
    w.f32(w_scale);
    w.i8s(weight);
    w.i32s(bias);
    put_qparams(w, input);
}

fn get_dense(r: &mut Reader, weights: usize, outputs: usize) -> Result<(Vec<i8>, f32, Vec<i32>, QuantParams)> {
    let at = r.offset();
    let w_scale = r.f32()?;
    if !(w_scale > 0.0 && w_scale.is_finite()) {
        return Err(Error::format(at, "weight scale must be positive"));
    }
    let at = r.offset();
    let weight = r.i8s()?;
    if weight.len() != weights {
        return Err(Error::format(
            at,
            format!("{} weights stored, layer needs {weights}", weight.len()),
        ));
    }
    let at = r.offset();
    let bias = r.i32s()?;
    if bias.len() != outputs {
        return Err(Error::format(
            at,
            format!("{} biases stored, layer needs {outputs}", bias.len()),
        ));
    }
    Ok((weight, w_scale, bias, get_qparams(r)?))
}
