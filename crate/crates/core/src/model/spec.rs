//! Declarative chain topologies.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{activation::pool_output_len, conv_output_len};

pub const INPUT_CHANNELS: usize = 4;
pub const WINDOW_LEN: usize = 256;

const TOPOLOGY_HEADER: &str = "tcn-topology v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv,
    BatchNorm,
    Relu,
    AvgPool,
    Linear,
    /// Single-output linear regression neuron; always last.
    Head,
}

impl LayerKind {
    fn keyword(self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::BatchNorm => "bn",
            LayerKind::Relu => "relu",
            LayerKind::AvgPool => "pool",
            LayerKind::Linear => "linear",
            LayerKind::Head => "head",
        }
    }
}

/// One layer of a chain. For pooling `kernel` is the window; for linear
/// layers `c_in`/`c_out` are feature counts (the input of the first linear
/// layer is the flattened `channels × time` activation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub dilation: usize,
    pub stride: usize,
}

impl LayerSpec {
    pub fn conv(c_in: usize, c_out: usize, kernel: usize, dilation: usize, stride: usize) -> Self {
        Self {
            kind: LayerKind::Conv,
            c_in,
            c_out,
            kernel,
            dilation,
            stride,
        }
    }

    fn pointwise(kind: LayerKind, channels: usize) -> Self {
        Self {
            kind,
            c_in: channels,
            c_out: channels,
            kernel: 1,
            dilation: 1,
            stride: 1,
        }
    }

    pub fn batchnorm(channels: usize) -> Self {
        Self::pointwise(LayerKind::BatchNorm, channels)
    }

    pub fn relu(channels: usize) -> Self {
        Self::pointwise(LayerKind::Relu, channels)
    }

    pub fn avgpool(channels: usize, window: usize, stride: usize) -> Self {
        Self {
            kernel: window,
            stride,
            ..Self::pointwise(LayerKind::AvgPool, channels)
        }
    }

    pub fn linear(features_in: usize, features_out: usize) -> Self {
        Self {
            kind: LayerKind::Linear,
            c_in: features_in,
            c_out: features_out,
            kernel: 1,
            dilation: 1,
            stride: 1,
        }
    }

    pub fn head(features_in: usize) -> Self {
        Self {
            kind: LayerKind::Head,
            ..Self::linear(features_in, 1)
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.kind, LayerKind::Linear | LayerKind::Head)
    }
}

/// Activation shape between layers (batch axis omitted).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActShape {
    Seq { channels: usize, len: usize },
    Flat { features: usize },
}

impl ActShape {
    pub fn channels(&self) -> usize {
        match *self {
            ActShape::Seq { channels, .. } => channels,
            ActShape::Flat { features } => features,
        }
    }

    pub fn numel(&self) -> usize {
        match *self {
            ActShape::Seq { channels, len } => channels * len,
            ActShape::Flat { features } => features,
        }
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        match *self {
            ActShape::Seq { len, .. } => len,
            ActShape::Flat { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NetworkSpec {
    pub input_channels: usize,
    pub input_len: usize,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(input_channels: usize, input_len: usize, layers: Vec<LayerSpec>) -> Result<Self> {
        let spec = Self {
            input_channels,
            input_len,
            layers,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Input shape followed by the output shape of every layer.
    pub fn shapes(&self) -> Result<Vec<ActShape>> {
        let mut cur = ActShape::Seq {
            channels: self.input_channels,
            len: self.input_len,
        };
        let mut out = Vec::with_capacity(self.layers.len() + 1);
        out.push(cur);
        for (i, l) in self.layers.iter().enumerate() {
            if l.kernel == 0 || l.dilation == 0 || l.stride == 0 {
                return Err(Error::arg(format!("layer {i}: kernel, dilation and stride must be >= 1")));
            }
            if l.c_in == 0 || l.c_out == 0 {
                return Err(Error::arg(format!("layer {i}: channel counts must be >= 1")));
            }
            let expect = if l.is_dense() { cur.numel() } else { cur.channels() };
            if l.c_in != expect {
                return Err(Error::dim(format!(
                    "layer {i} ({}) expects {} inputs but receives {expect}",
                    l.kind.keyword(),
                    l.c_in
                )));
            }
            cur = match (l.kind, cur) {
                (LayerKind::Conv, ActShape::Seq { len, .. }) => ActShape::Seq {
                    channels: l.c_out,
                    len: conv_output_len(len, l.stride),
                },
                (LayerKind::AvgPool, ActShape::Seq { channels, len }) => {
                    if l.kernel > len {
                        return Err(Error::arg(format!(
                            "layer {i}: pooling window {} larger than sequence length {len}",
                            l.kernel
                        )));
                    }
                    ActShape::Seq {
                        channels,
                        len: pool_output_len(len, l.kernel, l.stride),
                    }
                }
                (LayerKind::BatchNorm | LayerKind::Relu, s) => {
                    if l.c_out != l.c_in {
                        return Err(Error::dim(format!("layer {i}: pointwise layer changes channel count")));
                    }
                    s
                }
                (LayerKind::Linear | LayerKind::Head, _) => ActShape::Flat { features: l.c_out },
                (kind, ActShape::Flat { .. }) => {
                    return Err(Error::dim(format!(
                        "layer {i}: {} cannot follow a dense layer",
                        kind.keyword()
                    )))
                }
            };
            out.push(cur);
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let last = self.layers.last().ok_or_else(|| Error::arg("network has no layers"))?;
        if last.kind != LayerKind::Head || last.c_out != 1 {
            return Err(Error::arg("the final layer must be a single-output regression head"));
        }
        if let Some(i) = self.layers[..self.layers.len() - 1]
            .iter()
            .position(|l| l.kind == LayerKind::Head)
        {
            return Err(Error::arg(format!("layer {i}: regression head before the end of the chain")));
        }
        self.shapes().map(|_| ())
    }

    pub fn conv_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.kind == LayerKind::Conv)
            .map(|(i, _)| i)
    }

    /// Output channel counts of the convolutions, in order.
    pub fn conv_widths(&self) -> Vec<usize> {
        self.conv_indices().map(|i| self.layers[i].c_out).collect()
    }

    /// Index one past the first pooling layer: the extent of the first block.
    pub fn first_block_end(&self) -> usize {
        self.layers
            .iter()
            .position(|l| l.kind == LayerKind::AvgPool)
            .map_or(0, |i| i + 1)
    }

    /// Output channels of each block (the conv width feeding each pool).
    pub fn block_channels(&self) -> Vec<usize> {
        let mut width = self.input_channels;
        let mut out = Vec::new();
        for l in &self.layers {
            match l.kind {
                LayerKind::Conv => width = l.c_out,
                LayerKind::AvgPool => out.push(width),
                _ => {}
            }
        }
        out
    }

    /// Versioned, line-oriented text form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{TOPOLOGY_HEADER}").unwrap();
        writeln!(s, "input {} {}", self.input_channels, self.input_len).unwrap();
        for l in &self.layers {
            match l.kind {
                LayerKind::Conv => writeln!(
                    s,
                    "conv {} {} k={} d={} s={}",
                    l.c_in, l.c_out, l.kernel, l.dilation, l.stride
                ),
                LayerKind::AvgPool => writeln!(s, "pool {} k={} s={}", l.c_in, l.kernel, l.stride),
                LayerKind::BatchNorm | LayerKind::Relu => writeln!(s, "{} {}", l.kind.keyword(), l.c_in),
                LayerKind::Linear | LayerKind::Head => writeln!(s, "{} {} {}", l.kind.keyword(), l.c_in, l.c_out),
            }
            .unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some(h) if h == TOPOLOGY_HEADER => {}
            other => {
                return Err(Error::arg(format!(
                    "topology must start with `{TOPOLOGY_HEADER}`, found {other:?}"
                )))
            }
        }
        let input = lines.next().ok_or_else(|| Error::arg("topology lacks an input line"))?;
        let nums = parse_fields(input, "input", &[])?;
        let (input_channels, input_len) = match nums.positional[..] {
            [c, t] => (c, t),
            _ => return Err(Error::arg(format!("bad input line `{input}`"))),
        };
        let mut layers = Vec::new();
        for line in lines {
            let kw = line.split_whitespace().next().unwrap_or_default();
            let layer = match kw {
                "conv" => {
                    let f = parse_fields(line, kw, &["k", "d", "s"])?;
                    match f.positional[..] {
                        [ci, co] => LayerSpec::conv(ci, co, f.get("k")?, f.get("d")?, f.get("s")?),
                        _ => return Err(Error::arg(format!("bad conv line `{line}`"))),
                    }
                }
                "pool" => {
                    let f = parse_fields(line, kw, &["k", "s"])?;
                    match f.positional[..] {
                        [c] => LayerSpec::avgpool(c, f.get("k")?, f.get("s")?),
                        _ => return Err(Error::arg(format!("bad pool line `{line}`"))),
                    }
                }
                "bn" | "relu" => match parse_fields(line, kw, &[])?.positional[..] {
                    [c] if kw == "bn" => LayerSpec::batchnorm(c),
                    [c] => LayerSpec::relu(c),
                    _ => return Err(Error::arg(format!("bad line `{line}`"))),
                },
                "linear" | "head" => match parse_fields(line, kw, &[])?.positional[..] {
                    [i, o] if kw == "linear" => LayerSpec::linear(i, o),
                    [i, 1] => LayerSpec::head(i),
                    _ => return Err(Error::arg(format!("bad line `{line}`"))),
                },
                other => return Err(Error::arg(format!("unknown layer kind `{other}`"))),
            };
            layers.push(layer);
        }
        Self::new(input_channels, input_len, layers)
    }
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

struct Fields {
    positional: Vec<usize>,
    named: Vec<(String, usize)>,
}

impl Fields {
    fn get(&self, key: &str) -> Result<usize> {
        self.named
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::arg(format!("missing field `{key}=`")))
    }
}

fn parse_fields(line: &str, keyword: &str, keys: &[&str]) -> Result<Fields> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(keyword) {
        return Err(Error::arg(format!("expected `{keyword}` line, got `{line}`")));
    }
    let mut fields = Fields {
        positional: Vec::new(),
        named: Vec::new(),
    };
    for p in parts {
        let bad = || Error::arg(format!("bad field `{p}` in `{line}`"));
        if let Some((k, v)) = p.split_once('=') {
            if !keys.contains(&k) {
                return Err(bad());
            }
            fields.named.push((k.to_string(), v.parse().map_err(|_| bad())?));
        } else {
            fields.positional.push(p.parse().map_err(|_| bad())?);
        }
    }
    Ok(fields)
}

/// Shape knobs of the seed network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedOptions {
    pub block_channels: [usize; 3],
    pub dilations: [usize; 3],
    pub dilated_kernel: usize,
    pub strided_kernel: usize,
    pub pool_window: usize,
    pub classifier_hidden: [usize; 2],
}

impl Default for SeedOptions {
    fn default() -> Self {
        Self {
            block_channels: [32, 64, 128],
            dilations: [2, 4, 8],
            dilated_kernel: 3,
            strided_kernel: 5,
            pool_window: 2,
            classifier_hidden: [256, 128],
        }
    }
}

/// The seed: three blocks of (2 dilated convs, 1 strided conv, 1 average
/// pool), each conv followed by batch norm and ReLU, then a three-layer
/// classifier ending in a single regression neuron.
pub fn build_seed() -> NetworkSpec {
    build_seed_with(&SeedOptions::default()).expect("default seed options are valid")
}

pub fn build_seed_with(opts: &SeedOptions) -> Result<NetworkSpec> {
    let mut layers = Vec::new();
    let mut c = INPUT_CHANNELS;
    let push_conv = |layers: &mut Vec<LayerSpec>, c_in: usize, c_out: usize, k: usize, d: usize, s: usize| {
        layers.push(LayerSpec::conv(c_in, c_out, k, d, s));
        layers.push(LayerSpec::batchnorm(c_out));
        layers.push(LayerSpec::relu(c_out));
    };
    let mut len = WINDOW_LEN;
    for (&width, &d) in opts.block_channels.iter().zip(&opts.dilations) {
        push_conv(&mut layers, c, width, opts.dilated_kernel, d, 1);
        push_conv(&mut layers, width, width, opts.dilated_kernel, d, 1);
        push_conv(&mut layers, width, width, opts.strided_kernel, 1, 2);
        layers.push(LayerSpec::avgpool(width, opts.pool_window, opts.pool_window));
        len = pool_output_len(conv_output_len(len, 2), opts.pool_window, opts.pool_window);
        c = width;
    }
    let [h1, h2] = opts.classifier_hidden;
    layers.push(LayerSpec::linear(c * len, h1));
    layers.push(LayerSpec::relu(h1));
    layers.push(LayerSpec::linear(h1, h2));
    layers.push(LayerSpec::relu(h2));
    layers.push(LayerSpec::head(h2));
    NetworkSpec::new(INPUT_CHANNELS, WINDOW_LEN, layers)
}
