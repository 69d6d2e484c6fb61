//! A small 1-D convolutional network over tri-axial windows.
//!
//! Architecture: a stack of `conv (valid) -> ReLU -> max-pool` blocks, a ReLU
//! hidden dense layer and a softmax output. Parameters live in named flat
//! tensors so that gradients, finite-difference checks and checkpoints share
//! one representation.

mod gradcheck;
mod layers;
mod train;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use gradcheck::{gradient_check, gradient_check_with, numeric_gradient};
pub use layers::{batch_gradient, batch_loss, forward, sample_gradient, Forward};
pub use train::{
    predict, predict_input, train, train_on_inputs, window_input, ChannelNorm, EpochLog, TrainedNet,
};

use crate::error::{HarError, Result};

/// One `conv -> ReLU -> max-pool` stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvBlock {
    pub filters: usize,
    pub kernel_size: usize,
    pub pool_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub input_length: usize,
    pub channels_in: usize,
    pub conv_blocks: Vec<ConvBlock>,
    pub dense_hidden: usize,
    pub classes: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl NetConfig {
    /// conv(16, 5) -> pool 2 -> conv(32, 5) -> pool 2 -> dense 64 -> classes;
    /// lr 0.01, batch 32, 50 epochs.
    pub fn reference(input_length: usize, classes: usize) -> Self {
        NetConfig {
            input_length,
            channels_in: 3,
            conv_blocks: vec![
                ConvBlock {
                    filters: 16,
                    kernel_size: 5,
                    pool_size: 2,
                },
                ConvBlock {
                    filters: 32,
                    kernel_size: 5,
                    pool_size: 2,
                },
            ],
            dense_hidden: 64,
            classes,
            learning_rate: 0.01,
            epochs: 50,
            batch_size: 32,
            seed: 0,
        }
    }

    /// A few hundred parameters; used for gradient checks.
    pub fn tiny(classes: usize) -> Self {
        NetConfig {
            input_length: 16,
            channels_in: 3,
            conv_blocks: vec![
                ConvBlock {
                    filters: 3,
                    kernel_size: 3,
                    pool_size: 2,
                },
                ConvBlock {
                    filters: 4,
                    kernel_size: 3,
                    pool_size: 2,
                },
            ],
            dense_hidden: 6,
            classes,
            learning_rate: 0.05,
            epochs: 10,
            batch_size: 4,
            seed: 0,
        }
    }

    pub fn layout(&self) -> Result<Layout> {
        let positive = [
            ("input_length", self.input_length),
            ("channels_in", self.channels_in),
            ("dense_hidden", self.dense_hidden),
            ("classes", self.classes),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(HarError::InvalidArgument(format!("{name} must be positive")));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(HarError::InvalidArgument("learning rate must be finite and non-negative".into()));
        }
        let mut convs = Vec::with_capacity(self.conv_blocks.len());
        let (mut channels, mut length) = (self.channels_in, self.input_length);
        for (i, b) in self.conv_blocks.iter().enumerate() {
            if b.filters == 0 || b.kernel_size == 0 || b.pool_size == 0 {
                return Err(HarError::InvalidArgument(format!("conv block {i} has a zero size")));
            }
            if b.kernel_size > length {
                return Err(HarError::InvalidArgument(format!(
                    "conv block {i}: kernel {} exceeds length {length}",
                    b.kernel_size
                )));
            }
            let conv_len = length - b.kernel_size + 1;
            let pooled_len = conv_len / b.pool_size;
            if pooled_len == 0 {
                return Err(HarError::InvalidArgument(format!(
                    "conv block {i}: pool {} exceeds length {conv_len}",
                    b.pool_size
                )));
            }
            convs.push(ConvShape {
                in_channels: channels,
                in_len: length,
                filters: b.filters,
                kernel: b.kernel_size,
                conv_len,
                pool: b.pool_size,
                pooled_len,
            });
            channels = b.filters;
            length = pooled_len;
        }
        Ok(Layout {
            convs,
            flat: channels * length,
            hidden: self.dense_hidden,
            classes: self.classes,
            input: self.channels_in * self.input_length,
        })
    }
}

/// Shapes of one convolution stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub in_channels: usize,
    pub in_len: usize,
    pub filters: usize,
    pub kernel: usize,
    pub conv_len: usize,
    pub pool: usize,
    pub pooled_len: usize,
}

/// Resolved layer sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub convs: Vec<ConvShape>,
    /// Length of the flattened last feature map.
    pub flat: usize,
    pub hidden: usize,
    pub classes: usize,
    /// Input size: channels times samples, channel-major.
    pub input: usize,
}

impl Layout {
    /// `(name, shape, fan_in)` of every tensor, in storage order.
    fn tensor_specs(&self) -> Vec<(String, Vec<usize>, usize)> {
        let mut specs = Vec::new();
        for (i, c) in self.convs.iter().enumerate() {
            specs.push((
                format!("conv{i}.weight"),
                vec![c.filters, c.in_channels, c.kernel],
                c.in_channels * c.kernel,
            ));
            specs.push((format!("conv{i}.bias"), vec![c.filters], 0));
        }
        specs.push(("hidden.weight".into(), vec![self.hidden, self.flat], self.flat));
        specs.push(("hidden.bias".into(), vec![self.hidden], 0));
        specs.push(("output.weight".into(), vec![self.classes, self.hidden], self.hidden));
        specs.push(("output.bias".into(), vec![self.classes], 0));
        specs
    }
}

/// A named flat tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// All weights and biases, or a gradient with the same structure.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub tensors: Vec<Tensor>,
}

impl NetParams {
    /// All-zero tensors shaped for `layout`.
    pub fn zeros(layout: &Layout) -> Self {
        NetParams {
            tensors: layout
                .tensor_specs()
                .into_iter()
                .map(|(name, shape, _)| {
                    let n = shape.iter().product();
                    Tensor {
                        name,
                        shape,
                        data: vec![0.0; n],
                    }
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.tensors.iter().flat_map(|t| t.data.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.tensors.iter_mut().flat_map(|t| t.data.iter_mut())
    }

    /// Flat view position `k` as `(tensor, offset)`.
    pub fn locate(&self, mut k: usize) -> Option<(usize, usize)> {
        for (t, tensor) in self.tensors.iter().enumerate() {
            if k < tensor.data.len() {
                return Some((t, k));
            }
            k -= tensor.data.len();
        }
        None
    }

    pub fn get_flat(&self, k: usize) -> f64 {
        let (t, o) = self.locate(k).expect("parameter index out of range");
        self.tensors[t].data[o]
    }

    pub fn set_flat(&mut self, k: usize, v: f64) {
        let (t, o) = self.locate(k).expect("parameter index out of range");
        self.tensors[t].data[o] = v;
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    fn matches(&self, layout: &Layout) -> bool {
        let specs = layout.tensor_specs();
        specs.len() == self.tensors.len()
            && specs
                .iter()
                .zip(&self.tensors)
                .all(|((name, shape, _), t)| *name == t.name && *shape == t.shape && t.data.len() == shape.iter().product())
    }

    pub(crate) fn check(&self, layout: &Layout) -> Result<()> {
        if !self.matches(layout) {
            return Err(HarError::InvalidArgument(
                "parameter shapes do not match the network configuration".into(),
            ));
        }
        Ok(())
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &NetParams, scale: f64) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += scale * y;
            }
        }
    }

    /// Text checkpoint: a shape manifest line per tensor followed by a line
    /// of its values.
    pub fn to_text(&self) -> String {
        let mut out = format!("tensors {}\n", self.tensors.len());
        for t in &self.tensors {
            let dims: Vec<String> = t.shape.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "{} {}", t.name, dims.join(" "));
            let vals: Vec<String> = t.data.iter().map(f64::to_string).collect();
            let _ = writeln!(out, "{}", vals.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| HarError::InvalidArgument(format!("checkpoint: {msg}"));
        let mut lines = text.lines();
        let count: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("tensors "))
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| bad("missing tensor count"))?;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let header = lines.next().ok_or_else(|| bad("truncated manifest"))?;
            let mut parts = header.split_whitespace();
            let name = parts.next().ok_or_else(|| bad("empty manifest line"))?.to_string();
            let shape = parts
                .map(|d| d.parse::<usize>().map_err(|_| bad("bad dimension")))
                .collect::<Result<Vec<_>>>()?;
            let data = lines
                .next()
                .ok_or_else(|| bad("missing values"))?
                .split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|_| bad("bad value")))
                .collect::<Result<Vec<_>>>()?;
            if data.len() != shape.iter().product::<usize>() {
                return Err(bad(&format!("tensor {name} has the wrong number of values")));
            }
            tensors.push(Tensor { name, shape, data });
        }
        Ok(NetParams { tensors })
    }
}

/// He-style uniform initialization: weights in `±sqrt(6 / fan_in)`, biases 0.
pub fn init(config: &NetConfig, seed: u64) -> Result<NetParams> {
    let layout = config.layout()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = NetParams::zeros(&layout);
    for (tensor, (_, _, fan_in)) in params.tensors.iter_mut().zip(layout.tensor_specs()) {
        if fan_in == 0 {
            continue;
        }
        let bound = (6.0 / fan_in as f64).sqrt();
        for w in &mut tensor.data {
            *w = rng.random_range(-bound..bound);
        }
    }
    Ok(params)
}
