use rayon::prelude::*;

use super::{ConvShape, Layout, NetConfig, NetParams};
use crate::error::{HarError, Result};

struct ConvCache {
    input: Vec<f64>,
    pre: Vec<f64>,
    /// For each pooled output, the index into `pre` that won the max.
    argmax: Vec<usize>,
}

/// Forward pass of one input with everything needed for backpropagation.
pub struct Forward {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
    convs: Vec<ConvCache>,
    flat: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
}

impl Forward {
    /// Arg-max class; ties go to the lower class index.
    pub fn class(&self) -> usize {
        let mut best = 0;
        for (c, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = c;
            }
        }
        best
    }

    /// `-ln p(label)`, computed from the logits for stability.
    pub fn loss(&self, label: usize) -> f64 {
        log_sum_exp(&self.logits) - self.logits[label]
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn conv_forward(shape: &ConvShape, weight: &[f64], bias: &[f64], input: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
    let ConvShape {
        in_channels,
        in_len,
        filters,
        kernel,
        conv_len,
        pool,
        pooled_len,
    } = *shape;
    let mut pre = vec![0.0; filters * conv_len];
    for f in 0..filters {
        let out = &mut pre[f * conv_len..(f + 1) * conv_len];
        out.iter_mut().for_each(|v| *v = bias[f]);
        for c in 0..in_channels {
            let x = &input[c * in_len..(c + 1) * in_len];
            let w = &weight[(f * in_channels + c) * kernel..(f * in_channels + c + 1) * kernel];
            for (t, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for k in 0..kernel {
                    acc += w[k] * x[t + k];
                }
                *o += acc;
            }
        }
    }
    let mut pooled = vec![0.0; filters * pooled_len];
    let mut argmax = vec![0; filters * pooled_len];
    for f in 0..filters {
        for u in 0..pooled_len {
            let start = f * conv_len + u * pool;
            let mut best = start;
            for t in start + 1..start + pool {
                if pre[t] > pre[best] {
                    best = t;
                }
            }
            // max-pool commutes with ReLU
            pooled[f * pooled_len + u] = pre[best].max(0.0);
            argmax[f * pooled_len + u] = best;
        }
    }
    (pre, pooled, argmax)
}

fn dense_forward(weight: &[f64], bias: &[f64], x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    bias.iter()
        .enumerate()
        .map(|(o, b)| {
            let row = &weight[o * n_in..(o + 1) * n_in];
            b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        })
        .collect()
}

pub(crate) fn forward_layout(layout: &Layout, params: &NetParams, input: &[f64]) -> Result<Forward> {
    if input.len() != layout.input {
        return Err(HarError::DimensionMismatch {
            expected: layout.input,
            found: input.len(),
        });
    }
    let t = &params.tensors;
    let mut convs = Vec::with_capacity(layout.convs.len());
    let mut x = input.to_vec();
    for (i, shape) in layout.convs.iter().enumerate() {
        let (pre, pooled, argmax) = conv_forward(shape, &t[2 * i].data, &t[2 * i + 1].data, &x);
        convs.push(ConvCache {
            input: std::mem::replace(&mut x, pooled),
            pre,
            argmax,
        });
    }
    let n = 2 * layout.convs.len();
    let hidden_pre = dense_forward(&t[n].data, &t[n + 1].data, &x);
    let hidden: Vec<f64> = hidden_pre.iter().map(|v| v.max(0.0)).collect();
    let logits = dense_forward(&t[n + 2].data, &t[n + 3].data, &hidden);
    let probs = softmax(&logits);
    Ok(Forward {
        logits,
        probs,
        convs,
        flat: x,
        hidden_pre,
        hidden,
    })
}

/// Runs the network on one channel-major input of `channels_in * input_length`
/// values.
pub fn forward(config: &NetConfig, params: &NetParams, input: &[f64]) -> Result<Forward> {
    let layout = config.layout()?;
    params.check(&layout)?;
    forward_layout(&layout, params, input)
}

fn backward(layout: &Layout, params: &NetParams, fwd: &Forward, label: usize) -> NetParams {
    let t = &params.tensors;
    let n = 2 * layout.convs.len();
    let mut grads = NetParams::zeros(layout);

    // output layer
    let mut dz = fwd.probs.clone();
    dz[label] -= 1.0;
    let h = layout.hidden;
    {
        let gw = &mut grads.tensors[n + 2].data;
        for (o, d) in dz.iter().enumerate() {
            for (j, hv) in fwd.hidden.iter().enumerate() {
                gw[o * h + j] = d * hv;
            }
        }
    }
    grads.tensors[n + 3].data.copy_from_slice(&dz);

    // hidden layer
    let w_out = &t[n + 2].data;
    let dh_pre: Vec<f64> = (0..h)
        .map(|j| {
            if fwd.hidden_pre[j] > 0.0 {
                dz.iter().enumerate().map(|(o, d)| d * w_out[o * h + j]).sum()
            } else {
                0.0
            }
        })
        .collect();
    let flat_len = layout.flat;
    {
        let gw = &mut grads.tensors[n].data;
        for (j, d) in dh_pre.iter().enumerate() {
            for (k, xv) in fwd.flat.iter().enumerate() {
                gw[j * flat_len + k] = d * xv;
            }
        }
    }
    grads.tensors[n + 1].data.copy_from_slice(&dh_pre);

    if layout.convs.is_empty() {
        return grads;
    }
    let w_hidden = &t[n].data;
    let mut d_out: Vec<f64> = (0..flat_len)
        .map(|k| dh_pre.iter().enumerate().map(|(j, d)| d * w_hidden[j * flat_len + k]).sum())
        .collect();

    for i in (0..layout.convs.len()).rev() {
        let shape = &layout.convs[i];
        let cache = &fwd.convs[i];
        // un-pool and apply the ReLU mask
        let mut d_pre = vec![0.0; shape.filters * shape.conv_len];
        for (p, &src) in cache.argmax.iter().enumerate() {
            if cache.pre[src] > 0.0 {
                d_pre[src] += d_out[p];
            }
        }
        let weight = &t[2 * i].data;
        let (k_len, c_in, l_in, l_conv) = (shape.kernel, shape.in_channels, shape.in_len, shape.conv_len);
        let mut d_in = if i > 0 { vec![0.0; c_in * l_in] } else { Vec::new() };
        {
            let (gw_part, gb_part) = grads.tensors.split_at_mut(2 * i + 1);
            let gw = &mut gw_part[2 * i].data;
            let gb = &mut gb_part[0].data;
            for f in 0..shape.filters {
                let dp = &d_pre[f * l_conv..(f + 1) * l_conv];
                gb[f] = dp.iter().sum();
                for c in 0..c_in {
                    let x = &cache.input[c * l_in..(c + 1) * l_in];
                    let base = (f * c_in + c) * k_len;
                    for k in 0..k_len {
                        gw[base + k] = dp.iter().enumerate().map(|(tt, d)| d * x[tt + k]).sum();
                    }
                    if i > 0 {
                        let dx = &mut d_in[c * l_in..(c + 1) * l_in];
                        for (tt, d) in dp.iter().enumerate() {
                            if *d == 0.0 {
                                continue;
                            }
                            for k in 0..k_len {
                                dx[tt + k] += d * weight[base + k];
                            }
                        }
                    }
                }
            }
        }
        d_out = d_in;
    }
    grads
}

/// Gradient of `-ln p(label)` for one input, with the loss and predicted class.
pub fn sample_gradient(
    config: &NetConfig,
    params: &NetParams,
    input: &[f64],
    label: usize,
) -> Result<(NetParams, f64, usize)> {
    let layout = config.layout()?;
    params.check(&layout)?;
    sample_gradient_layout(&layout, params, input, label)
}

pub(crate) fn sample_gradient_layout(
    layout: &Layout,
    params: &NetParams,
    input: &[f64],
    label: usize,
) -> Result<(NetParams, f64, usize)> {
    if label >= layout.classes {
        return Err(HarError::InvalidArgument(format!(
            "label {label} outside {} classes",
            layout.classes
        )));
    }
    let fwd = forward_layout(layout, params, input)?;
    let loss = fwd.loss(label);
    Ok((backward(layout, params, &fwd, label), loss, fwd.class()))
}

/// Mean cross-entropy gradient over a batch, plus the mean loss and the
/// number of correctly classified samples.
///
/// Per-sample gradients may be computed in parallel, but they are always
/// summed in batch order, so the result is bit-reproducible.
pub fn batch_gradient(
    config: &NetConfig,
    params: &NetParams,
    batch: &[(&[f64], usize)],
) -> Result<(NetParams, f64, usize)> {
    let layout = config.layout()?;
    params.check(&layout)?;
    batch_gradient_layout(&layout, params, batch)
}

pub(crate) fn batch_gradient_layout(
    layout: &Layout,
    params: &NetParams,
    batch: &[(&[f64], usize)],
) -> Result<(NetParams, f64, usize)> {
    if batch.is_empty() {
        return Err(HarError::EmptyInput("batch"));
    }
    let per_sample: Vec<(NetParams, f64, usize)> = batch
        .par_iter()
        .map(|(x, y)| sample_gradient_layout(layout, params, x, *y))
        .collect::<Result<_>>()?;
    let mut total = NetParams::zeros(layout);
    let mut loss = 0.0;
    let mut correct = 0;
    for ((g, l, pred), (_, y)) in per_sample.iter().zip(batch) {
        total.add_scaled(g, 1.0);
        loss += l;
        correct += usize::from(pred == y);
    }
    let scale = 1.0 / batch.len() as f64;
    total.iter_mut().for_each(|v| *v *= scale);
    Ok((total, loss * scale, correct))
}

/// Mean cross-entropy over a batch.
pub fn batch_loss(config: &NetConfig, params: &NetParams, batch: &[(&[f64], usize)]) -> Result<f64> {
    let layout = config.layout()?;
    params.check(&layout)?;
    batch_loss_layout(&layout, params, batch)
}

pub(crate) fn batch_loss_layout(layout: &Layout, params: &NetParams, batch: &[(&[f64], usize)]) -> Result<f64> {
    if batch.is_empty() {
        return Err(HarError::EmptyInput("batch"));
    }
    let mut total = 0.0;
    for (x, y) in batch {
        if *y >= layout.classes {
            return Err(HarError::InvalidArgument(format!("label {y} outside {} classes", layout.classes)));
        }
        total += forward_layout(layout, params, x)?.loss(*y);
    }
    Ok(total / batch.len() as f64)
}
