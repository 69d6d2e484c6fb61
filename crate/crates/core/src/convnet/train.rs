use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{batch_gradient_layout, forward_layout};
use super::{init, NetConfig, NetParams};
use crate::datasets::LabeledWindow;
use crate::error::{HarError, Result};

/// Per-channel input standardization fitted on the training windows.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelNorm {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ChannelNorm {
    pub fn identity(channels: usize) -> Self {
        ChannelNorm {
            mean: vec![0.0; channels],
            std: vec![1.0; channels],
        }
    }

    pub fn fit(windows: &[&LabeledWindow]) -> Self {
        let mut sum = [0.0; 3];
        let mut count = 0usize;
        for w in windows {
            for s in &w.samples {
                for a in 0..3 {
                    sum[a] += s[a];
                }
            }
            count += w.len();
        }
        if count == 0 {
            return ChannelNorm::identity(3);
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut sq = [0.0; 3];
        for w in windows {
            for s in &w.samples {
                for a in 0..3 {
                    sq[a] += (s[a] - mean[a]).powi(2);
                }
            }
        }
        let std = sq
            .iter()
            .map(|v| (v / count as f64).sqrt().max(1e-8))
            .collect();
        ChannelNorm { mean, std }
    }
}

/// Channel-major network input for one window.
pub fn window_input(window: &LabeledWindow, norm: &ChannelNorm) -> Vec<f64> {
    let mut out = Vec::with_capacity(3 * window.len());
    for a in 0..3 {
        out.extend(window.samples.iter().map(|s| (s[a] - norm.mean[a]) / norm.std[a]));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean loss over the epoch's mini-batches, measured before each update.
    pub loss: f64,
    pub train_accuracy: f64,
}

/// Parameters plus the input normalization they were trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedNet {
    pub config: NetConfig,
    pub params: NetParams,
    pub norm: ChannelNorm,
    pub log: Vec<EpochLog>,
}

impl TrainedNet {
    /// `epoch,loss,train_accuracy` CSV.
    pub fn write_log<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epoch,loss,train_accuracy")?;
        for e in &self.log {
            writeln!(out, "{},{},{}", e.epoch, e.loss, e.train_accuracy)?;
        }
        Ok(())
    }
}

/// Mini-batch gradient descent on softmax cross-entropy over prepared inputs.
///
/// Initialization uses `config.seed`; the per-epoch shuffle draws from a
/// separate stream of the same seed.
pub fn train_on_inputs(config: &NetConfig, inputs: &[Vec<f64>], labels: &[usize]) -> Result<(NetParams, Vec<EpochLog>)> {
    let layout = config.layout()?;
    if inputs.is_empty() {
        return Err(HarError::EmptyInput("training windows"));
    }
    if inputs.len() != labels.len() {
        return Err(HarError::DimensionMismatch {
            expected: inputs.len(),
            found: labels.len(),
        });
    }
    if let Some(bad) = inputs.iter().find(|x| x.len() != layout.input) {
        return Err(HarError::DimensionMismatch {
            expected: layout.input,
            found: bad.len(),
        });
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= layout.classes) {
        return Err(HarError::InvalidArgument(format!("label {y} outside {} classes", layout.classes)));
    }

    let mut params = init(config, config.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        let mut correct = 0;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(&[f64], usize)> = chunk.iter().map(|&i| (inputs[i].as_slice(), labels[i])).collect();
            let (grad, loss, hits) = batch_gradient_layout(&layout, &params, &batch)?;
            if !loss.is_finite() {
                return Err(HarError::NonFiniteLoss(format!(
                    "epoch {epoch}, batch {batches}: loss {loss}"
                )));
            }
            params.add_scaled(&grad, -config.learning_rate);
            loss_sum += loss;
            batches += 1;
            correct += hits;
        }
        let entry = EpochLog {
            epoch,
            loss: loss_sum / batches as f64,
            train_accuracy: correct as f64 / inputs.len() as f64,
        };
        log::debug!("epoch {} loss {:.6} acc {:.4}", entry.epoch, entry.loss, entry.train_accuracy);
        log.push(entry);
    }
    Ok((params, log))
}

/// Trains on windows labeled with class indices.
pub fn train(config: &NetConfig, windows: &[&LabeledWindow], labels: &[usize]) -> Result<TrainedNet> {
    if let Some(w) = windows.iter().find(|w| w.len() != config.input_length) {
        return Err(HarError::DimensionMismatch {
            expected: config.input_length,
            found: w.len(),
        });
    }
    if config.channels_in != 3 {
        return Err(HarError::InvalidArgument("window input needs three channels".into()));
    }
    let norm = ChannelNorm::fit(windows);
    let inputs: Vec<Vec<f64>> = windows.iter().map(|w| window_input(w, &norm)).collect();
    let (params, log) = train_on_inputs(config, &inputs, labels)?;
    Ok(TrainedNet {
        config: config.clone(),
        params,
        norm,
        log,
    })
}

/// Class probabilities for one prepared input, with the arg-max class.
pub fn predict_input(config: &NetConfig, params: &NetParams, input: &[f64]) -> Result<(usize, Vec<f64>)> {
    let layout = config.layout()?;
    params.check(&layout)?;
    let fwd = forward_layout(&layout, params, input)?;
    Ok((fwd.class(), fwd.probs))
}

/// Predicted class index and probabilities for a window.
pub fn predict(net: &TrainedNet, window: &LabeledWindow) -> Result<(usize, Vec<f64>)> {
    if window.len() != net.config.input_length {
        return Err(HarError::DimensionMismatch {
            expected: net.config.input_length,
            found: window.len(),
        });
    }
    predict_input(&net.config, &net.params, &window_input(window, &net.norm))
}
