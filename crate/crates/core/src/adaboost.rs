//! Multiclass AdaBoost (SAMME) over decision stumps, trainable from a
//! non-uniform initial sample distribution.
//!
//! A stump sends `x[feature] <= threshold` to the left label and everything
//! else to the right label. Candidate thresholds are midpoints between
//! consecutive distinct feature values. Among candidates the lowest weighted
//! error wins; errors closer than [`TIE_TOLERANCE`] count as ties, resolved by
//! lowest feature index, then lowest threshold, then lowest class index.

use std::fmt::Write as _;

use crate::error::{HarError, Result};

/// Weighted errors (and class masses) closer than this are ties.
pub const TIE_TOLERANCE: f64 = 1e-12;
/// Floor applied to raw priors before normalization.
pub const PRIOR_FLOOR: f64 = 1e-12;
/// Rounds with error at or below this end training with a capped weight.
pub const PERFECT_ERROR: f64 = 1e-12;
pub const DEFAULT_ROUNDS: usize = 100;
pub const DEFAULT_ALPHA_CAP: f64 = 30.0;

/// Dense row-major sample-by-feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(HarError::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(HarError::InvalidArgument("non-finite feature value".into()));
            }
            data.extend_from_slice(r);
        }
        Ok(FeatureMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// Depth-one tree with a class label on each side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stump {
    pub feature_index: usize,
    pub threshold: f64,
    pub left_label: usize,
    pub right_label: usize,
}

impl Stump {
    pub fn predict(&self, x: &[f64]) -> usize {
        if x[self.feature_index] <= self.threshold {
            self.left_label
        } else {
            self.right_label
        }
    }
}

/// Normalized, strictly positive per-sample weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorWeights(Vec<f64>);

impl PriorWeights {
    pub fn uniform(n: usize) -> Self {
        PriorWeights(vec![1.0 / n as f64; n])
    }

    /// Floors every raw weight at [`PRIOR_FLOOR`] and normalizes to sum 1.
    pub fn from_raw(raw: &[f64]) -> Result<Self> {
        if raw.is_empty() {
            return Err(HarError::EmptyInput("prior weights"));
        }
        if let Some(bad) = raw.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(HarError::InvalidArgument(format!("invalid prior weight {bad}")));
        }
        let floored: Vec<f64> = raw.iter().map(|w| w.max(PRIOR_FLOOR)).collect();
        let total: f64 = floored.iter().sum();
        Ok(PriorWeights(floored.into_iter().map(|w| w / total).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostConfig {
    pub rounds: usize,
    pub alpha_cap: f64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            rounds: DEFAULT_ROUNDS,
            alpha_cap: DEFAULT_ALPHA_CAP,
        }
    }
}

/// Weighted stump vote.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostModel {
    pub rounds: Vec<(Stump, f64)>,
    pub label_set: Vec<String>,
    pub n_features: usize,
}

/// What happened in one boosting round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    /// Distribution the stump was fitted on.
    pub weights: Vec<f64>,
    pub stump: Stump,
    pub error: f64,
    pub alpha: f64,
    pub kept: bool,
}

fn argmax_with_tolerance(values: &[f64]) -> usize {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .position(|&v| v >= max - TIE_TOLERANCE)
        .unwrap_or(0)
}

/// Exhaustive stump search with per-feature sort orders computed once.
struct StumpSearch<'a> {
    features: &'a FeatureMatrix,
    labels: &'a [usize],
    n_classes: usize,
    order: Vec<Vec<usize>>,
}

impl<'a> StumpSearch<'a> {
    fn new(features: &'a FeatureMatrix, labels: &'a [usize], n_classes: usize) -> Self {
        let order = (0..features.cols())
            .map(|f| {
                let mut idx: Vec<usize> = (0..features.rows()).collect();
                idx.sort_by(|&a, &b| features.get(a, f).total_cmp(&features.get(b, f)));
                idx
            })
            .collect();
        StumpSearch {
            features,
            labels,
            n_classes,
            order,
        }
    }

    /// Calls `visit(feature, lo, hi, left, right)` for every candidate split
    /// in search order, with per-class masses on each side, until it returns
    /// `true`.
    fn scan<F>(&self, weights: &[f64], class_total: &[f64], mut visit: F)
    where
        F: FnMut(usize, f64, f64, &[f64], &[f64]) -> bool,
    {
        let c = self.n_classes;
        let mut left = vec![0.0; c];
        let mut right = vec![0.0; c];
        for (f, order) in self.order.iter().enumerate() {
            left.iter_mut().for_each(|v| *v = 0.0);
            for p in 0..order.len().saturating_sub(1) {
                let i = order[p];
                left[self.labels[i]] += weights[i];
                let (lo, hi) = (self.features.get(i, f), self.features.get(order[p + 1], f));
                if lo == hi {
                    continue;
                }
                for k in 0..c {
                    right[k] = class_total[k] - left[k];
                }
                if visit(f, lo, hi, &left, &right) {
                    return;
                }
            }
        }
    }

    /// Two passes: the lowest achievable error, then the first candidate in
    /// (feature, threshold, left, right) order within [`TIE_TOLERANCE`] of it.
    fn best(&self, weights: &[f64]) -> (Stump, f64) {
        let mut class_total = vec![0.0; self.n_classes];
        for (&y, &w) in self.labels.iter().zip(weights) {
            class_total[y] += w;
        }
        let total: f64 = class_total.iter().sum();
        let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let mut lowest = f64::INFINITY;
        self.scan(weights, &class_total, |_, _, _, left, right| {
            lowest = lowest.min(total - max(left) - max(right));
            false
        });

        let mut best = None;
        if lowest.is_finite() {
            let need = total - lowest - TIE_TOLERANCE;
            self.scan(weights, &class_total, |f, lo, hi, left, right| {
                let right_max = max(right);
                let Some(l) = left.iter().position(|&v| v + right_max >= need) else {
                    return false;
                };
                let r = right
                    .iter()
                    .position(|&v| left[l] + v >= need)
                    .expect("right_max qualifies");
                let stump = Stump {
                    feature_index: f,
                    threshold: midpoint(lo, hi),
                    left_label: l,
                    right_label: r,
                };
                best = Some((stump, total - left[l] - right[r]));
                true
            });
        }

        best.unwrap_or_else(|| {
            // every feature is constant: predict the weighted majority
            let label = argmax_with_tolerance(&class_total);
            let stump = Stump {
                feature_index: 0,
                threshold: if self.features.rows() > 0 && self.features.cols() > 0 {
                    self.features.get(0, 0)
                } else {
                    0.0
                },
                left_label: label,
                right_label: label,
            };
            (stump, total - class_total[label])
        })
    }
}

/// Split point strictly between two distinct values, or `lo` when they are
/// adjacent floats.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

fn validate(features: &FeatureMatrix, labels: &[usize], n_classes: usize, weights: &[f64]) -> Result<()> {
    if features.rows() == 0 {
        return Err(HarError::EmptyInput("training samples"));
    }
    if features.cols() == 0 {
        return Err(HarError::EmptyInput("feature dimensions"));
    }
    if labels.len() != features.rows() {
        return Err(HarError::DimensionMismatch {
            expected: features.rows(),
            found: labels.len(),
        });
    }
    if weights.len() != features.rows() {
        return Err(HarError::DimensionMismatch {
            expected: features.rows(),
            found: weights.len(),
        });
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= n_classes) {
        return Err(HarError::InvalidArgument(format!(
            "label index {y} outside {n_classes} classes"
        )));
    }
    Ok(())
}

/// The stump with the lowest weighted 0-1 error, and that error.
pub fn best_stump(
    features: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    weights: &[f64],
) -> Result<(Stump, f64)> {
    validate(features, labels, n_classes, weights)?;
    Ok(StumpSearch::new(features, labels, n_classes).best(weights))
}

fn weighted_error(stump: &Stump, features: &FeatureMatrix, labels: &[usize], weights: &[f64]) -> f64 {
    (0..features.rows())
        .filter(|&i| stump.predict(features.row(i)) != labels[i])
        .map(|i| weights[i])
        .sum()
}

/// SAMME training starting from `priors` instead of the uniform distribution.
pub fn train(
    features: &FeatureMatrix,
    labels: &[usize],
    label_set: &[String],
    priors: &PriorWeights,
    config: &BoostConfig,
) -> Result<BoostModel> {
    train_traced(features, labels, label_set, priors, config).map(|(m, _)| m)
}

/// [`train`], also returning the per-round distributions and decisions.
pub fn train_traced(
    features: &FeatureMatrix,
    labels: &[usize],
    label_set: &[String],
    priors: &PriorWeights,
    config: &BoostConfig,
) -> Result<(BoostModel, Vec<RoundTrace>)> {
    let n_classes = label_set.len();
    validate(features, labels, n_classes, priors.as_slice())?;
    if config.rounds == 0 {
        return Err(HarError::InvalidArgument("rounds must be positive".into()));
    }
    let mut present = vec![false; n_classes];
    labels.iter().for_each(|&y| present[y] = true);
    if present.iter().filter(|p| **p).count() < 2 {
        return Err(HarError::InvalidArgument(
            "training data must contain at least two classes".into(),
        ));
    }

    let search = StumpSearch::new(features, labels, n_classes);
    let class_term = ((n_classes - 1) as f64).ln();
    let give_up = 1.0 - 1.0 / n_classes as f64;
    let mut weights = priors.as_slice().to_vec();
    let mut rounds = Vec::new();
    let mut trace = Vec::new();

    for _ in 0..config.rounds {
        let (stump, _) = search.best(&weights);
        let error = weighted_error(&stump, features, labels, &weights);

        if error >= give_up {
            // a degenerate first round is kept with unit weight so the model
            // still predicts the best stump
            let alpha = if rounds.is_empty() { 1.0 } else { 0.0 };
            let kept = rounds.is_empty();
            if kept {
                rounds.push((stump, alpha));
            }
            trace.push(RoundTrace { weights, stump, error, alpha, kept });
            break;
        }
        if error <= PERFECT_ERROR {
            rounds.push((stump, config.alpha_cap));
            trace.push(RoundTrace {
                weights,
                stump,
                error,
                alpha: config.alpha_cap,
                kept: true,
            });
            break;
        }

        let alpha = (((1.0 - error) / error).ln() + class_term).min(config.alpha_cap);
        rounds.push((stump, alpha));
        let boost = alpha.exp();
        let mut next = weights.clone();
        for (i, w) in next.iter_mut().enumerate() {
            if stump.predict(features.row(i)) != labels[i] {
                *w *= boost;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|w| *w /= total);
        trace.push(RoundTrace {
            weights: std::mem::replace(&mut weights, next),
            stump,
            error,
            alpha,
            kept: true,
        });
    }

    Ok((
        BoostModel {
            rounds,
            label_set: label_set.to_vec(),
            n_features: features.cols(),
        },
        trace,
    ))
}

impl BoostModel {
    /// Per-class vote totals.
    pub fn votes(&self, x: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.label_set.len()];
        for (stump, alpha) in &self.rounds {
            votes[stump.predict(x)] += alpha;
        }
        votes
    }

    /// Class index with the largest vote; ties go to the earlier label.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.n_features {
            return Err(HarError::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        let votes = self.votes(x);
        let mut best = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = c;
            }
        }
        Ok(best)
    }

    /// Text dump, one line per round:
    /// `t,alpha,feature_index,threshold,left_label,right_label`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (t, (s, alpha)) in self.rounds.iter().enumerate() {
            let _ = writeln!(
                out,
                "{t},{alpha},{},{},{},{}",
                s.feature_index, s.threshold, self.label_set[s.left_label], self.label_set[s.right_label]
            );
        }
        out
    }

    pub fn from_text(text: &str, label_set: &[String], n_features: usize) -> Result<Self> {
        let label = |name: &str, line: usize| {
            label_set
                .iter()
                .position(|l| l == name)
                .ok_or_else(|| HarError::InvalidArgument(format!("line {line}: unknown label `{name}`")))
        };
        let mut rounds = Vec::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 6 {
                return Err(HarError::InvalidArgument(format!("line {}: expected 6 fields", n + 1)));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| HarError::InvalidArgument(format!("line {}: bad number `{s}`", n + 1)))
            };
            let alpha = num(parts[1])?;
            let feature_index: usize = parts[2]
                .parse()
                .map_err(|_| HarError::InvalidArgument(format!("line {}: bad feature index", n + 1)))?;
            if feature_index >= n_features {
                return Err(HarError::InvalidArgument(format!("line {}: feature index out of range", n + 1)));
            }
            if !alpha.is_finite() {
                return Err(HarError::InvalidArgument(format!("line {}: non-finite alpha", n + 1)));
            }
            rounds.push((
                Stump {
                    feature_index,
                    threshold: num(parts[3])?,
                    left_label: label(parts[4], n + 1)?,
                    right_label: label(parts[5], n + 1)?,
                },
                alpha,
            ));
        }
        if rounds.is_empty() {
            return Err(HarError::EmptyInput("model has no rounds"));
        }
        Ok(BoostModel {
            rounds,
            label_set: label_set.to_vec(),
            n_features,
        })
    }
}
