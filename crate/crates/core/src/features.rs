//! Hand-crafted window statistics, subject signatures and z-scoring.
//!
//! Layout of the 32 window features:
//!
//! | index   | content                                                        |
//! |---------|----------------------------------------------------------------|
//! | 0..24   | per axis x, y, z: mean, std, min, max, median, IQR, zero crossings, energy |
//! | 24..27  | Pearson correlation xy, xz, yz                                  |
//! | 27..29  | magnitude mean, magnitude std                                   |
//! | 29..32  | per-axis mean absolute deviation                                |
//!
//! Standard deviations are population (divide by n). Quantiles interpolate
//! linearly between order statistics. Zero crossings count sign changes of
//! the mean-removed axis, skipping exact zeros.

use crate::datasets::LabeledWindow;
use crate::error::{HarError, Result};

pub const WINDOW_FEATURES: usize = 32;
pub const SIGNATURE_FEATURES: usize = 2 * WINDOW_FEATURES;
pub const PER_AXIS_FEATURES: usize = 8;

/// Clamp for standardizer scales.
pub const SCALE_EPSILON: f64 = 1e-8;

/// Which feature specification produced a vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureSpec {
    Window,
    Signature,
    Physical,
    Standardized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub spec: FeatureSpec,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, spec: FeatureSpec) -> Self {
        FeatureVector { values, spec }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn std_about(xs: &[f64], m: f64) -> f64 {
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Quantile of sorted data with linear interpolation between order statistics.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn zero_crossings(xs: &[f64], m: f64) -> usize {
    let mut count = 0;
    let mut last = 0.0f64;
    for &x in xs {
        let d = x - m;
        if d == 0.0 {
            continue;
        }
        if last != 0.0 && (d > 0.0) != (last > 0.0) {
            count += 1;
        }
        last = d;
    }
    count
}

struct AxisStats {
    mean: f64,
    std: f64,
    constant: bool,
}

fn axis_features(xs: &[f64], out: &mut Vec<f64>) -> AxisStats {
    let m = mean(xs);
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let constant = min == max;
    let sd = if constant { 0.0 } else { std_about(xs, m) };
    out.extend([
        m,
        sd,
        min,
        max,
        quantile_sorted(&sorted, 0.5),
        quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25),
        zero_crossings(xs, m) as f64,
        xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64,
    ]);
    AxisStats {
        mean: m,
        std: sd,
        constant,
    }
}

fn correlation(a: &[f64], sa: &AxisStats, b: &[f64], sb: &AxisStats) -> f64 {
    if sa.constant || sb.constant || sa.std == 0.0 || sb.std == 0.0 {
        return 0.0;
    }
    let cov = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - sa.mean) * (y - sb.mean))
        .sum::<f64>()
        / a.len() as f64;
    (cov / (sa.std * sb.std)).clamp(-1.0, 1.0)
}

/// The 32 window statistics described in the module docs.
pub fn extract_features(window: &LabeledWindow) -> Result<FeatureVector> {
    if window.is_empty() {
        return Err(HarError::EmptyInput("window"));
    }
    let axes: Vec<Vec<f64>> = (0..3).map(|a| window.axis(a)).collect();
    let mut values = Vec::with_capacity(WINDOW_FEATURES);
    let stats: Vec<AxisStats> = axes.iter().map(|xs| axis_features(xs, &mut values)).collect();

    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        values.push(correlation(&axes[i], &stats[i], &axes[j], &stats[j]));
    }

    let magnitude: Vec<f64> = window
        .samples
        .iter()
        .map(|s| (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt())
        .collect();
    let mm = mean(&magnitude);
    let mag_constant = magnitude.iter().all(|&v| v == magnitude[0]);
    values.push(mm);
    values.push(if mag_constant { 0.0 } else { std_about(&magnitude, mm) });

    for (xs, s) in axes.iter().zip(&stats) {
        values.push(xs.iter().map(|x| (x - s.mean).abs()).sum::<f64>() / xs.len() as f64);
    }

    debug_assert_eq!(values.len(), WINDOW_FEATURES);
    Ok(FeatureVector::new(values, FeatureSpec::Window))
}

/// Per-dimension mean and population standard deviation of a set of
/// vectors. Each dimension is reduced in sorted order, so the result does
/// not depend on the order of `vectors`.
fn order_free_moments(vectors: &[&[f64]]) -> (Vec<f64>, Vec<f64>) {
    let dim = vectors[0].len();
    let n = vectors.len() as f64;
    let mut means = Vec::with_capacity(dim);
    let mut stds = Vec::with_capacity(dim);
    let mut column = Vec::with_capacity(vectors.len());
    for d in 0..dim {
        column.clear();
        column.extend(vectors.iter().map(|v| v[d]));
        column.sort_by(f64::total_cmp);
        let m = column.iter().sum::<f64>() / n;
        let var = column.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
        means.push(m);
        stds.push(var.sqrt());
    }
    (means, stds)
}

/// Sensor-based subject descriptor: per-feature mean then per-feature std of
/// the subject's window features (64 values). Labels are not read.
pub fn subject_signature<'a, I>(windows: I) -> Result<FeatureVector>
where
    I: IntoIterator<Item = &'a LabeledWindow>,
{
    let feats = windows
        .into_iter()
        .map(extract_features)
        .collect::<Result<Vec<_>>>()?;
    signature_from_features(&feats)
}

/// Same as [`subject_signature`] over precomputed window features.
pub fn signature_from_features(features: &[FeatureVector]) -> Result<FeatureVector> {
    if features.is_empty() {
        return Err(HarError::EmptyInput("subject has no windows"));
    }
    let dim = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != dim) {
        return Err(HarError::DimensionMismatch {
            expected: dim,
            found: bad.len(),
        });
    }
    let rows: Vec<&[f64]> = features.iter().map(|f| f.values.as_slice()).collect();
    let (mut values, stds) = order_free_moments(&rows);
    values.extend(stds);
    Ok(FeatureVector::new(values, FeatureSpec::Signature))
}

/// Per-dimension z-scoring fitted on a population.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// `max(std, SCALE_EPSILON)` per dimension.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(vectors: &[FeatureVector]) -> Result<Self> {
        if vectors.len() < 2 {
            return Err(HarError::InvalidArgument(format!(
                "standardizer needs at least two vectors, got {}",
                vectors.len()
            )));
        }
        let dim = vectors[0].len();
        if let Some(bad) = vectors.iter().find(|v| v.len() != dim) {
            return Err(HarError::DimensionMismatch {
                expected: dim,
                found: bad.len(),
            });
        }
        let rows: Vec<&[f64]> = vectors.iter().map(|v| v.values.as_slice()).collect();
        let (mean, stds) = order_free_moments(&rows);
        let scale = stds.into_iter().map(|s| s.max(SCALE_EPSILON)).collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, v: &FeatureVector) -> Result<FeatureVector> {
        if v.len() != self.dim() {
            return Err(HarError::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        let values = v
            .values
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, s))| (x - m) / s)
            .collect();
        Ok(FeatureVector::new(values, FeatureSpec::Standardized))
    }

    /// `v * scale + mean`.
    pub fn invert(&self, v: &FeatureVector) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(HarError::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(v.values
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(z, (m, s))| z * s + m)
            .collect())
    }
}

pub fn fit_standardizer(vectors: &[FeatureVector]) -> Result<Standardizer> {
    Standardizer::fit(vectors)
}

pub fn apply_standardizer(s: &Standardizer, v: &FeatureVector) -> Result<FeatureVector> {
    s.apply(v)
}
