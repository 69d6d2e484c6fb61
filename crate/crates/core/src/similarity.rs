//! Subject similarity: `sim(i, j) = exp(-gamma * d(i, j))` with `d` the
//! Euclidean distance between standardized subject descriptors.
//!
//! Three descriptor kinds are supported. `Physical` uses `(sex, age, weight,
//! height)`, `Sensor` uses the 64-value signal signature, and
//! `PhysicalSensor` multiplies the two kernels entrywise, which equals
//! `exp(-gamma_p d_p - gamma_s d_s)`.

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::datasets::SubjectMeta;
use crate::error::{HarError, Result};
use crate::features::{FeatureSpec, FeatureVector, Standardizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SimilarityKind {
    Physical,
    Sensor,
    PhysicalSensor,
}

impl SimilarityKind {
    pub const ALL: [SimilarityKind; 3] = [
        SimilarityKind::Physical,
        SimilarityKind::Sensor,
        SimilarityKind::PhysicalSensor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SimilarityKind::Physical => "physical",
            SimilarityKind::Sensor => "sensor",
            SimilarityKind::PhysicalSensor => "physical_sensor",
        }
    }

    pub fn needs_physical(self) -> bool {
        matches!(self, SimilarityKind::Physical | SimilarityKind::PhysicalSensor)
    }

    pub fn needs_signatures(self) -> bool {
        matches!(self, SimilarityKind::Sensor | SimilarityKind::PhysicalSensor)
    }
}

impl fmt::Display for SimilarityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SimilarityKind {
    type Err = HarError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "physical" => Ok(SimilarityKind::Physical),
            "sensor" => Ok(SimilarityKind::Sensor),
            "physical_sensor" | "physical+sensor" | "physical sensor" => Ok(SimilarityKind::PhysicalSensor),
            other => Err(HarError::InvalidArgument(format!("unknown similarity kind `{other}`"))),
        }
    }
}

/// How the kernel scale is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum GammaMode {
    Fixed(f64),
    /// `ln 2 / median(positive pairwise distances)`.
    #[default]
    MedianHeuristic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityConfig {
    pub gamma_mode: GammaMode,
    pub kind: SimilarityKind,
}

impl SimilarityConfig {
    pub fn new(kind: SimilarityKind) -> Self {
        SimilarityConfig {
            gamma_mode: GammaMode::default(),
            kind,
        }
    }

    pub fn with_gamma(mut self, gamma_mode: GammaMode) -> Self {
        self.gamma_mode = gamma_mode;
        self
    }
}

/// Scale actually used for each kernel component.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GammaUsed {
    pub physical: Option<f64>,
    pub sensor: Option<f64>,
}

/// Symmetric subject-by-subject similarity with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    subject_ids: Vec<String>,
    values: Vec<f64>,
    kind: SimilarityKind,
    gamma_used: GammaUsed,
}

impl SimilarityMatrix {
    /// Wraps a row-major square matrix after checking its invariants.
    pub fn from_values(
        subject_ids: Vec<String>,
        values: Vec<f64>,
        kind: SimilarityKind,
        gamma_used: GammaUsed,
    ) -> Result<Self> {
        let n = subject_ids.len();
        if values.len() != n * n {
            return Err(HarError::DimensionMismatch {
                expected: n * n,
                found: values.len(),
            });
        }
        for i in 0..n {
            if values[i * n + i] != 1.0 {
                return Err(HarError::InvalidArgument(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !(v > 0.0 && v <= 1.0) || v != values[j * n + i] {
                    return Err(HarError::InvalidArgument(format!(
                        "entry ({i}, {j}) = {v} breaks symmetry or the (0, 1] range"
                    )));
                }
            }
        }
        Ok(SimilarityMatrix {
            subject_ids,
            values,
            kind,
            gamma_used,
        })
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn len(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subject_ids.is_empty()
    }

    pub fn kind(&self) -> SimilarityKind {
        self.kind
    }

    pub fn gamma_used(&self) -> GammaUsed {
        self.gamma_used
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn index_of(&self, subject_id: &str) -> Option<usize> {
        self.subject_ids.iter().position(|s| s == subject_id)
    }

    /// Similarity between two subjects by id.
    pub fn between(&self, a: &str, b: &str) -> Result<f64> {
        let i = self.index_of(a).ok_or_else(|| HarError::UnknownSubject(a.to_string()))?;
        let j = self.index_of(b).ok_or_else(|| HarError::UnknownSubject(b.to_string()))?;
        Ok(self.get(i, j))
    }

    /// CSV export: header `subject_id,<ids>`, then one row per subject with
    /// six decimals.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "subject_id,{}", self.subject_ids.join(","))?;
        for (i, id) in self.subject_ids.iter().enumerate() {
            write!(out, "{id}")?;
            for v in self.row(i) {
                write!(out, ",{v:.6}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| HarError::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| HarError::io(path, e))
    }
}

fn check_dims(a: &FeatureVector, b: &FeatureVector) -> Result<()> {
    if a.len() != b.len() {
        return Err(HarError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

fn euclidean_raw(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn kernel(gamma: f64, distance: f64) -> f64 {
    // stays in (0, 1] even when the exponent underflows
    (-gamma * distance).exp().max(f64::MIN_POSITIVE)
}

/// Euclidean distance between two descriptors.
pub fn euclidean(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    check_dims(a, b)?;
    Ok(euclidean_raw(&a.values, &b.values))
}

/// `exp(-gamma * euclidean(a, b))`.
pub fn similarity(a: &FeatureVector, b: &FeatureVector, gamma: f64) -> Result<f64> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(HarError::InvalidArgument(format!("gamma must be non-negative, got {gamma}")));
    }
    Ok(kernel(gamma, euclidean(a, b)?))
}

/// Median heuristic: the pair at the median positive distance gets
/// similarity exactly 0.5.
pub fn select_gamma(pairwise_distances: &[f64]) -> Result<f64> {
    let mut positive: Vec<f64> = pairwise_distances
        .iter()
        .copied()
        .filter(|d| *d > 0.0 && d.is_finite())
        .collect();
    if positive.is_empty() {
        return Err(HarError::InvalidArgument(
            "median heuristic needs at least one positive distance".into(),
        ));
    }
    positive.sort_by(f64::total_cmp);
    let n = positive.len();
    let median = if n % 2 == 1 {
        positive[n / 2]
    } else {
        0.5 * (positive[n / 2 - 1] + positive[n / 2])
    };
    Ok(std::f64::consts::LN_2 / median)
}

/// Row-major pairwise Euclidean distances; exactly symmetric with a zero
/// diagonal.
pub fn distance_matrix(vectors: &[FeatureVector]) -> Result<Vec<f64>> {
    let n = vectors.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = euclidean(&vectors[i], &vectors[j])?;
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    Ok(d)
}

fn upper_triangle(d: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| d[i * n + j])
        .collect()
}

/// Applies the kernel to a distance matrix. The diagonal is set to exactly 1.
pub fn kernel_from_distances(distances: &[f64], n: usize, gamma: f64) -> Vec<f64> {
    let mut out = vec![1.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = kernel(gamma, distances[i * n + j]);
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
    out
}

fn resolve_gamma(mode: GammaMode, distances: &[f64], n: usize) -> Result<f64> {
    match mode {
        GammaMode::Fixed(g) if g > 0.0 && g.is_finite() => Ok(g),
        GammaMode::Fixed(g) => Err(HarError::InvalidArgument(format!("gamma must be positive, got {g}"))),
        GammaMode::MedianHeuristic => {
            let upper = upper_triangle(distances, n);
            // an all-identical population has no scale to estimate; any gamma
            // yields an all-ones matrix, so fall back to 1
            Ok(select_gamma(&upper).unwrap_or(1.0))
        }
    }
}

fn standardized_component(vectors: &[FeatureVector], mode: GammaMode) -> Result<(Vec<f64>, f64)> {
    let standardizer = Standardizer::fit(vectors)?;
    let z = vectors
        .iter()
        .map(|v| standardizer.apply(v))
        .collect::<Result<Vec<_>>>()?;
    let n = vectors.len();
    let d = distance_matrix(&z)?;
    let gamma = resolve_gamma(mode, &d, n)?;
    Ok((kernel_from_distances(&d, n, gamma), gamma))
}

/// Physical descriptors `(sex, age, weight, height)` for each subject.
pub fn physical_vectors(subjects: &[SubjectMeta]) -> Vec<FeatureVector> {
    subjects
        .iter()
        .map(|s| FeatureVector::new(s.physical_vector(), FeatureSpec::Physical))
        .collect()
}

/// Builds the similarity matrix of `config.kind` over `subjects`.
///
/// `signatures`, when given, must be aligned with `subjects`. Descriptors are
/// z-scored across exactly the given subjects before distances are taken.
pub fn build_matrix(
    config: &SimilarityConfig,
    subjects: &[SubjectMeta],
    signatures: Option<&[FeatureVector]>,
) -> Result<SimilarityMatrix> {
    let n = subjects.len();
    if n < 2 {
        return Err(HarError::InvalidArgument(format!(
            "similarity needs at least 2 subjects, got {n}"
        )));
    }
    let ids: Vec<String> = subjects.iter().map(|s| s.subject_id.clone()).collect();
    let mut gamma_used = GammaUsed::default();

    let physical = if config.kind.needs_physical() {
        let (m, g) = standardized_component(&physical_vectors(subjects), config.gamma_mode)?;
        gamma_used.physical = Some(g);
        Some(m)
    } else {
        None
    };

    let sensor = if config.kind.needs_signatures() {
        let sigs = signatures.ok_or_else(|| {
            HarError::InvalidArgument(format!("{} similarity needs subject signatures", config.kind))
        })?;
        if sigs.len() != n {
            return Err(HarError::DimensionMismatch {
                expected: n,
                found: sigs.len(),
            });
        }
        let (m, g) = standardized_component(sigs, config.gamma_mode)?;
        gamma_used.sensor = Some(g);
        Some(m)
    } else {
        None
    };

    let values = match (physical, sensor) {
        (Some(p), Some(s)) => p
            .iter()
            .zip(&s)
            .map(|(a, b)| (a * b).max(f64::MIN_POSITIVE))
            .collect(),
        (Some(m), None) | (None, Some(m)) => m,
        (None, None) => unreachable!("every kind needs at least one component"),
    };
    SimilarityMatrix::from_values(ids, values, config.kind, gamma_used)
}

/// The `m` subjects most similar to `test_subject`, most similar first.
/// Ties go to the lexicographically smaller subject id.
pub fn top_m_similar(matrix: &SimilarityMatrix, test_subject: &str, m: usize) -> Result<Vec<String>> {
    let t = matrix
        .index_of(test_subject)
        .ok_or_else(|| HarError::UnknownSubject(test_subject.to_string()))?;
    let available = matrix.len() - 1;
    if m == 0 || m > available {
        return Err(HarError::InvalidArgument(format!(
            "m = {m} outside 1..={available}"
        )));
    }
    let row = matrix.row(t);
    let mut others: Vec<usize> = (0..matrix.len()).filter(|&j| j != t).collect();
    others.sort_by(|&a, &b| {
        row[b]
            .partial_cmp(&row[a])
            .unwrap_or(Ordering::Equal)
            .then_with(|| matrix.subject_ids[a].cmp(&matrix.subject_ids[b]))
    });
    Ok(others
        .into_iter()
        .take(m)
        .map(|j| matrix.subject_ids[j].clone())
        .collect())
}
