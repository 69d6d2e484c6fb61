//! Synthetic populations with controllable inter- and intra-subject
//! variability.
//!
//! Each class has a template per axis: an orientation offset shared by all
//! classes and three sinusoids at class-specific frequencies. Each style
//! cluster perturbs all templates by an amount proportional to
//! `inter_subject_scale`: a cluster-wide cadence factor on every frequency,
//! and per-component amplitude factors and phase shifts. Cadence differences make one cluster's class resemble a
//! neighbouring class of another cluster. Subjects are assigned to clusters
//! round-robin. With `physical_style_correlation` set, each cluster draws
//! physical attributes around its own means. Each window draws amplitude,
//! cadence and start-phase jitter and adds Gaussian noise, all scaled by
//! `intra_subject_scale`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::datasets::{DatasetBundle, LabeledWindow, Sex, SubjectMeta};
use crate::error::{HarError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpec {
    pub n_subjects: usize,
    pub n_classes: usize,
    pub windows_per_class: usize,
    pub window_length: usize,
    pub rate: f64,
    pub n_style_clusters: usize,
    pub inter_subject_scale: f64,
    pub intra_subject_scale: f64,
    /// Draw physical attributes from cluster-dependent distributions.
    pub physical_style_correlation: bool,
    pub seed: u64,
}

impl PopulationSpec {
    /// 12 subjects in two correlated style clusters, 4 classes.
    pub fn two_cluster(seed: u64) -> Self {
        PopulationSpec {
            n_subjects: 12,
            n_classes: 4,
            windows_per_class: 10,
            window_length: 150,
            rate: 50.0,
            n_style_clusters: 2,
            inter_subject_scale: 1.0,
            intra_subject_scale: 0.3,
            physical_style_correlation: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_subjects", self.n_subjects),
            ("n_classes", self.n_classes),
            ("windows_per_class", self.windows_per_class),
            ("window_length", self.window_length),
            ("n_style_clusters", self.n_style_clusters),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(HarError::InvalidArgument(format!("{name} must be positive")));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(HarError::InvalidArgument(format!("rate must be positive, got {}", self.rate)));
        }
        for (name, v) in [
            ("inter_subject_scale", self.inter_subject_scale),
            ("intra_subject_scale", self.intra_subject_scale),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(HarError::InvalidArgument(format!("{name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Component {
    amplitude: f64,
    freq: f64,
    phase: f64,
}

/// Offset plus sinusoids for one axis.
#[derive(Debug, Clone)]
struct AxisTemplate {
    offset: f64,
    components: [Component; 3],
}

/// Per-window deviations from the template.
#[derive(Debug, Clone, Copy)]
struct Jitter {
    amplitude: f64,
    tempo: f64,
    start: f64,
}

impl AxisTemplate {
    fn value(&self, t: f64, jitter: Jitter) -> f64 {
        self.offset
            + jitter.amplitude
                * self
                    .components
                    .iter()
                    .map(|c| c.amplitude * (2.0 * PI * c.freq * jitter.tempo * t + c.phase + jitter.start).sin())
                    .sum::<f64>()
    }
}

type Template = [AxisTemplate; 3];

/// Lowest and highest fundamental frequency (Hz) across classes.
const FREQ_RANGE: (f64, f64) = (0.7, 8.0);
/// Amplitude grows with frequency as `f^VIGOR_EXPONENT`.
const VIGOR_EXPONENT: f64 = 0.5;
/// Log-cadence distance between the slowest and fastest cluster at
/// `inter_subject_scale = 1`.
const CADENCE_SPREAD: f64 = 1.0;
const CADENCE_JITTER: f64 = 0.05;
/// Largest log-amplitude factor of a cluster perturbation.
const AMPLITUDE_PERTURBATION: f64 = 0.3;
/// Largest phase shift (radians) of a cluster perturbation.
const PHASE_PERTURBATION: f64 = 0.2;
/// Per-window log-scale jitter and noise sd at `intra_subject_scale = 1`.
const AMPLITUDE_JITTER: f64 = 0.2;
const TEMPO_JITTER: f64 = 0.25;
const NOISE_SD: f64 = 0.2;

/// Geometrically spaced fundamentals: consecutive classes differ by a
/// constant ratio, so a cadence change can map one class onto another.
fn class_frequencies(n_classes: usize) -> Vec<f64> {
    let (lo, hi) = FREQ_RANGE;
    if n_classes == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).powf(1.0 / (n_classes - 1) as f64);
    (0..n_classes).map(|c| lo * ratio.powi(c as i32)).collect()
}

/// Amplitude factor of a fundamental frequency: faster movements are larger.
fn vigor(f0: f64) -> f64 {
    (f0 / FREQ_RANGE.0).powf(VIGOR_EXPONENT)
}

fn base_templates(n_classes: usize, rng: &mut ChaCha8Rng) -> Vec<Template> {
    const ORIENTATION: [f64; 3] = [0.0, 0.3, 1.0];
    // amplitudes, phases and orientation are shared by all classes, so a
    // class is identified by its frequencies alone
    let shape: [[(f64, f64); 3]; 3] = std::array::from_fn(|_| {
        [
            (rng.random_range(0.6..1.0), rng.random_range(0.0..2.0 * PI)),
            (rng.random_range(0.2..0.4), rng.random_range(0.0..2.0 * PI)),
            (rng.random_range(0.05..0.2), rng.random_range(0.0..2.0 * PI)),
        ]
    });
    class_frequencies(n_classes)
        .into_iter()
        .map(|f0| {
            std::array::from_fn(|a| AxisTemplate {
                offset: ORIENTATION[a],
                components: std::array::from_fn(|k| Component {
                    amplitude: shape[a][k].0 * vigor(f0),
                    freq: (k + 1) as f64 * f0,
                    phase: shape[a][k].1,
                }),
            })
        })
        .collect()
}

/// Log-cadence of a cluster: evenly spread across clusters plus a little
/// jitter.
fn draw_log_cadence(cluster: usize, n_clusters: usize, scale: f64, rng: &mut ChaCha8Rng) -> f64 {
    let spread = if n_clusters > 1 {
        cluster as f64 / (n_clusters - 1) as f64 - 0.5
    } else {
        0.0
    };
    scale * (CADENCE_SPREAD * spread + CADENCE_JITTER * rng.random_range(-1.0..1.0))
}

fn perturb(template: &Template, log_cadence: f64, scale: f64, rng: &mut ChaCha8Rng) -> Template {
    let cadence = log_cadence.exp();
    let vigor_gain = cadence.powf(VIGOR_EXPONENT);
    std::array::from_fn(|a| AxisTemplate {
        offset: template[a].offset,
        components: template[a].components.map(|c| Component {
            amplitude: c.amplitude
                * vigor_gain
                * (scale * AMPLITUDE_PERTURBATION * rng.random_range(-1.0..1.0f64)).exp(),
            freq: c.freq * cadence,
            phase: c.phase + scale * PHASE_PERTURBATION * rng.random_range(-1.0..1.0),
        }),
    })
}

struct MetaProfile {
    female_probability: f64,
    age: (f64, f64),
    weight: (f64, f64),
    height: (f64, f64),
}

/// Attribute distributions of a cluster; means move together from the first
/// cluster (younger, lighter, shorter, mostly female) to the last.
fn cluster_profile(cluster: usize, n_clusters: usize) -> MetaProfile {
    let u = if n_clusters > 1 {
        cluster as f64 / (n_clusters - 1) as f64
    } else {
        0.5
    };
    MetaProfile {
        female_probability: 0.85 - 0.7 * u,
        age: (22.0 + 35.0 * u, 1.5),
        weight: (55.0 + 30.0 * u, 2.0),
        height: (160.0 + 20.0 * u, 2.0),
    }
}

fn population_profile() -> MetaProfile {
    MetaProfile {
        female_probability: 0.5,
        age: (40.0, 12.0),
        weight: (70.0, 12.0),
        height: (170.0, 9.0),
    }
}

fn draw_meta(id: String, profile: &MetaProfile, rng: &mut ChaCha8Rng) -> SubjectMeta {
    let mut normal = |(mean, sd): (f64, f64)| Normal::new(mean, sd).expect("positive sd").sample(rng);
    let age = normal(profile.age).round().clamp(18.0, 90.0) as u32;
    let weight = (normal(profile.weight).clamp(35.0, 150.0) * 10.0).round() / 10.0;
    let height = (normal(profile.height).clamp(140.0, 210.0) * 10.0).round() / 10.0;
    let sex = if rng.random_bool(profile.female_probability) {
        Sex::Female
    } else {
        Sex::Male
    };
    SubjectMeta {
        subject_id: id,
        sex,
        age,
        weight,
        height,
    }
}

/// Style cluster of subject index `i` (round-robin assignment).
pub fn cluster_of(i: usize, n_style_clusters: usize) -> usize {
    i % n_style_clusters
}

/// Deterministic synthetic bundle named `synth`. Subject ids are `s01`,
/// `s02`, ...; labels are `c0`, `c1`, ... (zero-padded to equal width).
pub fn generate_population(spec: &PopulationSpec) -> Result<DatasetBundle> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let base = base_templates(spec.n_classes, &mut rng);
    let styles: Vec<Vec<Template>> = (0..spec.n_style_clusters)
        .map(|k| {
            let log_cadence = draw_log_cadence(k, spec.n_style_clusters, spec.inter_subject_scale, &mut rng);
            base.iter()
                .map(|t| perturb(t, log_cadence, spec.inter_subject_scale, &mut rng))
                .collect()
        })
        .collect();

    let id_width = spec.n_subjects.to_string().len().max(2);
    let label_width = (spec.n_classes - 1).to_string().len();
    let labels: Vec<String> = (0..spec.n_classes).map(|c| format!("c{c:0label_width$}")).collect();
    let noise = Normal::new(0.0, (NOISE_SD * spec.intra_subject_scale).max(f64::MIN_POSITIVE)).expect("finite sd");

    let mut subjects = Vec::with_capacity(spec.n_subjects);
    let mut windows = Vec::with_capacity(spec.n_subjects * spec.n_classes * spec.windows_per_class);
    for i in 0..spec.n_subjects {
        let cluster = cluster_of(i, spec.n_style_clusters);
        let id = format!("s{:0id_width$}", i + 1);
        let profile = if spec.physical_style_correlation {
            cluster_profile(cluster, spec.n_style_clusters)
        } else {
            population_profile()
        };
        subjects.push(draw_meta(id.clone(), &profile, &mut rng));

        let mut window_id = 0;
        for (c, label) in labels.iter().enumerate() {
            let template = &styles[cluster][c];
            for _ in 0..spec.windows_per_class {
                let intra = spec.intra_subject_scale;
                let jitter = Jitter {
                    amplitude: (AMPLITUDE_JITTER * intra * rng.random_range(-1.0..1.0f64)).exp(),
                    tempo: (TEMPO_JITTER * intra * rng.random_range(-1.0..1.0f64)).exp(),
                    start: intra * PI * rng.random_range(-1.0..1.0),
                };
                let samples = (0..spec.window_length)
                    .map(|k| {
                        let t = k as f64 / spec.rate;
                        std::array::from_fn(|a| {
                            let clean = template[a].value(t, jitter);
                            if spec.intra_subject_scale > 0.0 {
                                clean + noise.sample(&mut rng)
                            } else {
                                clean
                            }
                        })
                    })
                    .collect();
                windows.push(LabeledWindow {
                    subject_id: id.clone(),
                    label: label.clone(),
                    window_id,
                    samples,
                    rate: spec.rate,
                });
                window_id += 1;
            }
        }
    }
    DatasetBundle::new("synth", subjects, windows, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::subject_signature;
    use crate::similarity::{build_matrix, euclidean, SimilarityConfig, SimilarityKind};

    fn small(seed: u64) -> PopulationSpec {
        PopulationSpec {
            n_subjects: 6,
            windows_per_class: 6,
            ..PopulationSpec::two_cluster(seed)
        }
    }

    #[test]
    fn same_spec_gives_identical_bundle() {
        let a = generate_population(&small(3)).unwrap();
        let b = generate_population(&small(3)).unwrap();
        assert_eq!(a.subjects(), b.subjects());
        assert_eq!(a.windows(), b.windows());
        let c = generate_population(&small(4)).unwrap();
        assert_ne!(a.windows(), c.windows());
    }

    #[test]
    fn bundle_shape() {
        let spec = small(1);
        let b = generate_population(&spec).unwrap();
        assert_eq!(b.name(), "synth");
        assert_eq!(b.subject_ids(), ["s01", "s02", "s03", "s04", "s05", "s06"]);
        assert_eq!(b.label_set(), ["c0", "c1", "c2", "c3"]);
        assert_eq!(b.windows().len(), 6 * 4 * 6);
        assert_eq!(b.window_length(), 150);
        assert_eq!(b.rate(), Some(50.0));
        assert!(b.windows().iter().flat_map(|w| &w.samples).all(|s| s.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn noise_free_single_cluster_windows_coincide() {
        let spec = PopulationSpec {
            n_style_clusters: 1,
            intra_subject_scale: 0.0,
            ..small(9)
        };
        let b = generate_population(&spec).unwrap();
        for label in b.label_set() {
            let mut of_class = b.windows().iter().filter(|w| &w.label == label);
            let first = of_class.next().unwrap();
            assert!(of_class.all(|w| w.samples == first.samples));
        }
    }

    #[test]
    fn physical_similarity_is_higher_within_clusters() {
        for seed in 0..10 {
            let spec = PopulationSpec::two_cluster(seed);
            let b = generate_population(&spec).unwrap();
            let m = build_matrix(&SimilarityConfig::new(SimilarityKind::Physical), b.subjects(), None).unwrap();
            let (mut within, mut across) = (Vec::new(), Vec::new());
            for i in 0..m.len() {
                for j in i + 1..m.len() {
                    let same = cluster_of(i, 2) == cluster_of(j, 2);
                    if same { &mut within } else { &mut across }.push(m.get(i, j));
                }
            }
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            assert!(mean(&within) > mean(&across), "seed {seed}");
        }
    }

    /// Largest distance between two subject signatures, and the mean
    /// distance between the signatures of each subject's even and odd windows.
    fn signature_spread(b: &DatasetBundle) -> (f64, f64) {
        let ids = b.subject_ids();
        let sigs: Vec<_> = ids.iter().map(|s| subject_signature(b.windows_of(s)).unwrap()).collect();
        let mut between: f64 = 0.0;
        for i in 0..sigs.len() {
            for j in i + 1..sigs.len() {
                between = between.max(euclidean(&sigs[i], &sigs[j]).unwrap());
            }
        }
        let halves: f64 = ids
            .iter()
            .map(|s| {
                let even = subject_signature(b.windows_of(s).step_by(2)).unwrap();
                let odd = subject_signature(b.windows_of(s).skip(1).step_by(2)).unwrap();
                euclidean(&even, &odd).unwrap()
            })
            .sum();
        (between, halves / ids.len() as f64)
    }

    #[test]
    fn signatures_collapse_without_inter_subject_variability() {
        for seed in 0..5 {
            let flat = PopulationSpec {
                inter_subject_scale: 0.0,
                ..small(seed)
            };
            let (between, within) = signature_spread(&generate_population(&flat).unwrap());
            assert!(between < 3.0 * within, "seed {seed}: {between} vs {within}");

            let (between, within) = signature_spread(&generate_population(&small(seed)).unwrap());
            assert!(between > 3.0 * within, "seed {seed}: styled {between} vs {within}");
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(generate_population(&PopulationSpec { n_classes: 0, ..small(0) }).is_err());
        assert!(generate_population(&PopulationSpec { intra_subject_scale: -1.0, ..small(0) }).is_err());
        assert!(generate_population(&PopulationSpec { rate: f64::NAN, ..small(0) }).is_err());
    }
}
