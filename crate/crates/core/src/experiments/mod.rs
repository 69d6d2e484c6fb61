//! Subject splits, the PML / PDL / DL runners and macro-averaged results.
//!
//! PML trains boosting on all training windows with each window's initial
//! weight set to the similarity between its subject and the test subject.
//! PDL trains the convnet on the `m` most similar subjects only, for every
//! `m` of [`pdl_schedule`]. DL trains the same convnet on every training
//! window.

mod results;
mod split;

use rayon::prelude::*;

pub use results::{
    load_results, macro_accuracy, read_results, save_results, write_results, GroupField, MacroRow, Method,
    RunResult, RESULTS_HEADER,
};
pub use split::{
    donation_count, make_hyb_split, make_si_split, make_split, pdl_schedule, Split, SplitMode, SplitSpec,
    DEFAULT_HYB_FRACTION,
};

use crate::adaboost::{self, BoostConfig, FeatureMatrix, PriorWeights};
use crate::convnet::{self, NetConfig};
use crate::datasets::{DatasetBundle, LabeledWindow};
use crate::error::{HarError, Result};
use crate::features::{extract_features, signature_from_features, FeatureVector};
use crate::similarity::{build_matrix, top_m_similar, GammaMode, SimilarityConfig, SimilarityKind, SimilarityMatrix};

/// Engine settings shared by every run of a plan.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub boost: BoostConfig,
    /// Architecture and optimizer template; input length, class count and
    /// seed are filled in per run.
    pub net: NetConfig,
    pub gamma_mode: GammaMode,
    pub hyb_fraction: f64,
    pub master_seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            boost: BoostConfig::default(),
            net: NetConfig::reference(0, 0),
            gamma_mode: GammaMode::MedianHeuristic,
            hyb_fraction: DEFAULT_HYB_FRACTION,
            master_seed: 0,
        }
    }
}

/// Deterministic 64-bit seed for a named cell of an experiment.
///
/// FNV-1a over the master seed and the parts, finished with the splitmix64
/// mixer, so results do not depend on the standard library's hasher.
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |b: u8| {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    };
    master.to_le_bytes().into_iter().for_each(&mut eat);
    for part in parts {
        eat(0xff);
        part.bytes().for_each(&mut eat);
    }
    let mut z = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The split a plan uses for `test_subject` in `mode`.
pub fn plan_split_spec(engine: &EngineConfig, mode: SplitMode, test_subject: &str) -> SplitSpec {
    match mode {
        SplitMode::Si => SplitSpec::si(test_subject),
        SplitMode::Hyb => SplitSpec::hyb(
            test_subject,
            engine.hyb_fraction,
            derive_seed(engine.master_seed, &["hyb", test_subject]),
        ),
    }
}

/// Per-bundle precomputation: window features, subject signatures and the
/// similarity matrices over all subjects.
pub struct ExperimentContext<'a> {
    bundle: &'a DatasetBundle,
    features: Vec<FeatureVector>,
    labels: Vec<usize>,
    matrices: Vec<SimilarityMatrix>,
}

impl<'a> ExperimentContext<'a> {
    /// Sensor matrices are built only when every subject has windows.
    pub fn new(bundle: &'a DatasetBundle, gamma_mode: GammaMode) -> Result<Self> {
        let features = bundle
            .windows()
            .par_iter()
            .map(extract_features)
            .collect::<Result<Vec<_>>>()?;
        let labels = bundle
            .windows()
            .iter()
            .map(|w| bundle.label_index(&w.label).expect("bundle labels are validated"))
            .collect();

        let signatures: Option<Vec<FeatureVector>> = bundle
            .subjects()
            .iter()
            .map(|s| {
                let own: Vec<FeatureVector> = bundle
                    .windows()
                    .iter()
                    .zip(&features)
                    .filter(|(w, _)| w.subject_id == s.subject_id)
                    .map(|(_, f)| f.clone())
                    .collect();
                signature_from_features(&own).ok()
            })
            .collect();
        if signatures.is_none() {
            log::warn!("{}: a subject has no windows; sensor similarity unavailable", bundle.name());
        }

        let mut matrices = Vec::new();
        for kind in SimilarityKind::ALL {
            if kind.needs_signatures() && signatures.is_none() {
                continue;
            }
            let config = SimilarityConfig::new(kind).with_gamma(gamma_mode);
            matrices.push(build_matrix(&config, bundle.subjects(), signatures.as_deref())?);
        }
        Ok(ExperimentContext {
            bundle,
            features,
            labels,
            matrices,
        })
    }

    pub fn bundle(&self) -> &DatasetBundle {
        self.bundle
    }

    /// Features of window `i` of the bundle.
    pub fn features(&self) -> &[FeatureVector] {
        &self.features
    }

    /// Class index of each bundle window.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn matrix(&self, kind: SimilarityKind) -> Result<&SimilarityMatrix> {
        self.matrices
            .iter()
            .find(|m| m.kind() == kind)
            .ok_or_else(|| HarError::InvalidArgument(format!("{kind} similarity unavailable for this dataset")))
    }

    fn window(&self, i: usize) -> &LabeledWindow {
        &self.bundle.windows()[i]
    }

    /// Training-window weights for PML before normalization: each window gets
    /// its subject's similarity to the test subject, donated windows get 1.
    pub fn pml_raw_weights(&self, split: &Split, matrix: &SimilarityMatrix) -> Result<Vec<f64>> {
        split
            .train
            .iter()
            .map(|&i| {
                if split.is_donated(i) {
                    Ok(1.0)
                } else {
                    matrix.between(&self.window(i).subject_id, &split.test_subject)
                }
            })
            .collect()
    }

    /// Trains boosting on `split.train` with the given raw window weights and
    /// returns the number of correctly classified test windows.
    pub fn boost_correct(&self, split: &Split, raw_weights: &[f64], config: &BoostConfig) -> Result<usize> {
        let rows: Vec<&[f64]> = split.train.iter().map(|&i| self.features[i].values.as_slice()).collect();
        let labels: Vec<usize> = split.train.iter().map(|&i| self.labels[i]).collect();
        let priors = PriorWeights::from_raw(raw_weights)?;
        let model = adaboost::train(
            &FeatureMatrix::from_rows(&rows)?,
            &labels,
            self.bundle.label_set(),
            &priors,
            config,
        )?;
        let mut correct = 0;
        for &i in &split.test {
            correct += usize::from(model.predict(&self.features[i].values)? == self.labels[i]);
        }
        Ok(correct)
    }

    /// Convnet training windows: every training window for DL, otherwise the
    /// windows of the `m` most similar subjects plus donated windows.
    pub fn net_training_windows(&self, split: &Split, selection: Option<(&SimilarityMatrix, usize)>) -> Result<Vec<usize>> {
        let Some((matrix, m)) = selection else {
            return Ok(split.train.clone());
        };
        let chosen = top_m_similar(matrix, &split.test_subject, m)?;
        Ok(split
            .train
            .iter()
            .copied()
            .filter(|&i| split.is_donated(i) || chosen.iter().any(|s| *s == self.window(i).subject_id))
            .collect())
    }

    /// Trains the convnet on `train` and counts correct test windows.
    pub fn net_correct(&self, net: &NetConfig, train: &[usize], test: &[usize]) -> Result<usize> {
        let windows: Vec<&LabeledWindow> = train.iter().map(|&i| self.window(i)).collect();
        let labels: Vec<usize> = train.iter().map(|&i| self.labels[i]).collect();
        let trained = convnet::train(net, &windows, &labels)?;
        let mut correct = 0;
        for &i in test {
            correct += usize::from(convnet::predict(&trained, self.window(i))?.0 == self.labels[i]);
        }
        Ok(correct)
    }

    /// Runs one method for one split. PML and PDL need `kind`; DL ignores it.
    pub fn run(
        &self,
        method: Method,
        kind: Option<SimilarityKind>,
        spec: &SplitSpec,
        engine: &EngineConfig,
    ) -> Result<Vec<RunResult>> {
        let split = make_split(self.bundle, spec)?;
        if split.test.is_empty() {
            return Err(HarError::EmptyInput("test windows"));
        }
        if spec.mode == SplitMode::Si && split.train.iter().any(|&i| self.window(i).subject_id == spec.test_subject) {
            return Err(HarError::Leakage(spec.test_subject.clone()));
        }
        let kind = if method.uses_similarity() {
            Some(kind.ok_or_else(|| HarError::InvalidArgument(format!("{method} needs a similarity kind")))?)
        } else {
            None
        };
        let result = |m: Option<usize>, correct: usize| RunResult {
            dataset: self.bundle.name().to_string(),
            method,
            sim_kind: kind,
            split: spec.mode,
            subject_id: spec.test_subject.clone(),
            m,
            n_test: split.test.len(),
            accuracy: correct as f64 / split.test.len() as f64,
        };

        let net = NetConfig {
            input_length: self.bundle.window_length(),
            classes: self.bundle.label_set().len(),
            seed: derive_seed(engine.master_seed, &["net", &spec.test_subject, spec.mode.as_str()]),
            ..engine.net.clone()
        };
        match method {
            Method::Pml => {
                let matrix = self.matrix(kind.expect("checked above"))?;
                let weights = self.pml_raw_weights(&split, matrix)?;
                Ok(vec![result(None, self.boost_correct(&split, &weights, &engine.boost)?)])
            }
            Method::Pdl => {
                let matrix = self.matrix(kind.expect("checked above"))?;
                let available = matrix.len() - 1;
                pdl_schedule(available)?
                    .into_iter()
                    .map(|m| {
                        let train = self.net_training_windows(&split, Some((matrix, m)))?;
                        Ok(result(Some(m), self.net_correct(&net, &train, &split.test)?))
                    })
                    .collect()
            }
            Method::Dl => {
                let train = self.net_training_windows(&split, None)?;
                Ok(vec![result(None, self.net_correct(&net, &train, &split.test)?)])
            }
        }
    }

    /// Every requested combination for every subject. Subjects run in
    /// parallel; the output order depends only on the inputs.
    pub fn run_plan(
        &self,
        methods: &[Method],
        kinds: &[SimilarityKind],
        modes: &[SplitMode],
        engine: &EngineConfig,
    ) -> Result<Vec<RunResult>> {
        let subjects = self.bundle.subject_ids();
        let per_subject: Vec<Vec<RunResult>> = subjects
            .par_iter()
            .map(|subject| {
                let mut out = Vec::new();
                for &mode in modes {
                    let spec = plan_split_spec(engine, mode, subject);
                    for &method in methods {
                        if method.uses_similarity() {
                            for &kind in kinds {
                                out.extend(self.run(method, Some(kind), &spec, engine)?);
                            }
                        } else {
                            out.extend(self.run(method, None, &spec, engine)?);
                        }
                    }
                }
                log::info!("{}: subject {subject} done", self.bundle.name());
                Ok(out)
            })
            .collect::<Result<_>>()?;
        Ok(per_subject.into_iter().flatten().collect())
    }
}

/// One-shot form of [`ExperimentContext::run`].
pub fn run_experiment(
    bundle: &DatasetBundle,
    method: Method,
    kind: Option<SimilarityKind>,
    spec: &SplitSpec,
    engine: &EngineConfig,
) -> Result<Vec<RunResult>> {
    ExperimentContext::new(bundle, engine.gamma_mode)?.run(method, kind, spec, engine)
}
