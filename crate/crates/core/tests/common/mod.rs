//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use har_core::adaboost::{train, BoostConfig, FeatureMatrix, PriorWeights, Stump};
use har_core::convnet::NetConfig;
use har_core::datasets::{LabeledWindow, Sex, SubjectMeta};
use har_core::features::{FeatureSpec, FeatureVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct ToyData {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

impl ToyData {
    pub fn matrix(&self) -> FeatureMatrix {
        FeatureMatrix::from_rows(&self.rows).unwrap()
    }

    pub fn label_set(&self) -> Vec<String> {
        (0..self.n_classes).map(|c| format!("k{c}")).collect()
    }

    /// 100 probe points: a 10 x 10 grid over the first two features (100
    /// steps for 1-D data), other features at mid-range.
    pub fn probe_grid(&self) -> Vec<Vec<f64>> {
        let dims = self.rows[0].len();
        let range = |f: usize| {
            let lo = self.rows.iter().map(|r| r[f]).fold(f64::INFINITY, f64::min);
            let hi = self.rows.iter().map(|r| r[f]).fold(f64::NEG_INFINITY, f64::max);
            (lo - 0.1, hi + 0.1)
        };
        let axis = |f: usize, k: usize, steps: usize| {
            let (lo, hi) = range(f);
            lo + (hi - lo) * k as f64 / (steps - 1) as f64
        };
        let mut probes = Vec::with_capacity(100);
        for a in 0..10 {
            for b in 0..10 {
                let mut x: Vec<f64> = (0..dims).map(|f| (range(f).0 + range(f).1) / 2.0).collect();
                if dims == 1 {
                    x[0] = axis(0, a * 10 + b, 100);
                } else {
                    x[0] = axis(0, a, 10);
                    x[1] = axis(1, b, 10);
                }
                probes.push(x);
            }
        }
        probes
    }
}

/// Random data set with at most 40 samples, 3 features and 3 classes.
/// Values are rounded to two decimals so ties and repeated values occur.
pub fn toy_dataset(rng: &mut ChaCha8Rng) -> ToyData {
    let n_classes = rng.random_range(2..=3);
    let dims = rng.random_range(1..=3);
    let n = rng.random_range(n_classes + 2..=40);
    let rows = (0..n)
        .map(|_| (0..dims).map(|_| (rng.random_range(-1.0..1.0f64) * 100.0).round() / 100.0).collect())
        .collect();
    let labels = (0..n)
        .map(|i| if i < n_classes { i } else { rng.random_range(0..n_classes) })
        .collect();
    ToyData { rows, labels, n_classes }
}

/// Tries every feature, every midpoint between consecutive distinct values
/// and every (left, right) label pair; the minimum error wins, ties go to
/// the lexicographically smallest (feature, threshold, left, right).
pub fn oracle_stump(rows: &[Vec<f64>], labels: &[usize], n_classes: usize, weights: &[f64]) -> (Stump, f64) {
    let mut candidates = Vec::new();
    for f in 0..rows[0].len() {
        let mut values: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for pair in values.windows(2) {
            let threshold = pair[0] + (pair[1] - pair[0]) / 2.0;
            for left_label in 0..n_classes {
                for right_label in 0..n_classes {
                    let stump = Stump {
                        feature_index: f,
                        threshold,
                        left_label,
                        right_label,
                    };
                    let mut error = 0.0;
                    for i in 0..rows.len() {
                        let predicted = if rows[i][f] <= threshold { left_label } else { right_label };
                        if predicted != labels[i] {
                            error += weights[i];
                        }
                    }
                    candidates.push((stump, error));
                }
            }
        }
    }
    let best = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    candidates
        .into_iter()
        .filter(|c| c.1 <= best + 1e-12)
        .min_by(|a, b| {
            let key = |s: &Stump| (s.feature_index, s.left_label, s.right_label);
            a.0.feature_index
                .cmp(&b.0.feature_index)
                .then(a.0.threshold.total_cmp(&b.0.threshold))
                .then(key(&a.0).cmp(&key(&b.0)))
        })
        .unwrap()
}

/// Textbook SAMME from uniform weights, stumps chosen by [`oracle_stump`].
pub fn reference_samme(data: &ToyData, rounds: usize, alpha_cap: f64) -> Vec<(Stump, f64)> {
    let n = data.rows.len();
    let c = data.n_classes as f64;
    let mut w = vec![1.0 / n as f64; n];
    let mut model = Vec::new();
    for _ in 0..rounds {
        let (stump, _) = oracle_stump(&data.rows, &data.labels, data.n_classes, &w);
        let miss: Vec<bool> = (0..n).map(|i| stump.predict(&data.rows[i]) != data.labels[i]).collect();
        let err: f64 = (0..n).filter(|&i| miss[i]).map(|i| w[i]).sum();
        if err >= 1.0 - 1.0 / c {
            if model.is_empty() {
                model.push((stump, 1.0));
            }
            break;
        }
        if err <= 1e-12 {
            model.push((stump, alpha_cap));
            break;
        }
        let alpha = (((1.0 - err) / err).ln() + (c - 1.0).ln()).min(alpha_cap);
        model.push((stump, alpha));
        for i in 0..n {
            if miss[i] {
                w[i] *= alpha.exp();
            }
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
    }
    model
}

/// Vote tally over `(stump, alpha)` pairs; ties go to the lower class.
pub fn naive_predict(rounds: &[(Stump, f64)], n_classes: usize, x: &[f64]) -> usize {
    let mut votes = vec![0.0; n_classes];
    for (s, a) in rounds {
        let label = if x[s.feature_index] <= s.threshold { s.left_label } else { s.right_label };
        votes[label] += a;
    }
    let mut best = 0;
    for c in 1..n_classes {
        if votes[c] > votes[best] {
            best = c;
        }
    }
    best
}

/// Trains once with a duplicated sample and once with that sample's prior
/// doubled; returns the predictions of both on the probe grid.
pub fn duplicate_vs_doubled(data: &ToyData, sample: usize) -> (Vec<usize>, Vec<usize>) {
    let config = BoostConfig::default();
    let labels = data.label_set();

    let mut dup_rows = data.rows.clone();
    dup_rows.push(data.rows[sample].clone());
    let mut dup_labels = data.labels.clone();
    dup_labels.push(data.labels[sample]);
    let dup = train(
        &FeatureMatrix::from_rows(&dup_rows).unwrap(),
        &dup_labels,
        &labels,
        &PriorWeights::uniform(dup_rows.len()),
        &config,
    )
    .unwrap();

    let mut raw = vec![1.0; data.rows.len()];
    raw[sample] = 2.0;
    let doubled = train(
        &data.matrix(),
        &data.labels,
        &labels,
        &PriorWeights::from_raw(&raw).unwrap(),
        &config,
    )
    .unwrap();

    let probes = data.probe_grid();
    let predict = |m: &har_core::adaboost::BoostModel| probes.iter().map(|x| m.predict(x).unwrap()).collect();
    (predict(&dup), predict(&doubled))
}

/// Random subjects with plausible attributes and random 64-dim signatures.
/// Every fifth population repeats one subject's attributes, and the first
/// signature dimension is constant.
pub fn random_population(rng: &mut ChaCha8Rng, index: usize) -> (Vec<SubjectMeta>, Vec<FeatureVector>) {
    let n = rng.random_range(4..=20);
    let mut subjects: Vec<SubjectMeta> = (0..n)
        .map(|i| SubjectMeta {
            subject_id: format!("p{i:02}"),
            sex: if rng.random_bool(0.5) { Sex::Female } else { Sex::Male },
            age: rng.random_range(18..80),
            weight: (rng.random_range(40.0..120.0f64) * 10.0).round() / 10.0,
            height: (rng.random_range(145.0..200.0f64) * 10.0).round() / 10.0,
        })
        .collect();
    if index.is_multiple_of(5) {
        let copy = subjects[0].clone();
        subjects[1] = SubjectMeta {
            subject_id: subjects[1].subject_id.clone(),
            ..copy
        };
    }
    let signatures = (0..n)
        .map(|_| {
            let mut v: Vec<f64> = (0..64).map(|_| rng.random_range(-3.0..3.0)).collect();
            v[0] = 0.5;
            FeatureVector::new(v, FeatureSpec::Signature)
        })
        .collect();
    (subjects, signatures)
}

pub fn physical_rows(subjects: &[SubjectMeta]) -> Vec<Vec<f64>> {
    subjects
        .iter()
        .map(|s| {
            let sex = match s.sex {
                Sex::Female => 0.0,
                Sex::Male => 1.0,
            };
            vec![sex, s.age as f64, s.weight, s.height]
        })
        .collect()
}

/// z-score with population sd (floored at 1e-8), pairwise Euclidean
/// distance, median-heuristic gamma, exponential kernel; pair by pair.
pub fn oracle_similarity(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let dims = rows[0].len();
    let mut z = vec![vec![0.0; dims]; n];
    for d in 0..dims {
        let mean = rows.iter().map(|r| r[d]).sum::<f64>() / n as f64;
        let var = rows.iter().map(|r| (r[d] - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt().max(1e-8);
        for i in 0..n {
            z[i][d] = (rows[i][d] - mean) / sd;
        }
    }
    let dist = |i: usize, j: usize| {
        let mut s = 0.0;
        for d in 0..dims {
            s += (z[i][d] - z[j][d]).powi(2);
        }
        s.sqrt()
    };
    let mut positive = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let d = dist(i, j);
            if d > 0.0 {
                positive.push(d);
            }
        }
    }
    positive.sort_by(f64::total_cmp);
    let k = positive.len();
    let gamma = if k == 0 {
        1.0
    } else if k % 2 == 1 {
        std::f64::consts::LN_2 / positive[k / 2]
    } else {
        std::f64::consts::LN_2 / ((positive[k / 2 - 1] + positive[k / 2]) / 2.0)
    };
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { (-gamma * dist(i, j)).exp() }).collect())
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random bundle with 2-8 subjects, 1-4 classes and 0-12 windows per
/// (subject, class); every subject has at least one window.
pub fn random_bundle(rng: &mut ChaCha8Rng) -> har_core::datasets::DatasetBundle {
    use har_core::datasets::{DatasetBundle, LabeledWindow};
    let n_subjects = rng.random_range(2..=8);
    let n_classes = rng.random_range(1..=4);
    let labels: Vec<String> = (0..n_classes).map(|c| format!("a{c}")).collect();
    let mut subjects = Vec::new();
    let mut windows = Vec::new();
    for s in 0..n_subjects {
        let id = format!("u{s}");
        subjects.push(SubjectMeta {
            subject_id: id.clone(),
            sex: Sex::Male,
            age: 30,
            weight: 70.0,
            height: 175.0,
        });
        let mut window_id = 0;
        for (c, label) in labels.iter().enumerate() {
            let count = if c == 0 { rng.random_range(1..=12) } else { rng.random_range(0..=12) };
            for _ in 0..count {
                windows.push(LabeledWindow {
                    subject_id: id.clone(),
                    label: label.clone(),
                    window_id,
                    samples: vec![[0.0; 3]; 4],
                    rate: 50.0,
                });
                window_id += 1;
            }
        }
    }
    DatasetBundle::new("random", subjects, windows, labels).unwrap()
}

/// One random SI or HYB split checked for leakage, donation counts and
/// partition; `Err` describes the first violation.
pub fn random_split_trial(rng: &mut ChaCha8Rng) -> Result<(), String> {
    use har_core::experiments::{make_split, SplitMode, SplitSpec};
    let bundle = random_bundle(rng);
    let ids = bundle.subject_ids();
    let test = ids[rng.random_range(0..ids.len())].to_string();
    let spec = if rng.random_bool(0.5) {
        SplitSpec::si(&test)
    } else {
        SplitSpec::hyb(&test, rng.random_range(0.01..0.99), rng.random())
    };
    let split = make_split(&bundle, &spec).map_err(|e| e.to_string())?;
    let windows = bundle.windows();

    let mut seen = vec![0u32; windows.len()];
    for &i in split.train.iter().chain(&split.test) {
        seen[i] += 1;
    }
    if seen.iter().any(|&c| c != 1) {
        return Err(format!("{spec:?}: train and test do not partition the windows"));
    }
    if split.test.iter().any(|&i| windows[i].subject_id != test) {
        return Err(format!("{spec:?}: test holds another subject's window"));
    }
    match spec.mode {
        SplitMode::Si => {
            if split.train.iter().any(|&i| windows[i].subject_id == test) || !split.donated.is_empty() {
                return Err(format!("{spec:?}: test subject leaked into training"));
            }
        }
        SplitMode::Hyb => {
            for label in bundle.label_set() {
                let n = windows.iter().filter(|w| w.subject_id == test && &w.label == label).count();
                let expected = if n < 2 { 0 } else { ((spec.hyb_fraction * n as f64).floor() as usize).max(1) };
                let donated = split.donated.iter().filter(|&&i| &windows[i].label == label).count();
                if donated != expected {
                    return Err(format!("{spec:?}: class {label} with {n} windows donated {donated}, expected {expected}"));
                }
            }
            let own_in_train = split.train.iter().filter(|&&i| windows[i].subject_id == test).count();
            if own_in_train != split.donated.len() || split.donated.iter().any(|d| split.train.binary_search(d).is_err()) {
                return Err(format!("{spec:?}: donated windows and training windows disagree"));
            }
        }
    }
    Ok(())
}

/// Small two-cluster population used by the experiment tests.
pub fn small_population(seed: u64) -> har_core::datasets::DatasetBundle {
    use har_core::synth::{generate_population, PopulationSpec};
    generate_population(&PopulationSpec {
        windows_per_class: 4,
        window_length: 64,
        ..PopulationSpec::two_cluster(seed)
    })
    .unwrap()
}

/// Random inputs and labels shaped for `config`.
pub fn random_batch(config: &NetConfig, n: usize, seed: u64) -> Vec<(Vec<f64>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x = (0..config.channels_in * config.input_length)
                .map(|_| rng.random_range(-1.5..1.5))
                .collect();
            (x, rng.random_range(0..config.classes))
        })
        .collect()
}

pub fn as_refs(batch: &[(Vec<f64>, usize)]) -> Vec<(&[f64], usize)> {
    batch.iter().map(|(x, y)| (x.as_slice(), *y)).collect()
}

/// Eight windows of two classes: sinusoids at 1 Hz and 4 Hz with random
/// phase and a little noise.
pub fn fixture_windows(len: usize, seed: u64) -> (Vec<LabeledWindow>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut windows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..8 {
        let class = i % 2;
        let freq = if class == 0 { 1.0 } else { 4.0 };
        let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let samples = (0..len)
            .map(|t| {
                let s = (2.0 * std::f64::consts::PI * freq * t as f64 / 50.0 + phase).sin();
                [s + rng.random_range(-0.1..0.1), 0.5 * s, 1.0 + rng.random_range(-0.1..0.1)]
            })
            .collect();
        windows.push(LabeledWindow {
            subject_id: format!("s{i}"),
            label: class.to_string(),
            window_id: i as u64,
            samples,
            rate: 50.0,
        });
        labels.push(class);
    }
    (windows, labels)
}
