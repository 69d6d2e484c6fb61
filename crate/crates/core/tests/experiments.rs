mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use har_core::adaboost::PriorWeights;
use har_core::convnet::NetConfig;
use har_core::experiments::*;
use har_core::similarity::{GammaMode, GammaUsed, SimilarityKind, SimilarityMatrix};
use rand::Rng;

fn fast_engine() -> EngineConfig {
    EngineConfig {
        net: NetConfig {
            epochs: 2,
            ..NetConfig::tiny(0)
        },
        ..EngineConfig::default()
    }
}

#[test]
fn random_splits_partition_without_leakage() {
    let mut rng = rng(21);
    for _ in 0..300 {
        random_split_trial(&mut rng).unwrap();
    }
}

#[test]
fn all_ones_similarity_gives_uniform_priors() {
    let bundle = small_population(1);
    let ctx = ExperimentContext::new(&bundle, GammaMode::MedianHeuristic).unwrap();
    let ids: Vec<String> = bundle.subject_ids().iter().map(|s| s.to_string()).collect();
    let n = ids.len();
    let ones = SimilarityMatrix::from_values(ids, vec![1.0; n * n], SimilarityKind::Physical, GammaUsed::default()).unwrap();
    for spec in [SplitSpec::si("s03"), SplitSpec::hyb("s03", 0.5, 9)] {
        let split = make_split(&bundle, &spec).unwrap();
        let raw = ctx.pml_raw_weights(&split, &ones).unwrap();
        assert_eq!(PriorWeights::from_raw(&raw).unwrap(), PriorWeights::uniform(split.train.len()));
        assert_eq!(
            ctx.boost_correct(&split, &raw, &Default::default()).unwrap(),
            ctx.boost_correct(&split, &vec![1.0; raw.len()], &Default::default()).unwrap()
        );
    }
}

#[test]
fn pml_priors_follow_similarity_order() {
    let bundle = small_population(2);
    let ctx = ExperimentContext::new(&bundle, GammaMode::MedianHeuristic).unwrap();
    for kind in SimilarityKind::ALL {
        let matrix = ctx.matrix(kind).unwrap();
        for test in bundle.subject_ids() {
            for spec in [SplitSpec::si(test), SplitSpec::hyb(test, 0.25, 3)] {
                let split = make_split(&bundle, &spec).unwrap();
                let raw = ctx.pml_raw_weights(&split, matrix).unwrap();
                let priors = PriorWeights::from_raw(&raw).unwrap();
                assert!(priors.as_slice().iter().all(|w| *w > 0.0));
                assert!((priors.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let sim = |k: usize| {
                    let i = split.train[k];
                    if split.is_donated(i) {
                        1.0
                    } else {
                        matrix.between(&bundle.windows()[i].subject_id, test).unwrap()
                    }
                };
                for a in 0..raw.len() {
                    for b in 0..raw.len() {
                        if sim(a) > sim(b) {
                            assert!(raw[a] >= raw[b]);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn pdl_at_max_trains_on_the_dl_windows() {
    let bundle = small_population(3);
    let engine = fast_engine();
    let ctx = ExperimentContext::new(&bundle, engine.gamma_mode).unwrap();
    let matrix = ctx.matrix(SimilarityKind::Sensor).unwrap();
    for test in ["s01", "s08"] {
        let split = make_si_split(&bundle, test).unwrap();
        let all = ctx.net_training_windows(&split, None).unwrap();
        let top = ctx.net_training_windows(&split, Some((matrix, bundle.subjects().len() - 1))).unwrap();
        let multiset = |v: &[usize]| {
            let mut v: Vec<&har_core::datasets::LabeledWindow> = v.iter().map(|&i| &bundle.windows()[i]).collect();
            v.sort_by(|a, b| (&a.subject_id, a.window_id).cmp(&(&b.subject_id, b.window_id)));
            v
        };
        assert_eq!(multiset(&top), multiset(&all));

        let pdl = ctx.run(Method::Pdl, Some(SimilarityKind::Sensor), &SplitSpec::si(test), &engine).unwrap();
        let dl = ctx.run(Method::Dl, None, &SplitSpec::si(test), &engine).unwrap();
        let at_max = pdl.iter().find(|r| r.m == Some(11)).unwrap();
        assert_eq!(pdl.iter().map(|r| r.m.unwrap()).collect::<Vec<_>>(), vec![10, 11]);
        assert_eq!(at_max.accuracy, dl[0].accuracy);
    }
}

#[test]
fn pdl_selects_the_most_similar_subjects() {
    let bundle = small_population(4);
    let ctx = ExperimentContext::new(&bundle, GammaMode::MedianHeuristic).unwrap();
    let matrix = ctx.matrix(SimilarityKind::Physical).unwrap();
    let split = make_hyb_split(&bundle, "s05", 0.5, 1).unwrap();
    let chosen = har_core::similarity::top_m_similar(matrix, "s05", 4).unwrap();
    let train = ctx.net_training_windows(&split, Some((matrix, 4))).unwrap();
    for &i in &train {
        let w = &bundle.windows()[i];
        assert!(split.is_donated(i) || chosen.contains(&w.subject_id));
    }
    let subjects: BTreeSet<&str> = train.iter().map(|&i| bundle.windows()[i].subject_id.as_str()).collect();
    assert_eq!(subjects.len(), 5);
    assert!(split.donated.iter().all(|d| train.contains(d)));
}

#[test]
fn run_results_are_well_formed() {
    let bundle = small_population(5);
    let engine = fast_engine();
    let spec = plan_split_spec(&engine, SplitMode::Hyb, "s02");
    let pml = run_experiment(&bundle, Method::Pml, Some(SimilarityKind::PhysicalSensor), &spec, &engine).unwrap();
    assert_eq!(pml.len(), 1);
    let r = &pml[0];
    assert_eq!((r.dataset.as_str(), r.method, r.split, r.m), ("synth", Method::Pml, SplitMode::Hyb, None));
    // 4 windows per class, floor(0.2 * 4) = 0 raised to 1
    assert_eq!(r.n_test, 4 * 3);
    assert!((0.0..=1.0).contains(&r.accuracy));
    assert!(run_experiment(&bundle, Method::Pml, None, &spec, &engine).is_err());
    assert!(run_experiment(&bundle, Method::Dl, None, &SplitSpec::si("s99"), &engine).is_err());
}

#[test]
fn run_plan_is_deterministic() {
    let bundle = small_population(6);
    let engine = EngineConfig {
        master_seed: 17,
        ..fast_engine()
    };
    let ctx = ExperimentContext::new(&bundle, engine.gamma_mode).unwrap();
    let plan = |ctx: &ExperimentContext| {
        ctx.run_plan(&[Method::Pml, Method::Dl], &[SimilarityKind::Physical], &SplitMode::ALL, &engine)
            .unwrap()
    };
    let a = plan(&ctx);
    assert_eq!(a, plan(&ctx));
    assert_eq!(a.len(), 12 * 2 * 2);
    assert_eq!(a[0].subject_id, "s01");
    assert_eq!(a.last().unwrap().subject_id, "s12");
}

/// Spreadsheet-style recomputation: distinct keys by linear scan, then a
/// mean per subject and a mean over subjects.
fn naive_macro(results: &[RunResult], fields: &[GroupField]) -> Vec<(Vec<String>, f64)> {
    let key = |r: &RunResult| fields.iter().map(|&f| r.key(f)).collect::<Vec<String>>();
    let mut keys: Vec<Vec<String>> = Vec::new();
    for r in results {
        if !keys.contains(&key(r)) {
            keys.push(key(r));
        }
    }
    keys.sort();
    keys.into_iter()
        .map(|k| {
            let rows: Vec<&RunResult> = results.iter().filter(|r| key(r) == k).collect();
            let mut subjects: Vec<&str> = rows.iter().map(|r| r.subject_id.as_str()).collect();
            subjects.sort();
            subjects.dedup();
            let mut total = 0.0;
            for s in &subjects {
                let accs: Vec<f64> = rows.iter().filter(|r| r.subject_id == *s).map(|r| r.accuracy).collect();
                total += accs.iter().sum::<f64>() / accs.len() as f64;
            }
            (k, total / subjects.len() as f64)
        })
        .collect()
}

#[test]
fn macro_accuracy_matches_naive_grouping() {
    let mut rng = rng(22);
    let all = [GroupField::Dataset, GroupField::Method, GroupField::SimKind, GroupField::Split, GroupField::M];
    for _ in 0..100 {
        let results: Vec<RunResult> = (0..rng.random_range(1..80))
            .map(|_| {
                let method = Method::ALL[rng.random_range(0..3)];
                RunResult {
                    dataset: ["d1", "d2"][rng.random_range(0..2)].to_string(),
                    method,
                    sim_kind: method.uses_similarity().then(|| SimilarityKind::ALL[rng.random_range(0..3)]),
                    split: SplitMode::ALL[rng.random_range(0..2)],
                    subject_id: format!("s{}", rng.random_range(0..6)),
                    m: (method == Method::Pdl).then(|| 10 + 5 * rng.random_range(0..3)),
                    n_test: 10,
                    accuracy: rng.random_range(0.0..=1.0),
                }
            })
            .collect();
        let fields: Vec<GroupField> = all.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
        let got = macro_accuracy(&results, &fields).unwrap();
        let expected = naive_macro(&results, &fields);
        assert_eq!(got.len(), expected.len());
        for (row, (key, acc)) in got.iter().zip(&expected) {
            assert_eq!(&row.key, key);
            assert!((row.accuracy - acc).abs() < 1e-12);
        }
    }
}

#[test]
fn results_csv_round_trips_through_files() {
    let bundle = small_population(7);
    let engine = fast_engine();
    let ctx = ExperimentContext::new(&bundle, engine.gamma_mode).unwrap();
    let results = ctx
        .run_plan(&[Method::Pml], &SimilarityKind::ALL, &[SplitMode::Si], &engine)
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.csv");
    save_results(&results, &path).unwrap();
    assert_eq!(load_results(&path).unwrap(), results);

    let by_kind: BTreeMap<String, f64> = macro_accuracy(&results, &[GroupField::SimKind])
        .unwrap()
        .into_iter()
        .map(|r| (r.key[0].clone(), r.accuracy))
        .collect();
    assert_eq!(by_kind.len(), 3);
}
