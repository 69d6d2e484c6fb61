use har_core::datasets::{load_canonical, window_stream, write_canonical};
use har_core::synth::{generate_population, PopulationSpec};
use proptest::prelude::*;

#[test]
fn canonical_round_trip_is_bit_identical() {
    let spec = PopulationSpec {
        n_subjects: 5,
        windows_per_class: 3,
        ..PopulationSpec::two_cluster(8)
    };
    let bundle = generate_population(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_canonical(&bundle, dir.path()).unwrap();
    let back = load_canonical(&dir.path().join("windows.csv"), &dir.path().join("subjects.csv"))
        .unwrap()
        .with_name("synth");
    assert_eq!(back, bundle);
    for (a, b) in back.windows().iter().zip(bundle.windows()) {
        for (x, y) in a.samples.iter().zip(&b.samples) {
            for k in 0..3 {
                assert_eq!(x[k].to_bits(), y[k].to_bits());
            }
        }
    }

    let again = tempfile::tempdir().unwrap();
    write_canonical(&back, again.path()).unwrap();
    for file in ["windows.csv", "subjects.csv"] {
        assert_eq!(
            std::fs::read(dir.path().join(file)).unwrap(),
            std::fs::read(again.path().join(file)).unwrap()
        );
    }
}

proptest! {
    #[test]
    fn window_positions_match_enumeration(n in 0usize..400, length_s in 0.2f64..4.0, overlap in 0.0f64..0.95) {
        let rate = 50.0;
        let recording: Vec<[f64; 3]> = (0..n).map(|i| [i as f64, 0.0, 0.0]).collect();
        let windows = window_stream(&recording, rate, length_s, overlap).unwrap();
        let w = (length_s * rate).round() as usize;
        let stride = ((length_s * rate * (1.0 - overlap)).round() as usize).max(1);
        let mut starts = Vec::new();
        let mut s = 0;
        while w > 0 && s + w <= n {
            starts.push(s);
            s += stride;
        }
        prop_assert_eq!(windows.len(), starts.len());
        for (win, start) in windows.iter().zip(starts) {
            prop_assert_eq!(win.len(), w);
            prop_assert_eq!(win[0][0], start as f64);
        }
    }
}
