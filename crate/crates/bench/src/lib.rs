//! Fixtures shared by the benchmarks.

use har_core::datasets::DatasetBundle;
use har_core::synth::{generate_population, PopulationSpec};

/// The default two-cluster population (12 subjects, 4 classes, 10 windows
/// per class, 150 samples).
pub fn population(seed: u64) -> DatasetBundle {
    generate_population(&PopulationSpec::two_cluster(seed)).expect("valid spec")
}
