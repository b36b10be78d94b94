//! Benchmark fixtures.

use ictlab_core::trainer::{Experiment, Method, TrainConfig};

/// A default-sized experiment ready to step.
pub fn experiment(method: Method, k: usize) -> Experiment {
    Experiment::new(TrainConfig {
        method,
        k,
        ..TrainConfig::default()
    })
    .expect("default config is valid")
}
