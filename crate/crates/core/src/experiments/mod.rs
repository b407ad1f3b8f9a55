//! Seeded, config-driven pipelines. Each run writes its resolved config and a
//! set of CSV tables into an output directory.

mod config;
mod mnist;
mod output;
mod radius;
mod suite;
mod synth;

pub use config::{ExperimentConfig, ExperimentKind, MnistConfig, RadiusConfig, SynthConfig, TheoryConfig, PRESETS};
pub use mnist::{mnist_dir, run_mnist, MnistReport, MnistRun};
pub use output::{read_csv, CsvTable, Output};
pub use radius::{crossover, run_critical_radius, Bracket, Crossover, RadiusReport};
pub use suite::{run_theory_suite, Check, SuiteReport, ALIGNMENT_FIELD_GROUP};
pub use synth::{
    reference_for, reference_scale, run_conjecture_validate, synth_data, MainRun, RobustPoint, SynthReport, TrainedRun,
};
