//! Configuration, datasets, the generation loop and run reports.

pub mod config;
pub mod data;
pub mod experiment;

pub use config::{Algorithm, DatasetSpec, ExperimentConfig};
pub use experiment::{
    compare_runs, run_experiment, write_run, Comparison, RunRecord, Timing, HV_REFERENCE,
};
