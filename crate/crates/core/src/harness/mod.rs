//! Seeded multi-run experiments: configuration, execution over budget
//! schedules and `τ` sweeps, statistics, and CSV / plot-data output.

mod config;
mod output;
mod run;
mod stats;

pub use config::{
    Algorithm, ExperimentConfig, FqiSettings, NoiseSetting, CONFIG_KEYS, DEFAULT_EXPERIMENT_HORIZON, DEFAULT_RUNS,
    DEFAULT_SOURCE_CAP,
};
pub use output::{
    aggregate_csv, emit_csv, emit_plot_data, fmt_real, iterations_csv, parse_csv, performance_plot_data, read_csv,
    results_csv, weights_plot_data, AGGREGATE_FILE, ITERATIONS_FILE, PERFORMANCE_PLOT_FILE, RESULTS_FILE,
    WEIGHTS_PLOT_FILE,
};
pub use run::{
    child_seed, run_experiment, run_experiment_with, sweep_tau, AggregateRow, IterationRecord, ResultTable, RunRecord,
};
pub use stats::{mean, sample_std, sign_test, SignTest};

use sha2::{Digest, Sha256};

/// Hex SHA-256 of the canonical TOML form of `cfg`.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_toml().as_bytes()))
}
