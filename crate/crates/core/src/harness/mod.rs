//! Simulation driver: configuration, per-trial recursion, Monte Carlo
//! aggregation and file output.

mod config;
mod monte_carlo;
mod output;
mod trial;

pub use config::{FilterMode, RunConfig};
pub use monte_carlo::{
    aggregate, run_comparison, run_monte_carlo, window_mean, with_workers, MonteCarlo,
    ScanAggregate, Summary,
};
pub use output::{
    aggregate_rows, emit_comparison, emit_outputs, fmt_sig9, read_csv, round_sig9, trial_rows,
    write_csv, AggregateRow, ComparisonRow, CostRow, StateRow, TrialRow,
};
pub use trial::{
    run_trial, run_trial_with_truth, simulate_measurements, stream_rng, trial_seed, ScanRecord,
    Stream, Track, TrialRecord,
};
