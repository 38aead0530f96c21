//! Experiment orchestration: JSON configs, seeded suites of runs over
//! generated games, sweeps, and CSV reports.
//!
//! Seeds are split from one master seed: game `g` uses
//! `derive_seed(master, [GAME, g])` and run `(g, k)` uses
//! `derive_seed(master, [RUN, g, k])`, so every (game, seed) cell has its
//! own streams regardless of scheduling.

mod aggregate;
mod config;
mod run;

pub use aggregate::{
    aggregate, mean_std, report, AggregateReport, ComparisonRow, ComparisonTable, ExcludedRun,
    AGGREGATE_CSV_HEADER,
};
pub use config::{merge_json, EnvSpec, Environment, ExperimentConfig, LearnerSpec, SWEEPABLE};
pub use run::{
    run_experiment, run_experiment_in_memory, run_single, sweep, sweep_in_memory, write_report,
    write_sweep_csv, SweepPoint, SWEEP_CSV_HEADER,
};
