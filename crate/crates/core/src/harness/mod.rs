//! Config-driven experiment runner and its CSV reports.

pub mod config;
pub mod report;
pub mod runners;

pub use config::{Experiment, ExperimentConfig, FilterKind, Sweep};
pub use report::{emit_csv, Cell, ExperimentReport, Table};
pub use runners::{run, run_bench1d, run_fit_demo, run_mcl};
