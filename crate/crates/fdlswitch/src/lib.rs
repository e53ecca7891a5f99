//! Experiment harness for the two-stage shared-FDL switch simulator.
//!
//! Adds what the `no_std` core leaves out: the key-value experiment config,
//! CSV datasets, traffic trace and event-log files, and parallel sweeps over
//! load, Aux-I size and seeds.

pub mod config;
pub mod event_log;
pub mod experiment;
pub mod trace;

pub use config::{parse_config, ConfigError, ExperimentSpec, FigurePreset};
pub use experiment::{
    run_experiment, run_points, write_csv, CsvRow, ExperimentError, PointResult, RunOptions,
};
pub use trace::{Trace, TraceError, TraceReplay};
