//! Batch experiments: config files, solve/sweep/bounds runs, CSV output.

mod config;
mod run;

pub use config::{
    AtomSpec, BoxSpec, CoefficientSpec, Experiment, ExperimentConfig, NetworkSpec, PolicyChoice,
    PolicySpec, PriorSpec, SweepRange, TollMode,
};
pub use run::{
    run_bounds, run_solve, run_sweep, write_sweep_csv, BoundsReport, SolveReport, SweepOutcome,
    SweepRow, SWEEP_COLUMNS,
};
