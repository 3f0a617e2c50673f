//! Experiment configuration, drivers and result tables.
//!
//! Every experiment is a pure function of its [`ExperimentConfig`]. Trials run
//! in parallel, each on its own random stream, and results are folded in trial
//! order so the emitted numbers do not depend on scheduling.

mod config;
pub mod data;
mod experiments;
mod table;

pub use config::{linear_grid, log_grid, ExperimentConfig, ExperimentKind, RatioAggregation};
pub use experiments::{
    game_config, housing_trajectory, run_cells_experiment, run_experiment, run_housing_experiment, run_rhs_sweep,
    run_sampling_ratio_sweep, run_synthetic_error_sweep,
};
pub use table::{emit, Cell, Format, ResultTable, CODE_VERSION};
