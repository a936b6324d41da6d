//! Experiment front end for the `mfg-pdi` solvers: run configurations,
//! closed-form reference solutions, and the canned studies behind the
//! `mfgpdi` binary. The binary adds argument parsing and exit-code plumbing;
//! everything it does is callable from here.

pub mod config;
pub mod experiments;
pub mod oracles;

pub use config::{config_hash, fnv1a64, ConfigError, ExperimentConfig, ExperimentKind};
pub use experiments::{
    run, run_ex33, run_prop71, run_prop72, run_rate, BasinRow, Ex33Report, ExperimentError,
    OscillatoryRow, ParityRow, Prop71Report, Prop72Report, RateRunReport, ResidualRow,
};
pub use oracles::{
    constant_drift_density, oracle_ex33, oscillatory_drift_density, oscillatory_h1_gap_limit,
    oscillatory_limit_density, oscillatory_limit_density_deriv,
};
