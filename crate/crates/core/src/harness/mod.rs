//! Adaptive detection loop, Monte Carlo estimation and parameter sweeps.

pub mod config;
pub mod detection;
pub mod montecarlo;
pub mod sweep;

pub use config::{Antenna, ExperimentConfig, SolverTuning, SweepAxis, SweepSpec};
pub use detection::{
    run_detection, run_detection_logged, run_detection_with, CycleLog, DetectionModel, DetectionSetup, DetectionState,
    PaRadar, Radar, RhsRadar, TrialResult,
};
pub use montecarlo::{monte_carlo_pd, run_trials, trial_rng, wilson_interval, PdEstimate, Z_95};
pub use sweep::{configs_for, run_sweep, run_sweep_spec, SweepRow, SweepTable, CSV_HEADER};
