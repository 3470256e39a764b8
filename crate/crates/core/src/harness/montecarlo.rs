//! Monte Carlo estimation of the probability of detection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::detection::{DetectionSetup, Radar, TrialResult};
use crate::error::{Error, Result};

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959964;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdEstimate {
    pub trials: usize,
    pub successes: usize,
    pub pd: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub mean_cycles: f64,
}

impl PdEstimate {
    pub fn from_results(results: &[TrialResult]) -> Self {
        let trials = results.len();
        let successes = results.iter().filter(|r| r.correct).count();
        let (wilson_lo, wilson_hi) = wilson_interval(successes, trials, Z_95);
        let mean_cycles =
            if trials == 0 { 0.0 } else { results.iter().map(|r| r.cycles as f64).sum::<f64>() / trials as f64 };
        Self {
            trials,
            successes,
            pd: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
            wilson_lo,
            wilson_hi,
            mean_cycles,
        }
    }

    /// True when the two intervals do not overlap.
    pub fn separated_from(&self, other: &PdEstimate) -> bool {
        self.wilson_lo > other.wilson_hi || other.wilson_lo > self.wilson_hi
    }

    /// True when `self` is not significantly below `other`.
    pub fn not_below(&self, other: &PdEstimate) -> bool {
        self.wilson_hi >= other.wilson_lo
    }
}

/// Generator of trial `index` under `master_seed`: the master seed picks the
/// key and the trial index picks the stream.
pub fn trial_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Runs `trials` independent detections in parallel; results are returned in
/// trial order regardless of scheduling.
pub fn run_trials(cfg: &ExperimentConfig, trials: usize) -> Result<Vec<TrialResult>> {
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let setup = DetectionSetup::from_config(cfg)?;
    let radar = Radar::from_config(cfg)?;
    (0..trials as u64).into_par_iter().map(|i| radar.run(&setup, &mut trial_rng(cfg.seed, i))).collect()
}

/// Probability of detection with its Wilson 95% interval.
pub fn monte_carlo_pd(cfg: &ExperimentConfig, trials: usize) -> Result<PdEstimate> {
    Ok(PdEstimate::from_results(&run_trials(cfg, trials)?))
}
