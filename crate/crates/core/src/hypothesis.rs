//! Multi-target hypothesis testing over a discrete angular grid.
//!
//! A hypothesis is a set of grid cells holding one target each; the null
//! hypothesis is the empty set. Hypotheses are ordered by cardinality and
//! then lexicographically, so index 0 is always the null hypothesis.

use std::f64::consts::TAU;
use std::fmt;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::numerics::CVector;
use crate::signal::{
    compose_signal, grid_signals, noise_covariance, AmplitudeVector, MeasurementContext, NoiseCovariance, Waveform,
};
use crate::surface::Direction;

/// Tolerance on the probability simplex.
const SIMPLEX_TOL: f64 = 1e-12;

/// Discretized region of interest.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularGrid {
    directions: Vec<Direction>,
}

impl AngularGrid {
    pub fn new(directions: Vec<Direction>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::InvalidParameter("angular grid is empty".into()));
        }
        for (i, a) in directions.iter().enumerate() {
            if directions[..i].contains(a) {
                return Err(Error::InvalidParameter("angular grid directions must be distinct".into()));
            }
        }
        Ok(Self { directions })
    }

    /// `count` equal azimuth sectors of `[0, 2π)`, one cell at each sector
    /// center, all at the same polar angle.
    pub fn azimuth_partition(count: usize, polar: f64) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidParameter("grid needs at least one cell".into()));
        }
        let width = TAU / count as f64;
        let directions =
            (0..count).map(|j| Direction::new((j as f64 + 0.5) * width, polar)).collect::<Result<Vec<_>>>()?;
        Self::new(directions)
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

/// Grid cells (0-based, strictly increasing) occupied under one hypothesis.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Hypothesis {
    grid_indices: Vec<usize>,
}

/// Serialized in its 1-based display form, e.g. `"{1,3}"`.
impl serde::Serialize for Hypothesis {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl Hypothesis {
    /// Sorts and deduplicates-checks the indices.
    pub fn new(mut grid_indices: Vec<usize>) -> Result<Self> {
        grid_indices.sort_unstable();
        if grid_indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("hypothesis places two targets in one grid cell".into()));
        }
        Ok(Self { grid_indices })
    }

    pub fn null() -> Self {
        Self::default()
    }

    pub fn grid_indices(&self) -> &[usize] {
        &self.grid_indices
    }

    /// Number of targets.
    pub fn cardinality(&self) -> usize {
        self.grid_indices.len()
    }
}

impl fmt::Display for Hypothesis {
    /// 1-based grid numbers, e.g. `{1,3}`; the null hypothesis prints as `{}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.grid_indices.iter().map(|j| j + 1).join(","))
    }
}

/// All hypotheses with their current probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisSpace {
    hypotheses: Vec<Hypothesis>,
    probs: Vec<f64>,
}

impl HypothesisSpace {
    /// Pairs hypotheses with probabilities; the probabilities must lie on the
    /// simplex.
    pub fn new(hypotheses: Vec<Hypothesis>, probs: Vec<f64>) -> Result<Self> {
        if hypotheses.len() != probs.len() || hypotheses.is_empty() {
            return Err(Error::dims("hypothesis space", hypotheses.len(), probs.len()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidParameter("probabilities must be non-negative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { hypotheses, probs })
    }

    pub fn hypotheses(&self) -> &[Hypothesis] {
        &self.hypotheses
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn index_of(&self, hyp: &Hypothesis) -> Option<usize> {
        self.hypotheses.iter().position(|h| h == hyp)
    }

    /// Index of the most probable hypothesis (lowest index on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    /// Same hypotheses with replacement probabilities.
    pub fn with_probs(&self, probs: Vec<f64>) -> Result<Self> {
        Self::new(self.hypotheses.clone(), probs)
    }
}

/// Every placement of at most `max_targets` targets on `grid_count` cells,
/// with first-cycle priors `1 / ((K_m + 1) · N_k)` where `N_k` counts the
/// hypotheses holding `k` targets.
pub fn enumerate_hypotheses(grid_count: usize, max_targets: usize) -> Result<HypothesisSpace> {
    if max_targets == 0 || max_targets > grid_count {
        return Err(Error::InvalidParameter(format!("need 1 ≤ K_m ≤ J (got K_m = {max_targets}, J = {grid_count})")));
    }
    let mut hypotheses = Vec::new();
    let mut probs = Vec::new();
    for k in 0..=max_targets {
        let level: Vec<Hypothesis> = (0..grid_count).combinations(k).map(|c| Hypothesis { grid_indices: c }).collect();
        let p = 1.0 / ((max_targets + 1) as f64 * level.len() as f64);
        probs.extend(std::iter::repeat_n(p, level.len()));
        hypotheses.extend(level);
    }
    HypothesisSpace::new(hypotheses, probs)
}

/// Binomial coefficient, used to size hypothesis spaces.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Gaussian log-likelihood of `y` under `hyp`, up to a constant shared by
/// all hypotheses: `−(y − u)^H Σ^{-1} (y − u)`.
///
/// This is the circular complex Gaussian exponent; the normalizer depends only
/// on `Σ` and cancels in the posterior update.
pub fn log_likelihood(
    y: &CVector,
    hyp: &Hypothesis,
    x: &Waveform,
    psi_t: &AmplitudeVector,
    psi_r: &AmplitudeVector,
    ctx: &MeasurementContext,
) -> Result<f64> {
    let cov = noise_covariance(psi_r, &ctx.rx().propagation, ctx.noise_power(), ctx.snapshots())?;
    let grid = grid_signals(x, psi_t, psi_r, ctx)?;
    for &j in hyp.grid_indices() {
        ctx.check_grid(j)?;
    }
    let u = compose_signal(&grid, hyp, cov.dim())?;
    gaussian_log_likelihood(y, &u, &cov)
}

/// `−(y − u)^H Σ^{-1} (y − u)` for a diagonal-block covariance.
pub fn gaussian_log_likelihood(y: &CVector, u: &CVector, cov: &NoiseCovariance) -> Result<f64> {
    if y.len() != u.len() {
        return Err(Error::dims("log-likelihood", u.len(), y.len()));
    }
    Ok(-cov.inverse_quadratic(&(y - u))?)
}

/// Log-likelihoods of every hypothesis in `space` given per-grid signals.
pub fn log_likelihoods(
    y: &CVector,
    space: &HypothesisSpace,
    grid: &[CVector],
    cov: &NoiseCovariance,
) -> Result<Vec<f64>> {
    space
        .hypotheses()
        .iter()
        .map(|h| {
            let u = compose_signal(grid, h, cov.dim())?;
            gaussian_log_likelihood(y, &u, cov)
        })
        .collect()
}

/// Bayes update `p'_j ∝ p_j exp(ℓ_j)`, evaluated in the log domain.
pub fn posterior_update(space: &HypothesisSpace, loglikes: &[f64]) -> Result<HypothesisSpace> {
    if loglikes.len() != space.len() {
        return Err(Error::dims("posterior update", space.len(), loglikes.len()));
    }
    if loglikes.iter().any(|l| !l.is_finite()) {
        return Err(Error::Numerical("non-finite log-likelihood".into()));
    }
    let log_post: Vec<f64> =
        space.probs.iter().zip(loglikes).map(|(&p, &l)| if p > 0.0 { p.ln() + l } else { f64::NEG_INFINITY }).collect();
    let max = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Numerical("posterior mass vanished".into()));
    }
    let unnorm: Vec<f64> = log_post.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = unnorm.iter().sum();
    let probs = unnorm.into_iter().map(|v| v / total).collect();
    space.with_probs(probs)
}

/// Stop-rule outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Accept the hypothesis at this index.
    Accept(usize),
    Continue,
}

/// Accept the most probable hypothesis when its probability reaches
/// `accept` and every other hypothesis is at or below `reject`.
pub fn check_termination(space: &HypothesisSpace, accept: f64, reject: f64) -> Termination {
    let best = space.argmax();
    if space.probs[best] < accept {
        return Termination::Continue;
    }
    let others_low = space.probs.iter().enumerate().all(|(i, &p)| i == best || p <= reject);
    if others_low {
        Termination::Accept(best)
    } else {
        Termination::Continue
    }
}

/// True when `probs` are non-negative and sum to one within 1e-12.
pub fn on_simplex(probs: &[f64]) -> bool {
    probs.iter().all(|&p| p >= 0.0) && (probs.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL
}
