//! The adaptive detection loop: optimize, transmit and receive, update the
//! posterior, and stop once one hypothesis dominates.

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use super::config::{Antenna, ExperimentConfig};
use crate::baseline::{
    pa_effective_signal, pa_initial, pa_noise_covariance, pa_objective, pa_optimize, pa_simulate, PhasedArrayContext,
    PhasedArrayModel,
};
use crate::error::Result;
use crate::hypothesis::{
    check_termination, enumerate_hypotheses, gaussian_log_likelihood, log_likelihoods, posterior_update, Hypothesis,
    HypothesisSpace, Termination,
};
use crate::numerics::CVector;
use crate::signal::{grid_signals, noise_covariance, simulate_measurement, MeasurementContext, Scene};
use crate::waoa::{initial_variables, waoa, OptimizationVariables, SolverConfig};

/// A radar that can be optimized for, and measure, a hypothesis space.
pub trait DetectionModel: Sync {
    type Variables: Clone + std::fmt::Debug;

    fn initial<R: Rng + ?Sized>(&self, rng: &mut R, space: &HypothesisSpace) -> Result<Self::Variables>;

    /// Improves `vars` for the weights held by `space`; returns the new
    /// variables and the objective trace.
    fn optimize(&self, space: &HypothesisSpace, vars: &Self::Variables) -> Result<(Self::Variables, Vec<f64>)>;

    fn objective(&self, space: &HypothesisSpace, vars: &Self::Variables) -> Result<f64>;

    fn measure<R: Rng + ?Sized>(&self, vars: &Self::Variables, scene: &Scene, rng: &mut R) -> Result<CVector>;

    fn log_likelihoods(&self, y: &CVector, vars: &Self::Variables, space: &HypothesisSpace) -> Result<Vec<f64>>;
}

/// Holographic-surface radar.
#[derive(Debug, Clone)]
pub struct RhsRadar {
    pub ctx: MeasurementContext,
    pub solver: SolverConfig,
}

impl DetectionModel for RhsRadar {
    type Variables = OptimizationVariables;

    fn initial<R: Rng + ?Sized>(&self, rng: &mut R, space: &HypothesisSpace) -> Result<Self::Variables> {
        initial_variables(rng, space, &self.ctx, &self.solver)
    }

    fn optimize(&self, space: &HypothesisSpace, vars: &Self::Variables) -> Result<(Self::Variables, Vec<f64>)> {
        let out = waoa(space, &self.ctx, &self.solver, vars)?;
        Ok((out.variables, out.trace))
    }

    fn objective(&self, space: &HypothesisSpace, vars: &Self::Variables) -> Result<f64> {
        crate::objective::weighted_objective(space, &vars.waveform, &vars.psi_t, &vars.psi_r, &self.ctx)
    }

    fn measure<R: Rng + ?Sized>(&self, vars: &Self::Variables, scene: &Scene, rng: &mut R) -> Result<CVector> {
        simulate_measurement(scene, &vars.waveform, &vars.psi_t, &vars.psi_r, &self.ctx, rng)
    }

    fn log_likelihoods(&self, y: &CVector, vars: &Self::Variables, space: &HypothesisSpace) -> Result<Vec<f64>> {
        let cov =
            noise_covariance(&vars.psi_r, &self.ctx.rx().propagation, self.ctx.noise_power(), self.ctx.snapshots())?;
        let grid = grid_signals(&vars.waveform, &vars.psi_t, &vars.psi_r, &self.ctx)?;
        log_likelihoods(y, space, &grid, &cov)
    }
}

/// Phased-array baseline radar.
#[derive(Debug, Clone)]
pub struct PaRadar {
    pub ctx: PhasedArrayContext,
    pub solver: SolverConfig,
}

impl DetectionModel for PaRadar {
    type Variables = PhasedArrayModel;

    fn initial<R: Rng + ?Sized>(&self, rng: &mut R, space: &HypothesisSpace) -> Result<Self::Variables> {
        pa_initial(rng, space, &self.ctx, &self.solver)
    }

    fn optimize(&self, space: &HypothesisSpace, vars: &Self::Variables) -> Result<(Self::Variables, Vec<f64>)> {
        let out = pa_optimize(space, &self.ctx, &self.solver, vars)?;
        Ok((out.model, out.trace))
    }

    fn objective(&self, space: &HypothesisSpace, vars: &Self::Variables) -> Result<f64> {
        pa_objective(space, vars, &self.ctx)
    }

    fn measure<R: Rng + ?Sized>(&self, vars: &Self::Variables, scene: &Scene, rng: &mut R) -> Result<CVector> {
        let gain = self.ctx.feed_gain();
        pa_simulate(scene, &vars.waveform, &vars.weights_t(gain), &vars.weights_r(gain), &self.ctx, rng)
    }

    fn log_likelihoods(&self, y: &CVector, vars: &Self::Variables, space: &HypothesisSpace) -> Result<Vec<f64>> {
        let gain = self.ctx.feed_gain();
        let (w_t, w_r) = (vars.weights_t(gain), vars.weights_r(gain));
        let cov = pa_noise_covariance(&w_r, &self.ctx)?;
        space
            .hypotheses()
            .iter()
            .map(|h| {
                let u = pa_effective_signal(h, &vars.waveform, &w_t, &w_r, &self.ctx)?;
                gaussian_log_likelihood(y, &u, &cov)
            })
            .collect()
    }
}

/// Snapshot of the loop after a cycle's posterior update.
#[derive(Debug, Clone)]
pub struct DetectionState<V> {
    /// 1-based cycle index.
    pub cycle: usize,
    pub space: HypothesisSpace,
    pub variables: V,
    pub measurement: CVector,
    /// Objective trace of this cycle's optimization (single entry when the
    /// variables were not optimized).
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub accepted: Hypothesis,
    pub truth: Hypothesis,
    pub cycles: usize,
    pub correct: bool,
    /// Posterior of the true hypothesis after each cycle.
    pub true_posterior: Vec<f64>,
}

/// Loop parameters shared by every trial of an experiment.
#[derive(Debug, Clone)]
pub struct DetectionSetup {
    pub prior: HypothesisSpace,
    pub scene: Scene,
    pub truth: Hypothesis,
    pub max_cycles: usize,
    pub accept: f64,
    pub reject: f64,
}

impl DetectionSetup {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            prior: enumerate_hypotheses(cfg.grids, cfg.max_targets)?,
            scene: cfg.true_scene(&cfg.grid()?)?,
            truth: cfg.true_hypothesis()?,
            max_cycles: cfg.cycles,
            accept: cfg.accept_threshold,
            reject: cfg.reject_threshold,
        })
    }
}

/// Runs one detection, calling `observe` after every cycle.
pub fn run_detection_with<M, R, F>(
    model: &M,
    setup: &DetectionSetup,
    rng: &mut R,
    mut observe: F,
) -> Result<TrialResult>
where
    M: DetectionModel,
    R: Rng + ?Sized,
    F: FnMut(&DetectionState<M::Variables>),
{
    let mut space = setup.prior.clone();
    let mut vars = model.initial(rng, &space)?;
    let mut true_posterior = Vec::with_capacity(setup.max_cycles);
    let truth_index = space.index_of(&setup.truth);
    let mut accepted = None;
    let mut cycle = 0;
    while cycle < setup.max_cycles {
        cycle += 1;
        let trace = if cycle == 1 {
            vec![model.objective(&space, &vars)?]
        } else {
            let (next, trace) = model.optimize(&space, &vars)?;
            vars = next;
            trace
        };
        let y = model.measure(&vars, &setup.scene, rng)?;
        let ll = model.log_likelihoods(&y, &vars, &space)?;
        space = posterior_update(&space, &ll)?;
        true_posterior.push(truth_index.map_or(0.0, |i| space.probs()[i]));
        observe(&DetectionState {
            cycle,
            space: space.clone(),
            variables: vars.clone(),
            measurement: y,
            objective_trace: trace,
        });
        if let Termination::Accept(i) = check_termination(&space, setup.accept, setup.reject) {
            accepted = Some(i);
            break;
        }
    }
    let accepted = space.hypotheses()[accepted.unwrap_or_else(|| space.argmax())].clone();
    Ok(TrialResult {
        correct: accepted == setup.truth,
        accepted,
        truth: setup.truth.clone(),
        cycles: cycle,
        true_posterior,
    })
}

/// Either radar, chosen by the configuration.
#[derive(Debug, Clone)]
pub enum Radar {
    Rhs(RhsRadar),
    Pa(PaRadar),
}

impl Radar {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let solver = cfg.solver_config();
        Ok(match cfg.antenna {
            Antenna::Rhs => Radar::Rhs(RhsRadar { ctx: cfg.rhs_context()?, solver }),
            Antenna::Pa => Radar::Pa(PaRadar { ctx: cfg.pa_context()?, solver }),
        })
    }

    pub fn run<R: Rng + ?Sized>(&self, setup: &DetectionSetup, rng: &mut R) -> Result<TrialResult> {
        match self {
            Radar::Rhs(m) => run_detection_with(m, setup, rng, |_| {}),
            Radar::Pa(m) => run_detection_with(m, setup, rng, |_| {}),
        }
    }
}

/// Single detection trial for `cfg`.
pub fn run_detection<R: Rng + ?Sized>(cfg: &ExperimentConfig, rng: &mut R) -> Result<TrialResult> {
    let setup = DetectionSetup::from_config(cfg)?;
    Radar::from_config(cfg)?.run(&setup, rng)
}

/// Per-cycle summary used by the verbose `detect` log.
#[derive(Debug, Clone, Serialize)]
pub struct CycleLog {
    pub cycle: usize,
    pub map_hypothesis: String,
    pub map_probability: f64,
    pub objective: f64,
    pub optimizer_iterations: usize,
    pub measurement_energy: f64,
}

impl CycleLog {
    pub fn from_state<V>(state: &DetectionState<V>) -> Self {
        let best = state.space.argmax();
        Self {
            cycle: state.cycle,
            map_hypothesis: state.space.hypotheses()[best].to_string(),
            map_probability: state.space.probs()[best],
            objective: state.objective_trace.last().copied().unwrap_or(0.0),
            optimizer_iterations: state.objective_trace.len().saturating_sub(1),
            measurement_energy: state.measurement.iter().map(Complex64::norm_sqr).sum(),
        }
    }
}

/// Single verbose trial: the result plus one log entry per cycle.
pub fn run_detection_logged<R: Rng + ?Sized>(
    cfg: &ExperimentConfig,
    rng: &mut R,
) -> Result<(TrialResult, Vec<CycleLog>)> {
    let setup = DetectionSetup::from_config(cfg)?;
    let mut logs = Vec::new();
    let result = match Radar::from_config(cfg)? {
        Radar::Rhs(m) => run_detection_with(&m, &setup, rng, |s| logs.push(CycleLog::from_state(s)))?,
        Radar::Pa(m) => run_detection_with(&m, &setup, rng, |s| logs.push(CycleLog::from_state(s)))?,
    };
    Ok((result, logs))
}
