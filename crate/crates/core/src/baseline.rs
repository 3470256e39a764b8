//! Phased-array comparison radar.
//!
//! One waveform chain drives every element through a phase shifter with a
//! fixed line gain; the receive side combines elements the same way. Only
//! the phases and the waveform are optimized, against the same weighted
//! relative-entropy objective used for the holographic surfaces.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::{AngularGrid, Hypothesis, HypothesisSpace};
use crate::numerics::{eigh, CMatrix, CVector, RVector};
use crate::objective::{objective_from_signals, WeightTable};
use crate::signal::{NoiseCovariance, Scene};
use crate::surface::{grid_shape, steering_vector, FeedLayout, SurfaceGeometry};
use crate::waoa::{solve_waveform, SolverConfig};

pub const DEFAULT_FEED_GAIN: f64 = 0.9;
pub const DEFAULT_COST_RATIO: f64 = 6.0;

/// Hardware cost in units of one holographic element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub rhs_element_cost: f64,
    pub pa_element_cost: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { rhs_element_cost: 1.0, pa_element_cost: DEFAULT_COST_RATIO }
    }
}

impl CostModel {
    pub fn with_ratio(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidParameter(format!("cost ratio must be positive, got {tau}")));
        }
        Ok(Self { rhs_element_cost: 1.0, pa_element_cost: tau })
    }

    pub fn ratio(&self) -> f64 {
        self.pa_element_cost / self.rhs_element_cost
    }

    pub fn rhs_cost(&self, elements: usize) -> f64 {
        elements as f64 * self.rhs_element_cost
    }

    pub fn pa_cost(&self, elements: usize) -> f64 {
        elements as f64 * self.pa_element_cost
    }

    /// Largest element counts affordable within `budget`, as `(rhs, pa)`.
    pub fn elements_for(&self, budget: f64) -> (usize, usize) {
        let count = |unit: f64| ((budget / unit) + 1e-9).floor().max(0.0) as usize;
        (count(self.rhs_element_cost), count(self.pa_element_cost))
    }
}

/// Geometry, grid and noise of a phased-array radar.
#[derive(Debug, Clone)]
pub struct PhasedArrayContext {
    tx: SurfaceGeometry,
    rx: SurfaceGeometry,
    wavelength: f64,
    feed_gain: f64,
    noise_power: f64,
    snapshots: usize,
    grid: AngularGrid,
    grid_reflection: Vec<Complex64>,
    tx_steering: Vec<CVector>,
    rx_steering: Vec<CVector>,
}

impl PhasedArrayContext {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        tx: SurfaceGeometry,
        rx: SurfaceGeometry,
        wavelength: f64,
        feed_gain: f64,
        noise_power: f64,
        snapshots: usize,
        grid: AngularGrid,
        grid_reflection: Vec<Complex64>,
    ) -> Result<Self> {
        if !(feed_gain.is_finite() && feed_gain > 0.0) {
            return Err(Error::InvalidParameter(format!("feed gain must be positive, got {feed_gain}")));
        }
        if !(noise_power.is_finite() && noise_power > 0.0) {
            return Err(Error::InvalidParameter(format!("noise power must be positive, got {noise_power}")));
        }
        if snapshots == 0 {
            return Err(Error::InvalidParameter("need at least one snapshot".into()));
        }
        if grid_reflection.len() != grid.len() {
            return Err(Error::dims("grid reflection", grid.len(), grid_reflection.len()));
        }
        let steer =
            |g: &SurfaceGeometry| grid.directions().iter().map(|&d| steering_vector(g, d, wavelength)).collect();
        let tx_steering = steer(&tx);
        let rx_steering = steer(&rx);
        Ok(Self {
            tx,
            rx,
            wavelength,
            feed_gain,
            noise_power,
            snapshots,
            grid,
            grid_reflection,
            tx_steering,
            rx_steering,
        })
    }

    /// Square-ish planar arrays at half-wavelength spacing.
    #[allow(clippy::too_many_arguments)]
    pub fn planar(
        n_tx: usize,
        n_rx: usize,
        wavelength: f64,
        feed_gain: f64,
        noise_power: f64,
        snapshots: usize,
        grid: AngularGrid,
        grid_reflection: Vec<Complex64>,
    ) -> Result<Self> {
        let array = |n: usize| -> Result<SurfaceGeometry> {
            let (rows, cols) = grid_shape(n)?;
            // feeds are unused by the phased array; one is placed to satisfy the geometry type
            SurfaceGeometry::planar(rows, cols, wavelength / 2.0, &FeedLayout::AtElements(vec![0]))
        };
        Self::new(array(n_tx)?, array(n_rx)?, wavelength, feed_gain, noise_power, snapshots, grid, grid_reflection)
    }

    pub fn n_tx(&self) -> usize {
        self.tx.n_elements()
    }

    pub fn n_rx(&self) -> usize {
        self.rx.n_elements()
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn feed_gain(&self) -> f64 {
        self.feed_gain
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn snapshots(&self) -> usize {
        self.snapshots
    }

    pub fn grid(&self) -> &AngularGrid {
        &self.grid
    }

    pub fn grid_reflection(&self) -> &[Complex64] {
        &self.grid_reflection
    }

    pub fn tx_steering(&self, j: usize) -> &CVector {
        &self.tx_steering[j]
    }

    pub fn rx_steering(&self, j: usize) -> &CVector {
        &self.rx_steering[j]
    }

    fn check_grid(&self, j: usize) -> Result<()> {
        if j < self.grid.len() {
            Ok(())
        } else {
            Err(Error::UnknownGrid { index: j, grid_len: self.grid.len() })
        }
    }

    /// Bound on `N_t ‖x‖²`, the power fed into the transmit chain.
    pub fn power_limit(&self, cfg: &SolverConfig) -> f64 {
        cfg.power_limit(self.snapshots)
    }
}

/// Phase-only weights and the waveform of a phased array.
#[derive(Debug, Clone)]
pub struct PhasedArrayModel {
    pub phases_t: RVector,
    pub phases_r: RVector,
    pub waveform: CVector,
    pub objective: f64,
}

impl PhasedArrayModel {
    pub fn weights_t(&self, gain: f64) -> CVector {
        phase_weights(&self.phases_t, gain)
    }

    pub fn weights_r(&self, gain: f64) -> CVector {
        phase_weights(&self.phases_r, gain)
    }
}

pub fn phase_weights(phases: &RVector, gain: f64) -> CVector {
    phases.map(|p| Complex64::from_polar(gain, p))
}

fn check_weights(w: &CVector, n: usize, gain: f64, what: &'static str) -> Result<()> {
    if w.len() != n {
        return Err(Error::dims(what, n, w.len()));
    }
    if w.iter().any(|z| (z.norm() - gain).abs() > 1e-9 * gain) {
        return Err(Error::InvalidParameter(format!("{what} moduli must equal the feed gain {gain}")));
    }
    Ok(())
}

/// Complex gain `β_k (w_r^T a_r(k)) (a_t(k)^T w_t)` of every grid cell.
pub fn pa_grid_gains(w_t: &CVector, w_r: &CVector, ctx: &PhasedArrayContext) -> Result<Vec<Complex64>> {
    check_weights(w_t, ctx.n_tx(), ctx.feed_gain, "transmit weights")?;
    check_weights(w_r, ctx.n_rx(), ctx.feed_gain, "receive weights")?;
    Ok((0..ctx.grid.len())
        .map(|k| ctx.grid_reflection[k] * w_r.dot(&ctx.rx_steering[k]) * ctx.tx_steering[k].dot(w_t))
        .collect())
}

/// Effective signal `u = Σ_{k∈hyp} β_k (w_r^T a_r)(a_t^T w_t) x`.
pub fn pa_effective_signal(
    hyp: &Hypothesis,
    x: &CVector,
    w_t: &CVector,
    w_r: &CVector,
    ctx: &PhasedArrayContext,
) -> Result<CVector> {
    if x.len() != ctx.snapshots {
        return Err(Error::dims("phased-array waveform", ctx.snapshots, x.len()));
    }
    for &j in hyp.grid_indices() {
        ctx.check_grid(j)?;
    }
    let gains = pa_grid_gains(w_t, w_r, ctx)?;
    let g: Complex64 = hyp.grid_indices().iter().map(|&j| gains[j]).sum();
    Ok(x * g)
}

/// Noise after receive combining: i.i.d. with variance `σ² ‖w_r‖²` per snapshot.
pub fn pa_noise_covariance(w_r: &CVector, ctx: &PhasedArrayContext) -> Result<NoiseCovariance> {
    NoiseCovariance::new(RVector::from_element(1, ctx.noise_power * w_r.norm_squared()), ctx.snapshots)
}

/// Noisy phased-array measurement of `scene`.
pub fn pa_simulate<R: Rng + ?Sized>(
    scene: &Scene,
    x: &CVector,
    w_t: &CVector,
    w_r: &CVector,
    ctx: &PhasedArrayContext,
    rng: &mut R,
) -> Result<CVector> {
    check_weights(w_t, ctx.n_tx(), ctx.feed_gain, "transmit weights")?;
    check_weights(w_r, ctx.n_rx(), ctx.feed_gain, "receive weights")?;
    let wavelength = ctx.wavelength;
    let g: Complex64 = scene
        .targets()
        .iter()
        .map(|t| {
            let a_t = steering_vector(&ctx.tx, t.direction, wavelength);
            let a_r = steering_vector(&ctx.rx, t.direction, wavelength);
            t.reflection * w_r.dot(&a_r) * a_t.dot(w_t)
        })
        .sum();
    let noise = crate::signal::draw_element_noise(rng, ctx.n_rx(), ctx.snapshots, ctx.noise_power);
    let combined = noise.transpose() * w_r;
    Ok(x * g + combined)
}

/// Per-grid signals `u^{(k)} = g_k x`.
pub fn pa_grid_signals(model: &PhasedArrayModel, ctx: &PhasedArrayContext) -> Result<Vec<CVector>> {
    let gains = pa_grid_gains(&model.weights_t(ctx.feed_gain), &model.weights_r(ctx.feed_gain), ctx)?;
    Ok(gains.into_iter().map(|g| &model.waveform * g).collect())
}

/// Weighted objective of a phased-array configuration.
pub fn pa_objective(space: &HypothesisSpace, model: &PhasedArrayModel, ctx: &PhasedArrayContext) -> Result<f64> {
    for h in space.hypotheses() {
        for &j in h.grid_indices() {
            ctx.check_grid(j)?;
        }
    }
    let grid = pa_grid_signals(model, ctx)?;
    let cov = pa_noise_covariance(&model.weights_r(ctx.feed_gain), ctx)?;
    objective_from_signals(space, &grid, &cov)
}

/// Random phases and a random waveform at full feed power.
pub fn pa_initial<R: Rng + ?Sized>(
    rng: &mut R,
    space: &HypothesisSpace,
    ctx: &PhasedArrayContext,
    cfg: &SolverConfig,
) -> Result<PhasedArrayModel> {
    let mut phases = |n: usize| RVector::from_fn(n, |_, _| rng.random_range(0.0..std::f64::consts::TAU));
    let phases_t = phases(ctx.n_tx());
    let phases_r = phases(ctx.n_rx());
    let raw = crate::signal::Waveform::random(rng, 1, ctx.snapshots).to_vec();
    let scale = (ctx.power_limit(cfg) / (ctx.n_tx() as f64 * raw.norm_squared())).sqrt();
    let mut model = PhasedArrayModel { phases_t, phases_r, waveform: raw * Complex64::from(scale), objective: 0.0 };
    model.objective = pa_objective(space, &model, ctx)?;
    Ok(model)
}

/// Form `Σ ω_{ij} conj(c_{ij}) c_{ij}^T` where `c_{ij} = Σ_k ±coef_k v_k`.
fn phase_form(space: &HypothesisSpace, coef: &[Complex64], vectors: &[CVector], n: usize) -> CMatrix {
    let weights = WeightTable::from_probabilities(space.probs());
    let hyps = space.hypotheses();
    let mut m = CMatrix::zeros(n, n);
    for (i, j, w) in weights.lower_pairs() {
        if w <= 0.0 {
            continue;
        }
        let mut c = CVector::zeros(n);
        for &k in hyps[i].grid_indices() {
            c += &vectors[k] * coef[k];
        }
        for &k in hyps[j].grid_indices() {
            c -= &vectors[k] * coef[k];
        }
        m += (c.conjugate() * c.transpose()).scale(w);
    }
    m
}

/// Phases of the top eigenvector, or `None` when the form vanishes.
fn top_phases(m: &CMatrix) -> Result<Option<RVector>> {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(None);
    }
    let e = eigh(m)?;
    if e.values[0] <= 1e-12 * scale {
        return Ok(None);
    }
    Ok(Some(e.vectors.column(0).map(|z| z.arg())))
}

#[derive(Debug, Clone)]
pub struct PaOutcome {
    pub model: PhasedArrayModel,
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub flat_steps: usize,
}

/// Alternating waveform / transmit-phase / receive-phase ascent with the
/// same safeguard and stopping rule as [`crate::waoa::waoa`].
pub fn pa_optimize(
    space: &HypothesisSpace,
    ctx: &PhasedArrayContext,
    cfg: &SolverConfig,
    init: &PhasedArrayModel,
) -> Result<PaOutcome> {
    cfg.validate()?;
    let gain = ctx.feed_gain;
    let mut cur = init.clone();
    cur.objective = pa_objective(space, &cur, ctx)?;
    let mut trace = vec![cur.objective];
    let (mut flat_steps, mut iterations) = (0, 0);
    let accept = |cur: &mut PhasedArrayModel, cand: PhasedArrayModel| {
        if !cfg.safeguard || cand.objective >= cur.objective {
            *cur = cand;
        }
    };

    for _ in 0..cfg.max_outer {
        iterations += 1;
        let prev = cur.objective;

        // the waveform enters only through ‖x‖², so the forms are multiples of I
        let gains = pa_grid_gains(&cur.weights_t(gain), &cur.weights_r(gain), ctx)?;
        let ones = vec![CVector::from_element(1, Complex64::new(1.0, 0.0)); gains.len()];
        let spread = phase_form(space, &gains, &ones, 1)[(0, 0)].re;
        let n = ctx.snapshots;
        let r = CMatrix::identity(n, n).scale(spread);
        let s = CMatrix::identity(n, n).scale(ctx.n_tx() as f64);
        let sol = solve_waveform(&r, &s, ctx.power_limit(cfg))?;
        flat_steps += usize::from(sol.flat);
        let mut cand = PhasedArrayModel { waveform: sol.value, ..cur.clone() };
        cand.objective = pa_objective(space, &cand, ctx)?;
        accept(&mut cur, cand);

        // transmit: g_k = b_k^T w_t with b_k = β_k (w_r^T a_r(k)) a_t(k)
        let w_r = cur.weights_r(gain);
        let coef: Vec<Complex64> =
            (0..ctx.grid.len()).map(|k| ctx.grid_reflection[k] * w_r.dot(&ctx.rx_steering[k])).collect();
        match top_phases(&phase_form(space, &coef, &ctx.tx_steering, ctx.n_tx()))? {
            Some(phases_t) => {
                let mut cand = PhasedArrayModel { phases_t, ..cur.clone() };
                cand.objective = pa_objective(space, &cand, ctx)?;
                accept(&mut cur, cand);
            }
            None => flat_steps += 1,
        }

        let w_t = cur.weights_t(gain);
        let coef: Vec<Complex64> =
            (0..ctx.grid.len()).map(|k| ctx.grid_reflection[k] * ctx.tx_steering[k].dot(&w_t)).collect();
        match top_phases(&phase_form(space, &coef, &ctx.rx_steering, ctx.n_rx()))? {
            Some(phases_r) => {
                let mut cand = PhasedArrayModel { phases_r, ..cur.clone() };
                cand.objective = pa_objective(space, &cand, ctx)?;
                accept(&mut cur, cand);
            }
            None => flat_steps += 1,
        }

        trace.push(cur.objective);
        if (cur.objective - prev).abs() <= cfg.tolerance * prev.abs() {
            break;
        }
    }
    Ok(PaOutcome { model: cur, trace, iterations, flat_steps })
}
