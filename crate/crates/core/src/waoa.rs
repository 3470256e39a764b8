//! Subproblem solvers and the outer alternating loop (WAOA).
//!
//! Each outer iteration improves the waveform by a whitened eigenvector step,
//! the transmit amplitudes by a sign-split spectral approximation, and the
//! receive amplitudes by fractional programming with a quadratic transform.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::HypothesisSpace;
use crate::numerics::{eigh, eigh_symmetric, real_part, CMatrix, CVector, RMatrix, RVector};
use crate::objective::{
    build_receive_forms, build_transmit_forms, build_waveform_forms, weighted_objective, ReceiveForms,
};
use crate::signal::{AmplitudeVector, MeasurementContext, Waveform};

/// Relative threshold below which eigenvalues are treated as zero.
const SPECTRAL_TOL: f64 = 1e-12;

/// How the power bound `P_M` relates to the waveform length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerBudget {
    /// `tr{S S^H} ≤ P_M` over the whole waveform.
    Total,
    /// `tr{S S^H} ≤ P_M · I_t`, i.e. `P_M` is the mean power per snapshot.
    #[default]
    PerSnapshot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub power: f64,
    pub budget: PowerBudget,
    pub tolerance: f64,
    pub fp_tolerance: f64,
    pub max_outer: usize,
    pub max_fp: usize,
    pub safeguard: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            power: 10.0,
            budget: PowerBudget::PerSnapshot,
            tolerance: 1e-4,
            fp_tolerance: 1e-6,
            max_outer: 30,
            max_fp: 200,
            safeguard: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.power) {
            return Err(Error::InvalidParameter(format!("power bound must be positive, got {}", self.power)));
        }
        if !positive(self.tolerance) || !positive(self.fp_tolerance) {
            return Err(Error::InvalidParameter("solver tolerances must be positive".into()));
        }
        if self.max_outer == 0 || self.max_fp == 0 {
            return Err(Error::InvalidParameter("iteration caps must be at least 1".into()));
        }
        Ok(())
    }

    /// Bound on `tr{S S^H}` for a waveform with `snapshots` columns.
    pub fn power_limit(&self, snapshots: usize) -> f64 {
        match self.budget {
            PowerBudget::Total => self.power,
            PowerBudget::PerSnapshot => self.power * snapshots as f64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizationVariables {
    pub waveform: Waveform,
    pub psi_t: AmplitudeVector,
    pub psi_r: AmplitudeVector,
    pub objective: f64,
}

/// Random amplitudes in `(0, 1]` and a random waveform at full power.
///
/// Uniform amplitudes would keep a mirror-symmetric surface symmetric, which
/// leaves mirror-image grid cells indistinguishable until the first
/// optimization.
pub fn initial_variables<R: Rng + ?Sized>(
    rng: &mut R,
    space: &HypothesisSpace,
    ctx: &MeasurementContext,
    cfg: &SolverConfig,
) -> Result<OptimizationVariables> {
    let mut draw = |n: usize| AmplitudeVector::clamped(RVector::from_fn(n, |_, _| 1.0 - rng.random::<f64>()));
    let psi_t = draw(ctx.tx().n_elements());
    let psi_r = draw(ctx.rx().n_elements());
    let raw = Waveform::random(rng, ctx.tx().n_feeds(), ctx.snapshots());
    let power = crate::objective::transmit_power(&raw, &psi_t, ctx)?;
    if power <= 0.0 {
        return Err(Error::Numerical("transmit surface radiates no power".into()));
    }
    let scale = (cfg.power_limit(ctx.snapshots()) / power).sqrt();
    let waveform = raw.scaled(scale.into());
    let objective = weighted_objective(space, &waveform, &psi_t, &psi_r, ctx)?;
    Ok(OptimizationVariables { waveform, psi_t, psi_r, objective })
}

/// A solver output; `flat` marks a zero objective form, where any feasible
/// point is optimal.
#[derive(Debug, Clone)]
pub struct Solution<T> {
    pub value: T,
    pub flat: bool,
}

/// Maximizes `x^H R x` subject to `x^H S x ≤ p_max`.
pub fn solve_waveform(r: &CMatrix, s: &CMatrix, p_max: f64) -> Result<Solution<CVector>> {
    if r.shape() != s.shape() {
        return Err(Error::dims("waveform forms", format!("{:?}", s.shape()), format!("{:?}", r.shape())));
    }
    let se = eigh(s)?;
    let top = se.values.iter().copied().next().unwrap_or(0.0);
    if top <= 0.0 {
        return Err(Error::Numerical("power form is zero".into()));
    }
    // whitening basis U D^{-1/2}, restricted to the range of S
    let keep: Vec<usize> = (0..se.dim()).filter(|&i| se.values[i] > SPECTRAL_TOL * top).collect();
    let mut w = CMatrix::zeros(s.nrows(), keep.len());
    for (c, &i) in keep.iter().enumerate() {
        w.set_column(c, &se.vectors.column(i).scale(se.values[i].powf(-0.5)));
    }
    let whitened = w.adjoint() * r * &w;
    let re = eigh(&whitened)?;
    let r_scale = r.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let flat = r_scale == 0.0 || re.values[0] <= SPECTRAL_TOL * r_scale;
    let v = re.vectors.column(0).into_owned();
    Ok(Solution { value: (&w * v).scale(p_max.sqrt()), flat })
}

/// Approximately maximizes `ψ^T Re{R} ψ` over `ψ ∈ [0,1]^N` with
/// `ψ^T S ψ ≤ p_max`, for diagonal `S`.
pub fn solve_transmit(r: &CMatrix, s: &RMatrix, p_max: f64) -> Result<Solution<AmplitudeVector>> {
    let n = s.nrows();
    if r.shape() != (n, n) || s.ncols() != n {
        return Err(Error::dims("transmit forms", n, r.nrows()));
    }
    let diag = s.diagonal();
    let s_max = diag.max();
    if !(s_max > 0.0) {
        return Err(Error::Numerical("transmit power form is zero".into()));
    }
    let inv_sqrt = diag.map(|v| if v > SPECTRAL_TOL * s_max { v.powf(-0.5) } else { 0.0 });
    let rr = real_part(r);
    let r_scale = rr.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let scaled = RMatrix::from_fn(n, n, |i, j| inv_sqrt[i] * rr[(i, j)] * inv_sqrt[j]);
    let eig = eigh_symmetric(&scaled)?;
    let flat = r_scale == 0.0 || eig.values[0] <= SPECTRAL_TOL * r_scale * inv_sqrt.max().powi(2);
    let direction = if flat {
        RVector::from_element(n, 1.0)
    } else {
        let u = eig.vectors.column(0);
        let plus = u.map(|v| v.max(0.0));
        let minus = u.map(|v| (-v).max(0.0));
        let mu = if plus.norm() >= minus.norm() { plus } else { minus };
        let d = inv_sqrt.component_mul(&mu);
        let norm = d.norm();
        if norm == 0.0 {
            RVector::from_element(n, 1.0)
        } else {
            d / norm
        }
    };
    Ok(Solution { value: fit_box_and_power(&direction, &diag, p_max), flat })
}

/// Largest multiple of a nonnegative direction satisfying both the box and
/// the power constraint.
fn fit_box_and_power(d: &RVector, s_diag: &RVector, p_max: f64) -> AmplitudeVector {
    let peak = d.max();
    if peak <= 0.0 {
        return AmplitudeVector::zeros(d.len());
    }
    let power = d.iter().zip(s_diag.iter()).map(|(v, s)| v * v * s).sum::<f64>();
    let mut scale = 1.0 / peak;
    if power > 0.0 {
        scale = scale.min((p_max / power).sqrt());
    }
    AmplitudeVector::clamped(d * scale)
}

/// Per-feed spectra of `Re{R^r_l}` plus the diagonals of `S^r_l`.
#[derive(Debug, Clone)]
pub struct ReceiveSpectra {
    vectors: Vec<RMatrix>,
    values: Vec<RVector>,
    noise: Vec<RVector>,
}

impl ReceiveSpectra {
    pub fn new(forms: &ReceiveForms) -> Result<Self> {
        let mut vectors = Vec::with_capacity(forms.n_feeds());
        let mut values = Vec::with_capacity(forms.n_feeds());
        for r in &forms.r {
            let e = eigh_symmetric(&real_part(r))?;
            let top = e.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            values.push(e.values.map(|v| if v > SPECTRAL_TOL * top { v } else { 0.0 }));
            vectors.push(e.vectors);
        }
        let noise = forms.s.iter().map(|s| s.diagonal()).collect();
        Ok(Self { vectors, values, noise })
    }

    pub fn n_feeds(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.noise.first().map_or(0, |v| v.len())
    }

    fn noise_quadratic(&self, l: usize, psi: &RVector) -> f64 {
        self.noise[l].iter().zip(psi.iter()).map(|(s, p)| s * p * p).sum()
    }

    /// Sum of ratios `Σ_l ψ^T U_l D_l U_l^T ψ / ψ^T S_l ψ`.
    pub fn ratio_sum(&self, psi: &AmplitudeVector) -> Result<f64> {
        let p = psi.values();
        let mut total = 0.0;
        for l in 0..self.n_feeds() {
            let den = self.noise_quadratic(l, p);
            if den <= 0.0 {
                return Err(Error::DegenerateCovariance);
            }
            let z = self.vectors[l].transpose() * p;
            total += self.values[l].iter().zip(z.iter()).map(|(d, z)| d * z * z).sum::<f64>() / den;
        }
        Ok(total)
    }
}

/// Quadratic-transform auxiliaries, one real vector per receive feed in the
/// eigenbasis of `Re{R^r_l}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FpAuxiliary {
    pub xi: Vec<RVector>,
}

/// Transformed objective `Σ_l 2 ξ_l^T U_l^T ψ − (ψ^T S_l ψ) ξ_l^T D_l^+ ξ_l`.
pub fn fp_surrogate(psi: &AmplitudeVector, aux: &FpAuxiliary, spectra: &ReceiveSpectra) -> f64 {
    let p = psi.values();
    let mut total = 0.0;
    for l in 0..spectra.n_feeds() {
        let z = spectra.vectors[l].transpose() * p;
        let s = spectra.noise_quadratic(l, p);
        let xi = &aux.xi[l];
        let d = &spectra.values[l];
        for k in 0..xi.len() {
            if d[k] > 0.0 {
                total += 2.0 * xi[k] * z[k] - s * xi[k] * xi[k] / d[k];
            }
        }
    }
    total
}

/// Exact maximizer of the transformed objective over `ξ` at fixed `ψ`.
pub fn fp_xi_update(psi: &AmplitudeVector, spectra: &ReceiveSpectra) -> Result<FpAuxiliary> {
    let p = psi.values();
    let mut xi = Vec::with_capacity(spectra.n_feeds());
    for l in 0..spectra.n_feeds() {
        let s = spectra.noise_quadratic(l, p);
        if s <= 0.0 {
            return Err(Error::DegenerateCovariance);
        }
        let z = spectra.vectors[l].transpose() * p;
        xi.push(spectra.values[l].component_mul(&z) / s);
    }
    Ok(FpAuxiliary { xi })
}

/// Maximizer of the transformed objective over `ψ` at fixed `ξ`, clipped to
/// the unit box. The quadratic coefficient is diagonal, so clipping is exact.
/// Returns `current` unchanged with `flat` set when the coefficient vanishes.
pub fn fp_psi_update(
    aux: &FpAuxiliary,
    spectra: &ReceiveSpectra,
    current: &AmplitudeVector,
) -> Solution<AmplitudeVector> {
    let n = spectra.dim();
    let mut quad = RVector::zeros(n);
    let mut lin = RVector::zeros(n);
    for l in 0..spectra.n_feeds() {
        let xi = &aux.xi[l];
        let d = &spectra.values[l];
        let weight: f64 = (0..xi.len()).filter(|&k| d[k] > 0.0).map(|k| xi[k] * xi[k] / d[k]).sum();
        quad += &spectra.noise[l] * weight;
        lin += &spectra.vectors[l] * xi;
    }
    if quad.iter().all(|&a| a <= 0.0) {
        return Solution { value: current.clone(), flat: true };
    }
    let psi = RVector::from_fn(n, |i, _| {
        if quad[i] > 0.0 {
            lin[i] / quad[i]
        } else if lin[i] > 0.0 {
            1.0
        } else if lin[i] < 0.0 {
            0.0
        } else {
            current.values()[i]
        }
    });
    Solution { value: AmplitudeVector::clamped(psi), flat: false }
}

#[derive(Debug, Clone)]
pub struct ReceiveSolution {
    pub amplitudes: AmplitudeVector,
    pub ratio: f64,
    pub iterations: usize,
    pub flat: bool,
}

/// Fractional-programming loop for the receive amplitudes; returns the best
/// iterate seen.
pub fn solve_receive(forms: &ReceiveForms, cfg: &SolverConfig, init: &AmplitudeVector) -> Result<ReceiveSolution> {
    let spectra = ReceiveSpectra::new(forms)?;
    if init.len() != spectra.dim() {
        return Err(Error::dims("receive amplitudes", spectra.dim(), init.len()));
    }
    let mut psi = init.clone();
    let mut prev = spectra.ratio_sum(&psi)?;
    let mut best = (psi.clone(), prev);
    let mut iterations = 0;
    let mut flat = false;
    for _ in 0..cfg.max_fp {
        iterations += 1;
        let aux = fp_xi_update(&psi, &spectra)?;
        let step = fp_psi_update(&aux, &spectra, &psi);
        flat = step.flat;
        psi = step.value;
        let Ok(value) = spectra.ratio_sum(&psi) else { break };
        if value > best.1 {
            best = (psi.clone(), value);
        }
        if flat || (value - prev).abs() <= cfg.fp_tolerance * prev.abs() {
            break;
        }
        prev = value;
    }
    Ok(ReceiveSolution { amplitudes: best.0, ratio: best.1, iterations, flat })
}

#[derive(Debug, Clone)]
pub struct WaoaOutcome {
    pub variables: OptimizationVariables,
    /// Objective after initialization followed by one entry per outer iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// Number of sub-steps that saw a flat objective form.
    pub flat_steps: usize,
    /// Number of sub-steps rolled back by the safeguard.
    pub rollbacks: usize,
}

/// Alternating optimization of waveform, transmit and receive amplitudes.
pub fn waoa(
    space: &HypothesisSpace,
    ctx: &MeasurementContext,
    cfg: &SolverConfig,
    init: &OptimizationVariables,
) -> Result<WaoaOutcome> {
    cfg.validate()?;
    ctx.check_variables(&init.waveform, &init.psi_t, &init.psi_r)?;
    let p_max = cfg.power_limit(ctx.snapshots());
    let feeds = ctx.tx().n_feeds();
    let mut cur = init.clone();
    cur.objective = weighted_objective(space, &cur.waveform, &cur.psi_t, &cur.psi_r, ctx)?;
    let mut trace = vec![cur.objective];
    let (mut flat_steps, mut rollbacks, mut iterations) = (0, 0, 0);

    let accept = |cur: &mut OptimizationVariables, cand: OptimizationVariables, rollbacks: &mut usize| {
        if cfg.safeguard && cand.objective < cur.objective {
            *rollbacks += 1;
        } else {
            *cur = cand;
        }
    };

    for _ in 0..cfg.max_outer {
        iterations += 1;
        let prev = cur.objective;

        let wf = build_waveform_forms(&cur.psi_t, &cur.psi_r, space, ctx)?;
        let sol = solve_waveform(&wf.r, &wf.s, p_max)?;
        flat_steps += usize::from(sol.flat);
        let waveform = Waveform::from_vec(&sol.value, feeds)?;
        let objective = weighted_objective(space, &waveform, &cur.psi_t, &cur.psi_r, ctx)?;
        let cand = OptimizationVariables { waveform, objective, ..cur.clone() };
        accept(&mut cur, cand, &mut rollbacks);

        let tf = build_transmit_forms(&cur.waveform, &cur.psi_r, space, ctx)?;
        let sol = solve_transmit(&tf.r, &tf.s, p_max)?;
        flat_steps += usize::from(sol.flat);
        let objective = weighted_objective(space, &cur.waveform, &sol.value, &cur.psi_r, ctx)?;
        let cand = OptimizationVariables { psi_t: sol.value, objective, ..cur.clone() };
        accept(&mut cur, cand, &mut rollbacks);

        let rf = build_receive_forms(&cur.waveform, &cur.psi_t, space, ctx)?;
        let sol = solve_receive(&rf, cfg, &cur.psi_r)?;
        flat_steps += usize::from(sol.flat);
        let objective = weighted_objective(space, &cur.waveform, &cur.psi_t, &sol.amplitudes, ctx)?;
        let cand = OptimizationVariables { psi_r: sol.amplitudes, objective, ..cur.clone() };
        accept(&mut cur, cand, &mut rollbacks);

        trace.push(cur.objective);
        if (cur.objective - prev).abs() <= cfg.tolerance * prev.abs() {
            break;
        }
    }
    if !cur.objective.is_finite() {
        return Err(Error::NonFinite("objective"));
    }
    Ok(WaoaOutcome { variables: cur, trace, iterations, flat_steps, rollbacks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::{enumerate_hypotheses, Hypothesis};
    use crate::numerics::testing::{random_complex, random_psd};
    use crate::objective::transmit_power;
    use crate::signal::fixtures::{context, random_amplitudes, Dims};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quad(r: &CMatrix, x: &CVector) -> f64 {
        (x.adjoint() * r * x)[(0, 0)].re
    }

    fn rquad(r: &RMatrix, x: &RVector) -> f64 {
        x.dot(&(r * x))
    }

    fn random_diag<R: Rng>(rng: &mut R, n: usize) -> RMatrix {
        RMatrix::from_diagonal(&RVector::from_fn(n, |_, _| rng.random_range(0.2..2.0)))
    }

    #[test]
    fn waveform_identity_power_form_gives_top_eigenvector() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = random_psd(&mut rng, 5, 5);
        let sol = solve_waveform(&r, &CMatrix::identity(5, 5), 3.0).unwrap();
        let top = eigh(&r).unwrap();
        assert!(!sol.flat);
        assert!((quad(&r, &sol.value) - 3.0 * top.values[0]).abs() < 1e-9 * top.values[0]);
        assert!((sol.value.norm_squared() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn waveform_equal_forms_give_power_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_psd(&mut rng, 4, 4) + CMatrix::identity(4, 4);
        let sol = solve_waveform(&s, &s, 7.0).unwrap();
        assert!((quad(&s, &sol.value) - 7.0).abs() < 1e-9);
    }

    #[test]
    fn waveform_dominates_random_feasible_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let r = random_psd(&mut rng, 8, 3);
            let s = random_psd(&mut rng, 8, 8) + CMatrix::identity(8, 8).scale(0.1);
            let sol = solve_waveform(&r, &s, 2.0).unwrap();
            let best = quad(&r, &sol.value);
            assert!((quad(&s, &sol.value) - 2.0).abs() < 1e-9 * 2.0);
            for _ in 0..1000 {
                let x = random_complex(&mut rng, 8, 1).column(0).into_owned();
                let x = x.scale((2.0 / quad(&s, &x)).sqrt());
                assert!(quad(&r, &x) <= best * (1.0 + 1e-10));
            }
        }
    }

    #[test]
    fn waveform_flat_and_singular_cases() {
        let sol = solve_waveform(&CMatrix::zeros(3, 3), &CMatrix::identity(3, 3), 1.0).unwrap();
        assert!(sol.flat);
        assert!((sol.value.norm_squared() - 1.0).abs() < 1e-12);
        assert!(solve_waveform(&CMatrix::identity(2, 2), &CMatrix::zeros(2, 2), 1.0).is_err());
        // singular power form: the solution stays in its range
        let mut s = CMatrix::zeros(2, 2);
        s[(0, 0)] = 4.0.into();
        let sol = solve_waveform(&CMatrix::identity(2, 2), &s, 1.0).unwrap();
        assert!((sol.value[0].norm() - 0.5).abs() < 1e-12);
        assert!(sol.value[1].norm() < 1e-12);
    }

    #[test]
    fn transmit_output_is_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let r = random_psd(&mut rng, 6, 2);
            let s = random_diag(&mut rng, 6);
            let p_max = rng.random_range(0.1..5.0);
            let sol = solve_transmit(&r, &s, p_max).unwrap();
            let psi = sol.value.values();
            assert!(psi.iter().all(|&v| (0.0..=1.0).contains(&v)));
            assert!(rquad(&s, psi) <= p_max * (1.0 + 1e-9));
        }
    }

    #[test]
    fn transmit_sign_definite_eigenvector() {
        // rank-1 with a positive vector: the direction is S^{-1/2} u1
        let u = RVector::from_vec(vec![0.2, 0.5, 0.3, 0.7]);
        let s_diag = RVector::from_vec(vec![1.0, 4.0, 0.25, 1.0]);
        let s = RMatrix::from_diagonal(&s_diag);
        let s_half = s_diag.map(f64::sqrt);
        let v = s_half.component_mul(&u);
        let r = crate::numerics::to_complex(&(&v * v.transpose()));
        let sol = solve_transmit(&r, &s, 100.0).unwrap();
        let expected = u.component_div(&s_half);
        let expected = &expected / expected.max();
        assert!((sol.value.values() - expected).norm() < 1e-10);
    }

    #[test]
    fn transmit_flat_form() {
        let s = RMatrix::from_diagonal(&RVector::from_vec(vec![1.0, 2.0]));
        let sol = solve_transmit(&CMatrix::zeros(2, 2), &s, 1.5).unwrap();
        assert!(sol.flat);
        assert!((rquad(&s, sol.value.values()) - 1.5).abs() < 1e-12);
    }

    fn random_receive_forms<R: Rng>(rng: &mut R, n: usize, feeds: usize) -> ReceiveForms {
        ReceiveForms {
            r: (0..feeds).map(|_| random_psd(rng, n, n)).collect(),
            s: (0..feeds).map(|_| random_diag(rng, n)).collect(),
        }
    }

    #[test]
    fn xi_update_recovers_ratio_and_is_locally_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let forms = random_receive_forms(&mut rng, 5, 2);
        let spectra = ReceiveSpectra::new(&forms).unwrap();
        let psi = random_amplitudes(&mut rng, 5);
        let aux = fp_xi_update(&psi, &spectra).unwrap();
        let ratio = forms.ratio_sum(&psi).unwrap();
        assert!((fp_surrogate(&psi, &aux, &spectra) - ratio).abs() < 1e-10 * ratio);
        assert!((spectra.ratio_sum(&psi).unwrap() - ratio).abs() < 1e-10 * ratio);
        for l in 0..2 {
            for k in 0..5 {
                for delta in [1e-3, -1e-3] {
                    let mut moved = aux.clone();
                    moved.xi[l][k] += delta;
                    assert!(fp_surrogate(&psi, &moved, &spectra) < ratio);
                }
            }
        }
    }

    #[test]
    fn xi_update_scalar_case() {
        let forms = ReceiveForms {
            r: vec![CMatrix::from_element(1, 1, 3.0.into())],
            s: vec![RMatrix::from_element(1, 1, 2.0)],
        };
        let spectra = ReceiveSpectra::new(&forms).unwrap();
        let psi = AmplitudeVector::from_slice(&[0.5]).unwrap();
        let aux = fp_xi_update(&psi, &spectra).unwrap();
        assert!((fp_surrogate(&psi, &aux, &spectra) - 1.5).abs() < 1e-14);
    }

    #[test]
    fn psi_update_clips_and_matches_separable_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let forms = random_receive_forms(&mut rng, 3, 2);
        let spectra = ReceiveSpectra::new(&forms).unwrap();
        for _ in 0..10 {
            let psi = random_amplitudes(&mut rng, 3);
            let aux = fp_xi_update(&psi, &spectra).unwrap();
            let step = fp_psi_update(&aux, &spectra, &psi);
            let got = fp_surrogate(&step.value, &aux, &spectra);
            // exhaustive check on a fine grid
            let levels = 201;
            let mut best = f64::MIN;
            for a in 0..levels {
                for b in 0..levels {
                    for c in 0..levels.min(41) {
                        let p = AmplitudeVector::from_slice(&[a as f64 / 200.0, b as f64 / 200.0, c as f64 / 40.0])
                            .unwrap();
                        best = best.max(fp_surrogate(&p, &aux, &spectra));
                    }
                }
            }
            assert!(got >= best - 1e-12 * best.abs().max(1.0));
        }
    }

    #[test]
    fn psi_update_clipping_branches() {
        // one feed, identity eigenbasis: ψ_n = (U ξ)_n / a_n
        let spectra = ReceiveSpectra {
            vectors: vec![RMatrix::identity(3, 3)],
            values: vec![RVector::from_vec(vec![1.0, 1.0, 1.0])],
            noise: vec![RVector::from_vec(vec![1.0, 1.0, 1.0])],
        };
        // with ξ = v / ‖v‖², the update returns v before clipping
        let v = RVector::from_vec(vec![1.7, -0.3, 0.5]);
        let w = v.norm_squared();
        let aux = FpAuxiliary { xi: vec![v / w] };
        let out = fp_psi_update(&aux, &spectra, &AmplitudeVector::ones(3));
        let got = out.value.values();
        assert_eq!((got[0], got[1]), (1.0, 0.0));
        assert!((got[2] - 0.5).abs() < 1e-15);
        let zero = FpAuxiliary { xi: vec![RVector::zeros(3)] };
        let current = AmplitudeVector::from_slice(&[0.1, 0.2, 0.3]).unwrap();
        let out = fp_psi_update(&zero, &spectra, &current);
        assert!(out.flat);
        assert_eq!(out.value, current);
    }

    fn receive_grid_optimum(forms: &ReceiveForms, levels: usize) -> f64 {
        let mut best = 0.0_f64;
        let step = 1.0 / (levels - 1) as f64;
        for a in 0..levels {
            for b in 0..levels {
                for c in 0..levels {
                    if a + b + c == 0 {
                        continue;
                    }
                    let p = AmplitudeVector::from_slice(&[a as f64 * step, b as f64 * step, c as f64 * step]).unwrap();
                    best = best.max(forms.ratio_sum(&p).unwrap());
                }
            }
        }
        best
    }

    #[test]
    fn receive_solver_ascends_and_nears_grid_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cfg = SolverConfig::default();
        for _ in 0..10 {
            let forms = random_receive_forms(&mut rng, 3, 1);
            let init = AmplitudeVector::ones(3);
            let sol = solve_receive(&forms, &cfg, &init).unwrap();
            assert!(sol.iterations <= cfg.max_fp);
            assert!(sol.ratio >= forms.ratio_sum(&init).unwrap());
            let opt = receive_grid_optimum(&forms, 21);
            assert!(sol.ratio >= 0.9 * opt, "{} vs {opt}", sol.ratio);
        }
    }

    #[test]
    fn receive_solver_stops_at_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let forms = random_receive_forms(&mut rng, 3, 1);
        let cfg = SolverConfig::default();
        let first = solve_receive(&forms, &cfg, &AmplitudeVector::ones(3)).unwrap();
        let tight = SolverConfig { fp_tolerance: 1e-15, max_fp: 5000, ..cfg.clone() };
        let converged = solve_receive(&forms, &tight, &first.amplitudes).unwrap();
        let again = solve_receive(&forms, &cfg, &converged.amplitudes).unwrap();
        assert_eq!(again.iterations, 1);
    }

    fn toy() -> (MeasurementContext, HypothesisSpace) {
        let ctx = context(&Dims { n_t: 2, n_r: 2, l_t: 1, l_r: 1, snapshots: 2, grids: 1 }, 1.0);
        (ctx, enumerate_hypotheses(1, 1).unwrap())
    }

    #[test]
    fn waoa_toy_is_monotone_and_converges() {
        let (ctx, space) = toy();
        let cfg = SolverConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let init = initial_variables(&mut rng, &space, &ctx, &cfg).unwrap();
        let out = waoa(&space, &ctx, &cfg, &init).unwrap();
        assert!(out.trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(out.iterations < cfg.max_outer);
        assert!(out.variables.objective >= init.objective);
    }

    #[test]
    fn waoa_large_tolerance_runs_once() {
        let (ctx, space) = toy();
        let cfg = SolverConfig { tolerance: 1e6, ..SolverConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let init = initial_variables(&mut rng, &space, &ctx, &cfg).unwrap();
        assert_eq!(waoa(&space, &ctx, &cfg, &init).unwrap().iterations, 1);
    }

    #[test]
    fn waoa_output_is_feasible() {
        let ctx = context(&Dims { n_t: 6, n_r: 6, l_t: 2, l_r: 2, snapshots: 2, grids: 3 }, 1.0);
        let space = enumerate_hypotheses(3, 2).unwrap();
        let cfg = SolverConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let init = initial_variables(&mut rng, &space, &ctx, &cfg).unwrap();
        let out = waoa(&space, &ctx, &cfg, &init).unwrap();
        let v = &out.variables;
        let power = transmit_power(&v.waveform, &v.psi_t, &ctx).unwrap();
        assert!(power <= cfg.power_limit(2) * (1.0 + 1e-9));
        assert!(v.waveform.matrix().iter().all(|z| z.is_finite()));
        assert!(out.trace.windows(2).all(|w| w[1] >= w[0]));
        let direct = weighted_objective(&space, &v.waveform, &v.psi_t, &v.psi_r, &ctx).unwrap();
        assert!((direct - v.objective).abs() <= 1e-12 * direct);
    }

    #[test]
    fn waoa_flat_objective_is_flagged() {
        let (ctx, _) = toy();
        let space =
            HypothesisSpace::new(vec![Hypothesis::null(), Hypothesis::new(vec![0]).unwrap()], vec![1.0, 0.0]).unwrap();
        let cfg = SolverConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let init = initial_variables(&mut rng, &space, &ctx, &cfg).unwrap();
        let out = waoa(&space, &ctx, &cfg, &init).unwrap();
        assert_eq!(out.variables.objective, 0.0);
        assert!(out.flat_steps > 0);
    }

    #[test]
    fn waveform_step_never_lowers_objective() {
        let ctx = context(&Dims { n_t: 6, n_r: 6, l_t: 2, l_r: 2, snapshots: 2, grids: 3 }, 1.0);
        let space = enumerate_hypotheses(3, 1).unwrap();
        let cfg = SolverConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..5 {
            let init = initial_variables(&mut rng, &space, &ctx, &cfg).unwrap();
            let psi_t = random_amplitudes(&mut rng, 6);
            let psi_r = random_amplitudes(&mut rng, 6);
            let x0 = init
                .waveform
                .scaled((cfg.power_limit(2) / transmit_power(&init.waveform, &psi_t, &ctx).unwrap()).sqrt().into());
            let before = weighted_objective(&space, &x0, &psi_t, &psi_r, &ctx).unwrap();
            let wf = build_waveform_forms(&psi_t, &psi_r, &space, &ctx).unwrap();
            let sol = solve_waveform(&wf.r, &wf.s, cfg.power_limit(2)).unwrap();
            let x = Waveform::from_vec(&sol.value, 2).unwrap();
            let after = weighted_objective(&space, &x, &psi_t, &psi_r, &ctx).unwrap();
            assert!(after >= before * (1.0 - 1e-12));
        }
    }
}
