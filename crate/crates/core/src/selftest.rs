//! Fast oracle checks runnable from the command line.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::harness::{run_detection, ExperimentConfig};
use crate::hypothesis::enumerate_hypotheses;
use crate::numerics::{eigh, kron, CMatrix, CVector, RVector};
use crate::objective::{
    build_receive_forms, build_transmit_forms, build_waveform_forms, pairwise_distance, real_quadratic, transmit_power,
    weighted_objective,
};
use crate::signal::{AmplitudeVector, NoiseCovariance, Waveform};
use crate::waoa::{fp_surrogate, fp_xi_update, solve_waveform, ReceiveSpectra};

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn random_complex<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn eigen_residual(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let a = random_complex(rng, 6, 6);
    let m = &a + a.adjoint();
    let e = eigh(&m)?;
    let mut worst = 0.0_f64;
    for i in 0..6 {
        let v = e.vectors.column(i);
        worst = worst.max((&m * v - v * Complex64::from(e.values[i])).norm() / m.norm());
    }
    Ok((worst <= 1e-10, format!("max residual {worst:.2e}")))
}

fn kron_shape() -> Result<(bool, String)> {
    let k = kron(&CMatrix::identity(2, 2), &CMatrix::from_element(2, 3, Complex64::new(1.0, 0.0)));
    Ok((
        k.shape() == (4, 6) && k[(2, 3)] == Complex64::new(1.0, 0.0) && k[(0, 3)].norm() == 0.0,
        format!("{:?}", k.shape()),
    ))
}

fn distance_is_two_kls(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let cov = NoiseCovariance::new(RVector::from_vec(vec![0.5, 2.0]), 2)?;
    let inv = cov.dense().try_inverse().unwrap_or_else(|| CMatrix::zeros(4, 4));
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let m = random_complex(rng, 4, 2);
        let (a, b) = (m.column(0).into_owned(), m.column(1).into_owned());
        let kl = |p: &CVector, q: &CVector| 0.5 * ((p - q).adjoint() * &inv * (p - q))[(0, 0)].re;
        worst = worst.max(rel(pairwise_distance(&a, &b, &cov)?, kl(&a, &b) + kl(&b, &a)));
    }
    Ok((worst <= 1e-10, format!("max relative error {worst:.2e}")))
}

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        tx_elements: 6,
        rx_elements: 6,
        tx_feeds: 2,
        rx_feeds: 2,
        snapshots: 2,
        grids: 3,
        max_targets: 1,
        targets: vec![1],
        ..Default::default()
    }
}

fn random_amplitudes<R: Rng>(rng: &mut R, n: usize) -> AmplitudeVector {
    AmplitudeVector::clamped(RVector::from_fn(n, |_, _| rng.random_range(0.05..1.0)))
}

fn form_identities(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let cfg = small_config();
    let ctx = cfg.rhs_context()?;
    let base = enumerate_hypotheses(3, 1)?;
    let raw: Vec<f64> = (0..base.len()).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let space = base.with_probs(raw.iter().map(|p| p / total).collect())?;
    let mut worst = 0.0_f64;
    for _ in 0..10 {
        let x = Waveform::random(rng, 2, 2);
        let psi_t = random_amplitudes(rng, 6);
        let psi_r = random_amplitudes(rng, 6);
        let d = weighted_objective(&space, &x, &psi_t, &psi_r, &ctx)?;
        let xv = x.to_vec();
        let wf = build_waveform_forms(&psi_t, &psi_r, &space, &ctx)?;
        worst = worst.max(rel((xv.adjoint() * &wf.r * &xv)[(0, 0)].re, d));
        worst = worst.max(rel((xv.adjoint() * &wf.s * &xv)[(0, 0)].re, transmit_power(&x, &psi_t, &ctx)?));
        let tf = build_transmit_forms(&x, &psi_r, &space, &ctx)?;
        worst = worst.max(rel(real_quadratic(&tf.r, psi_t.values()), d));
        let rf = build_receive_forms(&x, &psi_t, &space, &ctx)?;
        worst = worst.max(rel(rf.ratio_sum(&psi_r)?, d));
    }
    Ok((worst <= 1e-8, format!("max relative error {worst:.2e}")))
}

fn waveform_dominance(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let a = random_complex(rng, 8, 3);
    let r = &a * a.adjoint();
    let b = random_complex(rng, 8, 8);
    let s = &b * b.adjoint() + CMatrix::identity(8, 8);
    let sol = solve_waveform(&r, &s, 2.0)?;
    let q = |m: &CMatrix, v: &CVector| (v.adjoint() * m * v)[(0, 0)].re;
    let best = q(&r, &sol.value);
    let beaten = (0..1000).any(|_| {
        let v = random_complex(rng, 8, 1).column(0).into_owned();
        let v = &v * Complex64::from((2.0 / q(&s, &v)).sqrt());
        q(&r, &v) > best * (1.0 + 1e-10)
    });
    let power_err = rel(q(&s, &sol.value), 2.0);
    Ok((!beaten && power_err <= 1e-9, format!("power error {power_err:.2e}")))
}

fn xi_step_identity(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let cfg = small_config();
    let ctx = cfg.rhs_context()?;
    let space = enumerate_hypotheses(3, 1)?;
    let x = Waveform::random(rng, 2, 2);
    let psi_t = random_amplitudes(rng, 6);
    let psi_r = random_amplitudes(rng, 6);
    let forms = build_receive_forms(&x, &psi_t, &space, &ctx)?;
    let spectra = ReceiveSpectra::new(&forms)?;
    let aux = fp_xi_update(&psi_r, &spectra)?;
    let err = rel(fp_surrogate(&psi_r, &aux, &spectra), forms.ratio_sum(&psi_r)?);
    Ok((err <= 1e-10, format!("relative error {err:.2e}")))
}

fn noiseless_detection() -> Result<(bool, String)> {
    let cfg = ExperimentConfig {
        tx_elements: 8,
        rx_elements: 8,
        snapshots: 2,
        noise_power: 1e-12,
        targets: vec![1, 3],
        ..Default::default()
    };
    let mut hits = 0;
    for seed in 0..5 {
        let r = run_detection(&cfg, &mut ChaCha8Rng::seed_from_u64(seed))?;
        hits += usize::from(r.correct && r.cycles == 1);
    }
    Ok((hits == 5, format!("{hits}/5 accepted in one cycle")))
}

/// Runs every check; errors count as failures.
pub fn run_selftest() -> Vec<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut out = Vec::new();
    let mut record = |name: &'static str, r: Result<(bool, String)>| {
        let (passed, detail) = r.unwrap_or_else(|e| (false, e.to_string()));
        out.push(CheckOutcome { name, passed, detail });
    };
    record("eigen residual", eigen_residual(&mut rng));
    record("kronecker shape", kron_shape());
    record("distance equals two KLs", distance_is_two_kls(&mut rng));
    record("quadratic-form identities", form_identities(&mut rng));
    record("waveform solver dominance", waveform_dominance(&mut rng));
    record("xi-step substitution", xi_step_identity(&mut rng));
    record("noiseless detection", noiseless_detection());
    out
}
