//! Weighted relative-entropy objective and the quadratic forms that express it
//! in each block of variables.
//!
//! For equal-covariance Gaussians the symmetric relative entropy between two
//! hypotheses is `(u_i − u_j)^H Σ^{-1} (u_i − u_j)`. The objective sums it
//! over hypothesis pairs with weights `ω_{ij} = p_i p_j`. Holding two of the
//! three variable blocks fixed, the objective is a quadratic form in the
//! waveform, a quadratic form in the transmit amplitudes, and a sum of
//! per-feed ratios of quadratic forms in the receive amplitudes.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hypothesis::HypothesisSpace;
use crate::numerics::{kron, CMatrix, CVector, RMatrix};

type RowCVector = nalgebra::RowDVector<Complex64>;
use crate::signal::{
    compose_signal, grid_signals, noise_covariance, AmplitudeVector, MeasurementContext, NoiseCovariance, Waveform,
};

/// Symmetric table `ω_{ij} = p_i p_j` with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    weights: RMatrix,
}

impl WeightTable {
    pub fn from_probabilities(probs: &[f64]) -> Self {
        let n = probs.len();
        let weights = RMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { probs[i] * probs[j] });
        Self { weights }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn len(&self) -> usize {
        self.weights.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.nrows() == 0
    }

    /// `(i, j, ω_{ij})` for `i > j`, in row order.
    pub fn lower_pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.len();
        (1..n).flat_map(move |i| (0..i).map(move |j| (i, j, self.weights[(i, j)])))
    }
}

/// Symmetric relative entropy `(u_i − u_j)^H Σ^{-1} (u_i − u_j)`.
pub fn pairwise_distance(u_i: &CVector, u_j: &CVector, cov: &NoiseCovariance) -> Result<f64> {
    if u_i.len() != u_j.len() {
        return Err(Error::dims("pairwise distance", u_i.len(), u_j.len()));
    }
    cov.inverse_quadratic(&(u_i - u_j))
}

/// Objective value from precomputed per-grid signals.
pub fn objective_from_signals(space: &HypothesisSpace, grid: &[CVector], cov: &NoiseCovariance) -> Result<f64> {
    let signals = space.hypotheses().iter().map(|h| compose_signal(grid, h, cov.dim())).collect::<Result<Vec<_>>>()?;
    let weights = WeightTable::from_probabilities(space.probs());
    let mut total = 0.0;
    for (i, j, w) in weights.lower_pairs() {
        if w > 0.0 {
            total += w * pairwise_distance(&signals[i], &signals[j], cov)?;
        }
    }
    Ok(total)
}

/// `d̄ = Σ_{i>j} ω_{ij} d(H_i, H_j)` at the given variables, weights taken from
/// the probabilities currently held by `space`.
pub fn weighted_objective(
    space: &HypothesisSpace,
    x: &Waveform,
    psi_t: &AmplitudeVector,
    psi_r: &AmplitudeVector,
    ctx: &MeasurementContext,
) -> Result<f64> {
    let cov = noise_covariance(psi_r, &ctx.rx().propagation, ctx.noise_power(), ctx.snapshots())?;
    let grid = grid_signals(x, psi_t, psi_r, ctx)?;
    objective_from_signals(space, &grid, &cov)
}

/// Transmit power `tr{S S^H}`.
pub fn transmit_power(x: &Waveform, psi_t: &AmplitudeVector, ctx: &MeasurementContext) -> Result<f64> {
    Ok(crate::signal::transmit(x, psi_t, &ctx.tx().propagation)?.norm_squared())
}

/// Quadratic forms in `x`: `x^H R x = d̄`, `x^H S x = tr{S S^H}`.
#[derive(Debug, Clone)]
pub struct WaveformForms {
    pub r: CMatrix,
    pub s: CMatrix,
}

/// Quadratic forms in `ψ^t`: `ψ^T Re{R} ψ = d̄`, `ψ^T S ψ = tr{S S^H}` with
/// `S` diagonal.
#[derive(Debug, Clone)]
pub struct TransmitForms {
    pub r: CMatrix,
    pub s: RMatrix,
}

/// Per-feed forms in `ψ^r`: `Σ_l ψ^T Re{R_l} ψ / ψ^T S_l ψ = d̄`, each `S_l`
/// diagonal and carrying the noise power.
#[derive(Debug, Clone)]
pub struct ReceiveForms {
    pub r: Vec<CMatrix>,
    pub s: Vec<RMatrix>,
}

impl ReceiveForms {
    /// The sum-of-ratios objective at `psi` (real parts of the forms).
    pub fn ratio_sum(&self, psi: &AmplitudeVector) -> Result<f64> {
        let p = psi.values();
        let mut total = 0.0;
        for (r, s) in self.r.iter().zip(&self.s) {
            let num = real_quadratic(r, p);
            let den = p.dot(&(s * p));
            if den <= 0.0 {
                return Err(Error::DegenerateCovariance);
            }
            total += num / den;
        }
        Ok(total)
    }

    pub fn n_feeds(&self) -> usize {
        self.r.len()
    }
}

/// `ψ^T Re{R} ψ` for a real vector.
pub fn real_quadratic(r: &CMatrix, psi: &crate::numerics::RVector) -> f64 {
    let n = psi.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += psi[i] * r[(i, j)].re * psi[j];
        }
    }
    acc
}

/// Hypothesis pairs with positive weight, each as a signed combination of
/// grid cells: `(ω_{ij}, [(grid, +1 | −1)])`.
fn weighted_differences(space: &HypothesisSpace) -> Vec<(f64, Vec<(usize, f64)>)> {
    let weights = WeightTable::from_probabilities(space.probs());
    let hyps = space.hypotheses();
    weights
        .lower_pairs()
        .filter(|&(_, _, w)| w > 0.0)
        .filter_map(|(i, j, w)| {
            let a = hyps[i].grid_indices();
            let b = hyps[j].grid_indices();
            let mut terms: Vec<(usize, f64)> = a.iter().filter(|k| !b.contains(k)).map(|&k| (k, 1.0)).collect();
            terms.extend(b.iter().filter(|k| !a.contains(k)).map(|&k| (k, -1.0)));
            (!terms.is_empty()).then_some((w, terms))
        })
        .collect()
}

fn check_space(space: &HypothesisSpace, ctx: &MeasurementContext) -> Result<()> {
    for h in space.hypotheses() {
        for &j in h.grid_indices() {
            ctx.check_grid(j)?;
        }
    }
    Ok(())
}

/// `r_{l,k} = Σ_n ψ^r_n P^r_{n,l} a_r(k)_n` for every receive feed `l` and grid `k`.
fn receive_gains(psi_r: &AmplitudeVector, ctx: &MeasurementContext) -> Vec<Vec<Complex64>> {
    let p = ctx.rx_feed_paths();
    (0..p.ncols())
        .map(|l| {
            (0..ctx.grid().len())
                .map(|k| {
                    let a = ctx.rx_steering(k);
                    (0..p.nrows()).map(|n| p[(n, l)] * a[n] * psi_r.values()[n]).sum()
                })
                .collect()
        })
        .collect()
}

/// Builds `(R^x, S^x)` for fixed amplitudes.
pub fn build_waveform_forms(
    psi_t: &AmplitudeVector,
    psi_r: &AmplitudeVector,
    space: &HypothesisSpace,
    ctx: &MeasurementContext,
) -> Result<WaveformForms> {
    ctx.check_variables(&Waveform::zeros(ctx.tx().n_feeds(), ctx.snapshots()), psi_t, psi_r)?;
    check_space(space, ctx)?;
    let cov = noise_covariance(psi_r, &ctx.rx().propagation, ctx.noise_power(), ctx.snapshots())?;
    let f = cov.feed_variances();
    let pt = ctx.tx_feed_paths();
    let l_t = pt.ncols();
    let gains = receive_gains(psi_r, ctx);

    // t_k = a_t(k)^T Ψ^t P^t
    let weighted_pt = {
        let mut m = pt.clone();
        for (n, &w) in psi_t.values().iter().enumerate() {
            m.row_mut(n).scale_mut(w);
        }
        m
    };
    let t_rows: Vec<RowCVector> =
        (0..ctx.grid().len()).map(|k| ctx.tx_steering(k).transpose() * &weighted_pt).collect();

    let mut block = CMatrix::zeros(l_t, l_t);
    for (w, terms) in weighted_differences(space) {
        for (l, gain_l) in gains.iter().enumerate() {
            let mut c = RowCVector::zeros(l_t);
            for &(k, sign) in &terms {
                c += &t_rows[k] * (gain_l[k] * ctx.grid_reflection()[k] * sign);
            }
            // conj(c) c^T as an outer product
            let outer = c.adjoint() * &c;
            block += outer.map(|z| z * (w / f[l]));
        }
    }
    let block = (&block + block.adjoint()).scale(0.5);
    let power_block = weighted_pt.adjoint() * &weighted_pt;
    let id = CMatrix::identity(ctx.snapshots(), ctx.snapshots());
    Ok(WaveformForms { r: kron(&id, &block), s: kron(&id, &power_block) })
}

/// Builds `(R^t, S^t)` for a fixed waveform and receive amplitudes.
pub fn build_transmit_forms(
    x: &Waveform,
    psi_r: &AmplitudeVector,
    space: &HypothesisSpace,
    ctx: &MeasurementContext,
) -> Result<TransmitForms> {
    ctx.check_variables(x, &AmplitudeVector::ones(ctx.tx().n_elements()), psi_r)?;
    check_space(space, ctx)?;
    let cov = noise_covariance(psi_r, &ctx.rx().propagation, ctx.noise_power(), ctx.snapshots())?;
    let f = cov.feed_variances();
    let n_t = ctx.tx().n_elements();
    let z = ctx.tx_feed_paths() * x.matrix();
    let s = RMatrix::from_diagonal(&crate::numerics::RVector::from_fn(n_t, |n, _| z.row(n).norm_squared()));
    let gains = receive_gains(psi_r, ctx);

    let mut r = CMatrix::zeros(n_t, n_t);
    for (w, terms) in weighted_differences(space) {
        for (l, gain_l) in gains.iter().enumerate() {
            let mut b = CVector::zeros(n_t);
            for &(k, sign) in &terms {
                b += ctx.tx_steering(k) * (gain_l[k] * ctx.grid_reflection()[k] * sign);
            }
            let mut m = z.clone();
            for n in 0..n_t {
                m.row_mut(n).scale_mut_complex(b[n]);
            }
            r += (&m * m.adjoint()).map(|v| v * (w / f[l]));
        }
    }
    let r = (&r + r.adjoint()).scale(0.5);
    Ok(TransmitForms { r, s })
}

/// Builds `({R^r_l}, {S^r_l})` for a fixed waveform and transmit amplitudes.
pub fn build_receive_forms(
    x: &Waveform,
    psi_t: &AmplitudeVector,
    space: &HypothesisSpace,
    ctx: &MeasurementContext,
) -> Result<ReceiveForms> {
    ctx.check_variables(x, psi_t, &AmplitudeVector::ones(ctx.rx().n_elements()))?;
    check_space(space, ctx)?;
    let pr = ctx.rx_feed_paths();
    let (n_r, l_r) = pr.shape();
    let mut radiated = ctx.tx_feed_paths() * x.matrix();
    for (n, &w) in psi_t.values().iter().enumerate() {
        radiated.row_mut(n).scale_mut(w);
    }
    let t_rows: Vec<RowCVector> = (0..ctx.grid().len()).map(|k| ctx.tx_steering(k).transpose() * &radiated).collect();

    let mut r = vec![CMatrix::zeros(n_r, n_r); l_r];
    for (w, terms) in weighted_differences(space) {
        let mut kmat = CMatrix::zeros(n_r, ctx.snapshots());
        for &(k, sign) in &terms {
            kmat += ctx.rx_steering(k) * &t_rows[k] * (ctx.grid_reflection()[k] * sign);
        }
        for (l, r_l) in r.iter_mut().enumerate() {
            let mut m = kmat.clone();
            for n in 0..n_r {
                m.row_mut(n).scale_mut_complex(pr[(n, l)]);
            }
            *r_l += (&m * m.adjoint()).scale(w);
        }
    }
    let r = r.into_iter().map(|m| (&m + m.adjoint()).scale(0.5)).collect();
    let s = (0..l_r)
        .map(|l| {
            RMatrix::from_diagonal(&crate::numerics::RVector::from_fn(n_r, |n, _| {
                ctx.noise_power() * pr[(n, l)].norm_sqr()
            }))
        })
        .collect();
    Ok(ReceiveForms { r, s })
}

trait ScaleComplex {
    fn scale_mut_complex(&mut self, c: Complex64);
}

impl<S> ScaleComplex for nalgebra::Matrix<Complex64, nalgebra::U1, nalgebra::Dyn, S>
where
    S: nalgebra::StorageMut<Complex64, nalgebra::U1, nalgebra::Dyn>,
{
    fn scale_mut_complex(&mut self, c: Complex64) {
        for z in self.iter_mut() {
            *z *= c;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypothesis::{enumerate_hypotheses, Hypothesis};
    use crate::numerics::{eigh, testing::random_complex};
    use crate::signal::fixtures::{context, random_amplitudes, Dims};
    use crate::signal::transmit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_space<R: Rng>(rng: &mut R, grids: usize, k_max: usize) -> HypothesisSpace {
        let s = enumerate_hypotheses(grids, k_max).unwrap();
        let raw: Vec<f64> = (0..s.len()).map(|_| rng.random_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        s.with_probs(raw.iter().map(|v| v / total).collect()).unwrap()
    }

    fn dims() -> Dims {
        Dims { n_t: 6, n_r: 6, l_t: 2, l_r: 2, snapshots: 2, grids: 3 }
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn distance_examples() {
        let cov = NoiseCovariance::new(crate::numerics::RVector::from_element(2, 1.0), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_complex(&mut rng, 4, 2);
        let (a, b) = (m.column(0).into_owned(), m.column(1).into_owned());
        assert_eq!(pairwise_distance(&a, &a, &cov).unwrap(), 0.0);
        assert!(close(pairwise_distance(&a, &b, &cov).unwrap(), (&a - &b).norm_squared(), 1e-14));
    }

    #[test]
    fn distance_equals_two_gaussian_kls() {
        let cov = NoiseCovariance::new(crate::numerics::RVector::from_vec(vec![0.4, 2.5]), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = random_complex(&mut rng, 6, 2);
        let (a, b) = (m.column(0).into_owned(), m.column(1).into_owned());
        // equal-covariance Gaussian KL: ½ Δ^H Σ^{-1} Δ in each direction
        let inv = cov.dense().try_inverse().unwrap();
        let kl = |p: &CVector, q: &CVector| 0.5 * ((p - q).adjoint() * &inv * (p - q))[(0, 0)].re;
        let oracle = kl(&a, &b) + kl(&b, &a);
        assert!(close(pairwise_distance(&a, &b, &cov).unwrap(), oracle, 1e-10));
    }

    #[test]
    fn objective_examples() {
        let ctx = context(&dims(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Waveform::random(&mut rng, 2, 2);
        let psi_r = random_amplitudes(&mut rng, 6);
        let space = random_space(&mut rng, 3, 1);
        // zero transmit amplitudes: every hypothesis looks like H0
        let zero = weighted_objective(&space, &x, &AmplitudeVector::zeros(6), &psi_r, &ctx).unwrap();
        assert_eq!(zero, 0.0);

        let psi_t = random_amplitudes(&mut rng, 6);
        let pair =
            HypothesisSpace::new(vec![Hypothesis::null(), Hypothesis::new(vec![1]).unwrap()], vec![0.3, 0.7]).unwrap();
        let d = weighted_objective(&pair, &x, &psi_t, &psi_r, &ctx).unwrap();
        let u1 = crate::signal::effective_signal(&pair.hypotheses()[1], &x, &psi_t, &psi_r, &ctx).unwrap();
        let cov = noise_covariance(&psi_r, &ctx.rx().propagation, 1.0, 2).unwrap();
        let expected = 0.3 * 0.7 * pairwise_distance(&u1, &CVector::zeros(u1.len()), &cov).unwrap();
        assert!(close(d, expected, 1e-12));
    }

    #[test]
    fn objective_matches_double_loop() {
        let ctx = context(&dims(), 0.8);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Waveform::random(&mut rng, 2, 2);
        let psi_t = random_amplitudes(&mut rng, 6);
        let psi_r = random_amplitudes(&mut rng, 6);
        let hyps = vec![Hypothesis::null(), Hypothesis::new(vec![0]).unwrap(), Hypothesis::new(vec![1, 2]).unwrap()];
        let space = HypothesisSpace::new(hyps.clone(), vec![0.2, 0.5, 0.3]).unwrap();
        let d = weighted_objective(&space, &x, &psi_t, &psi_r, &ctx).unwrap();
        let cov = noise_covariance(&psi_r, &ctx.rx().propagation, 0.8, 2).unwrap();
        let dense_inv = cov.dense().try_inverse().unwrap();
        let u: Vec<CVector> =
            hyps.iter().map(|h| crate::signal::effective_signal(h, &x, &psi_t, &psi_r, &ctx).unwrap()).collect();
        let p = space.probs();
        let mut oracle = 0.0;
        for i in 1..3 {
            for j in 0..i {
                let delta = &u[i] - &u[j];
                oracle += p[i] * p[j] * (delta.adjoint() * &dense_inv * &delta)[(0, 0)].re;
            }
        }
        assert!(close(d, oracle, 1e-12));
    }

    #[test]
    fn objective_is_permutation_invariant() {
        let ctx = context(&dims(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Waveform::random(&mut rng, 2, 2);
        let psi_t = random_amplitudes(&mut rng, 6);
        let psi_r = random_amplitudes(&mut rng, 6);
        let space = random_space(&mut rng, 3, 2);
        let mut hyps = space.hypotheses().to_vec();
        let mut probs = space.probs().to_vec();
        hyps.reverse();
        probs.reverse();
        let flipped = HypothesisSpace::new(hyps, probs).unwrap();
        let a = weighted_objective(&space, &x, &psi_t, &psi_r, &ctx).unwrap();
        let b = weighted_objective(&flipped, &x, &psi_t, &psi_r, &ctx).unwrap();
        assert!(close(a, b, 1e-12));
        let w = WeightTable::from_probabilities(space.probs());
        for i in 0..w.len() {
            assert_eq!(w.get(i, i), 0.0);
            for j in 0..w.len() {
                assert_eq!(w.get(i, j), w.get(j, i));
            }
        }
    }

    #[test]
    fn waveform_forms_reproduce_power_and_objective() {
        let ctx = context(&dims(), 1.3);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let psi_t = random_amplitudes(&mut rng, 6);
        let psi_r = random_amplitudes(&mut rng, 6);
        let space = random_space(&mut rng, 3, 2);
        let forms = build_waveform_forms(&psi_t, &psi_r, &space, &ctx).unwrap();
        for _ in 0..20 {
            let x = Waveform::random(&mut rng, 2, 2);
            let xv = x.to_vec();
            let power = (xv.adjoint() * &forms.s * &xv)[(0, 0)].re;
            let obj = (xv.adjoint() * &forms.r * &xv)[(0, 0)].re;
            let s = transmit(&x, &psi_t, &ctx.tx().propagation).unwrap();
            assert!(close(power, s.norm_squared(), 1e-8));
            let direct = weighted_objective(&space, &x, &psi_t, &psi_r, &ctx).unwrap();
            assert!(close(obj, direct, 1e-8), "{obj} vs {direct}");
        }
    }

    #[test]
    fn waveform_forms_degenerate_cases() {
        let ctx = context(&dims(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let psi_r = random_amplitudes(&mut rng, 6);
        let space = random_space(&mut rng, 3, 1);
        let forms = build_waveform_forms(&AmplitudeVector::zeros(6), &psi_r, &space, &ctx).unwrap();
        assert!(forms.r.iter().all(|z| z.norm() == 0.0));

        let one = Dims { n_t: 1, n_r: 1, l_t: 1, l_r: 1, snapshots: 1, grids: 2 };
        let ctx = context(&one, 1.0);
        let psi = AmplitudeVector::from_slice(&[0.6]).unwrap();
        let space = enumerate_hypotheses(2, 1).unwrap();
        let forms = build_waveform_forms(&psi, &AmplitudeVector::ones(1), &space, &ctx).unwrap();
        let p = ctx.tx().propagation.attenuation()[(0, 0)];
        assert!(close(forms.s[(0, 0)].re, (0.6 * p).powi(2), 1e-14));
    }

    #[test]
    fn transmit_forms_reproduce_power_and_objective() {
        let ctx = context(&dims(), 0.9);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Waveform::random(&mut rng, 2, 2);
        let psi_r = random_amplitudes(&mut rng, 6);
        let space = random_space(&mut rng, 3, 2);
        let forms = build_transmit_forms(&x, &psi_r, &space, &ctx).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    assert_eq!(forms.s[(i, j)], 0.0);
                }
            }
        }
        for _ in 0..20 {
            let psi_t = random_amplitudes(&mut rng, 6);
            let p = psi_t.values();
            let power = p.dot(&(&forms.s * p));
            let s = transmit(&x, &psi_t, &ctx.tx().propagation).unwrap();
            assert!(close(power, s.norm_squared(), 1e-8));
            let obj = real_quadratic(&forms.r, p);
            let direct = weighted_objective(&space, &x, &psi_t, &psi_r, &ctx).unwrap();
            assert!(close(obj, direct, 1e-8), "{obj} vs {direct}");
        }
        let zero = build_transmit_forms(&Waveform::zeros(2, 2), &psi_r, &space, &ctx).unwrap();
        assert!(zero.r.iter().all(|z| z.norm() == 0.0));
        assert!(zero.s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn receive_forms_reproduce_objective() {
        let ctx = context(&dims(), 1.7);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Waveform::random(&mut rng, 2, 2);
        let psi_t = random_amplitudes(&mut rng, 6);
        let space = random_space(&mut rng, 3, 2);
        let forms = build_receive_forms(&x, &psi_t, &space, &ctx).unwrap();
        let pr = ctx.rx_feed_paths();
        for (l, s) in forms.s.iter().enumerate() {
            for n in 0..6 {
                let g = ctx.rx().propagation.attenuation()[(n, l)];
                assert!(close(s[(n, n)], 1.7 * g * g, 1e-12));
                assert!(close(pr[(n, l)].norm_sqr(), g * g, 1e-12));
            }
        }
        for _ in 0..20 {
            let psi_r = random_amplitudes(&mut rng, 6);
            let ratio = forms.ratio_sum(&psi_r).unwrap();
            let direct = weighted_objective(&space, &x, &psi_t, &psi_r, &ctx).unwrap();
            assert!(close(ratio, direct, 1e-8), "{ratio} vs {direct}");
        }
    }

    #[test]
    fn receive_forms_vanish_when_every_hypothesis_is_empty() {
        let ctx = context(&dims(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = Waveform::random(&mut rng, 2, 2);
        let psi_t = random_amplitudes(&mut rng, 6);
        let space = HypothesisSpace::new(vec![Hypothesis::null(), Hypothesis::null()], vec![0.5, 0.5]).unwrap();
        let forms = build_receive_forms(&x, &psi_t, &space, &ctx).unwrap();
        assert!(forms.r.iter().all(|m| m.iter().all(|z| z.norm() == 0.0)));
    }

    #[test]
    fn forms_are_psd_and_objective_is_quadratic() {
        let ctx = context(&dims(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Waveform::random(&mut rng, 2, 2);
        let psi_t = random_amplitudes(&mut rng, 6);
        let psi_r = random_amplitudes(&mut rng, 6);
        let space = random_space(&mut rng, 3, 2);
        let wf = build_waveform_forms(&psi_t, &psi_r, &space, &ctx).unwrap();
        let tf = build_transmit_forms(&x, &psi_r, &space, &ctx).unwrap();
        let rf = build_receive_forms(&x, &psi_t, &space, &ctx).unwrap();
        let mut mats = vec![wf.r, wf.s, tf.r];
        mats.extend(rf.r);
        for m in &mats {
            let e = eigh(m).unwrap();
            let lmax = e.values[0];
            assert!(e.values.iter().all(|&v| v >= -1e-10 * lmax));
        }
        let d = weighted_objective(&space, &x, &psi_t, &psi_r, &ctx).unwrap();
        let c = Complex64::new(-1.3, 0.4);
        let dc = weighted_objective(&space, &x.scaled(c), &psi_t, &psi_r, &ctx).unwrap();
        assert!(close(dc, c.norm_sqr() * d, 1e-12));
    }
}
