//! Forward signal chain: transmit surface, target reflection, receive surface
//! and the resulting measurement statistics.
//!
//! Shapes follow the radar model: the waveform `X` is `L_t × I_t` (feeds by
//! snapshots), the radiated signal `S` is `N_t × I_t`, the reflected field `V`
//! is `N_r × I_r` and the received feed signal `Y` is `L_r × I_r`. Transmit
//! and receive snapshot counts are equal.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::hypothesis::{AngularGrid, Hypothesis};
use crate::numerics::{vec_cols, CMatrix, CVector, RVector};
use crate::surface::{steering_vector, Direction, PropagationModel, SurfaceGeometry};

/// Feed signals `X` (`L_t × I_t`); `x = vec_cols(X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    matrix: CMatrix,
}

impl Waveform {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("waveform"));
        }
        Ok(Self { matrix })
    }

    /// Rebuilds `X` from its column-stacked form.
    pub fn from_vec(x: &CVector, feeds: usize) -> Result<Self> {
        Self::new(crate::numerics::unvec_cols(x, feeds)?)
    }

    pub fn zeros(feeds: usize, snapshots: usize) -> Self {
        Self { matrix: CMatrix::zeros(feeds, snapshots) }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn to_vec(&self) -> CVector {
        vec_cols(&self.matrix)
    }

    pub fn feeds(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn snapshots(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self { matrix: self.matrix.map(|z| z * c) }
    }

    /// Draws i.i.d. unit-variance circular Gaussian entries.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, feeds: usize, snapshots: usize) -> Self {
        let matrix = CMatrix::from_fn(feeds, snapshots, |_, _| complex_gaussian(rng, 1.0));
        Self { matrix }
    }
}

/// Element amplitudes, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeVector(RVector);

impl AmplitudeVector {
    pub fn new(values: RVector) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!("amplitude {bad} outside [0, 1]")));
        }
        Ok(Self(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(RVector::from_column_slice(values))
    }

    /// Clamps every entry into `[0, 1]` (NaN becomes 0).
    pub fn clamped(values: RVector) -> Self {
        Self(values.map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }))
    }

    pub fn ones(n: usize) -> Self {
        Self(RVector::from_element(n, 1.0))
    }

    pub fn zeros(n: usize) -> Self {
        Self(RVector::zeros(n))
    }

    pub fn values(&self) -> &RVector {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub direction: Direction,
    pub reflection: Complex64,
}

/// Far-field point targets, pairwise in distinct directions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    targets: Vec<Target>,
}

impl Scene {
    pub fn new(targets: Vec<Target>) -> Result<Self> {
        for (i, a) in targets.iter().enumerate() {
            if targets[..i].iter().any(|b| b.direction == a.direction) {
                return Err(Error::InvalidParameter("scene targets must occupy distinct directions".into()));
            }
        }
        Ok(Self { targets })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }
}

/// One surface (geometry plus its propagation matrices).
#[derive(Debug, Clone)]
pub struct ArraySide {
    pub geometry: SurfaceGeometry,
    pub propagation: PropagationModel,
}

impl ArraySide {
    pub fn new(geometry: SurfaceGeometry, propagation: PropagationModel) -> Result<Self> {
        if geometry.n_elements() != propagation.n_elements() || geometry.n_feeds() != propagation.n_feeds() {
            return Err(Error::dims(
                "ArraySide",
                format!("{}x{}", geometry.n_elements(), geometry.n_feeds()),
                format!("{}x{}", propagation.n_elements(), propagation.n_feeds()),
            ));
        }
        Ok(Self { geometry, propagation })
    }

    pub fn n_elements(&self) -> usize {
        self.geometry.n_elements()
    }

    pub fn n_feeds(&self) -> usize {
        self.geometry.n_feeds()
    }
}

/// Everything needed to map (waveform, amplitudes, hypothesis) to an
/// effective signal and a noise covariance.
#[derive(Debug, Clone)]
pub struct MeasurementContext {
    tx: ArraySide,
    rx: ArraySide,
    wavelength: f64,
    noise_power: f64,
    snapshots: usize,
    grid: AngularGrid,
    grid_reflection: Vec<Complex64>,
    tx_feed_paths: CMatrix,
    rx_feed_paths: CMatrix,
    tx_steering: Vec<CVector>,
    rx_steering: Vec<CVector>,
}

impl MeasurementContext {
    pub fn new(
        tx: ArraySide,
        rx: ArraySide,
        wavelength: f64,
        noise_power: f64,
        snapshots: usize,
        grid: AngularGrid,
        grid_reflection: Vec<Complex64>,
    ) -> Result<Self> {
        if !(noise_power.is_finite() && noise_power > 0.0) {
            return Err(Error::InvalidParameter(format!("noise power must be positive, got {noise_power}")));
        }
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::InvalidParameter("wavelength must be positive".into()));
        }
        if snapshots == 0 {
            return Err(Error::InvalidParameter("need at least one snapshot".into()));
        }
        if grid_reflection.len() != grid.len() {
            return Err(Error::dims("grid reflection", grid.len(), grid_reflection.len()));
        }
        let tx_steering = grid.directions().iter().map(|&d| steering_vector(&tx.geometry, d, wavelength)).collect();
        let rx_steering = grid.directions().iter().map(|&d| steering_vector(&rx.geometry, d, wavelength)).collect();
        let tx_feed_paths = tx.propagation.combined();
        let rx_feed_paths = rx.propagation.combined();
        Ok(Self {
            tx,
            rx,
            wavelength,
            noise_power,
            snapshots,
            grid,
            grid_reflection,
            tx_feed_paths,
            rx_feed_paths,
            tx_steering,
            rx_steering,
        })
    }

    pub fn tx(&self) -> &ArraySide {
        &self.tx
    }

    pub fn rx(&self) -> &ArraySide {
        &self.rx
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
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

    /// `P^t = Q^t ∘ Γ^t`.
    pub fn tx_feed_paths(&self) -> &CMatrix {
        &self.tx_feed_paths
    }

    /// `P^r = Q^r ∘ Γ^r`.
    pub fn rx_feed_paths(&self) -> &CMatrix {
        &self.rx_feed_paths
    }

    pub fn tx_steering(&self, grid_index: usize) -> &CVector {
        &self.tx_steering[grid_index]
    }

    pub fn rx_steering(&self, grid_index: usize) -> &CVector {
        &self.rx_steering[grid_index]
    }

    /// Same context with a different noise power.
    pub fn with_noise_power(&self, noise_power: f64) -> Result<Self> {
        if !(noise_power.is_finite() && noise_power > 0.0) {
            return Err(Error::InvalidParameter("noise power must be positive".into()));
        }
        let mut out = self.clone();
        out.noise_power = noise_power;
        Ok(out)
    }

    /// Same context with every grid reflection coefficient scaled by `c`.
    pub fn with_scaled_reflection(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        out.grid_reflection.iter_mut().for_each(|b| *b *= c);
        out
    }

    /// The targets a hypothesis places on the grid.
    pub fn scene_of(&self, hyp: &Hypothesis) -> Result<Scene> {
        let targets = hyp
            .grid_indices()
            .iter()
            .map(|&j| {
                self.check_grid(j)?;
                Ok(Target { direction: self.grid.directions()[j], reflection: self.grid_reflection[j] })
            })
            .collect::<Result<Vec<_>>>()?;
        Scene::new(targets)
    }

    pub(crate) fn check_grid(&self, j: usize) -> Result<()> {
        if j >= self.grid.len() {
            return Err(Error::UnknownGrid { index: j, grid_len: self.grid.len() });
        }
        Ok(())
    }

    pub(crate) fn check_variables(&self, x: &Waveform, psi_t: &AmplitudeVector, psi_r: &AmplitudeVector) -> Result<()> {
        if x.feeds() != self.tx.n_feeds() || x.snapshots() != self.snapshots {
            return Err(Error::dims(
                "waveform",
                format!("{}x{}", self.tx.n_feeds(), self.snapshots),
                format!("{}x{}", x.feeds(), x.snapshots()),
            ));
        }
        if psi_t.len() != self.tx.n_elements() {
            return Err(Error::dims("transmit amplitudes", self.tx.n_elements(), psi_t.len()));
        }
        if psi_r.len() != self.rx.n_elements() {
            return Err(Error::dims("receive amplitudes", self.rx.n_elements(), psi_r.len()));
        }
        Ok(())
    }
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

fn scale_rows(m: &CMatrix, w: &RVector) -> CMatrix {
    let mut out = m.clone();
    for (i, &wi) in w.iter().enumerate() {
        out.row_mut(i).scale_mut(wi);
    }
    out
}

/// `S = diag(ψ^t) (Q^t ∘ Γ^t) X`.
pub fn transmit(x: &Waveform, psi_t: &AmplitudeVector, tx: &PropagationModel) -> Result<CMatrix> {
    if x.feeds() != tx.n_feeds() {
        return Err(Error::dims("transmit feeds", tx.n_feeds(), x.feeds()));
    }
    if psi_t.len() != tx.n_elements() {
        return Err(Error::dims("transmit amplitudes", tx.n_elements(), psi_t.len()));
    }
    Ok(scale_rows(&(tx.combined() * x.matrix()), psi_t.values()))
}

/// `V = Σ_k β_k a_r(θ_k, φ_k) a_t(θ_k, φ_k)^T S + W`.
pub fn reflect(s: &CMatrix, scene: &Scene, ctx: &MeasurementContext, noise: Option<&CMatrix>) -> Result<CMatrix> {
    if s.nrows() != ctx.tx.n_elements() {
        return Err(Error::dims("reflect input rows", ctx.tx.n_elements(), s.nrows()));
    }
    let mut v = match noise {
        Some(w) => {
            if w.shape() != (ctx.rx.n_elements(), s.ncols()) {
                return Err(Error::dims(
                    "reflect noise",
                    format!("{}x{}", ctx.rx.n_elements(), s.ncols()),
                    format!("{}x{}", w.nrows(), w.ncols()),
                ));
            }
            w.clone()
        }
        None => CMatrix::zeros(ctx.rx.n_elements(), s.ncols()),
    };
    for t in scene.targets() {
        let a_t = steering_vector(&ctx.tx.geometry, t.direction, ctx.wavelength);
        let a_r = steering_vector(&ctx.rx.geometry, t.direction, ctx.wavelength);
        let row = a_t.transpose() * s;
        v += (a_r * row) * t.reflection;
    }
    Ok(v)
}

/// `Y = [diag(ψ^r)(Q^r ∘ Γ^r)]^T V`, returned with `y = vec_cols(Y)`.
pub fn receive(v: &CMatrix, psi_r: &AmplitudeVector, rx: &PropagationModel) -> Result<(CMatrix, CVector)> {
    if v.nrows() != rx.n_elements() {
        return Err(Error::dims("receive input rows", rx.n_elements(), v.nrows()));
    }
    if psi_r.len() != rx.n_elements() {
        return Err(Error::dims("receive amplitudes", rx.n_elements(), psi_r.len()));
    }
    let weighted = scale_rows(&rx.combined(), psi_r.values());
    let y = weighted.transpose() * v;
    let yv = vec_cols(&y);
    Ok((y, yv))
}

/// Per-grid contributions to the effective signal: entry `j` is the noise-free
/// measurement a lone target on grid `j` would produce. Effective signals of
/// hypotheses are sums of these (targets superpose).
pub fn grid_signals(
    x: &Waveform,
    psi_t: &AmplitudeVector,
    psi_r: &AmplitudeVector,
    ctx: &MeasurementContext,
) -> Result<Vec<CVector>> {
    ctx.check_variables(x, psi_t, psi_r)?;
    let radiated = scale_rows(&(ctx.tx_feed_paths() * x.matrix()), psi_t.values());
    let combiner = scale_rows(ctx.rx_feed_paths(), psi_r.values()).transpose();
    (0..ctx.grid.len())
        .map(|j| {
            let t_row = ctx.tx_steering(j).transpose() * &radiated;
            let r_col = &combiner * ctx.rx_steering(j);
            let y = (r_col * t_row) * ctx.grid_reflection[j];
            Ok(vec_cols(&y))
        })
        .collect()
}

/// Sum of the grid contributions selected by `hyp`.
pub fn compose_signal(grid: &[CVector], hyp: &Hypothesis, len: usize) -> Result<CVector> {
    let mut u = CVector::zeros(len);
    for &j in hyp.grid_indices() {
        let g = grid.get(j).ok_or(Error::UnknownGrid { index: j, grid_len: grid.len() })?;
        u += g;
    }
    Ok(u)
}

/// Noise-free measurement `u` under a hypothesis.
pub fn effective_signal(
    hyp: &Hypothesis,
    x: &Waveform,
    psi_t: &AmplitudeVector,
    psi_r: &AmplitudeVector,
    ctx: &MeasurementContext,
) -> Result<CVector> {
    for &j in hyp.grid_indices() {
        ctx.check_grid(j)?;
    }
    let grid = grid_signals(x, psi_t, psi_r, ctx)?;
    compose_signal(&grid, hyp, ctx.rx.n_feeds() * ctx.snapshots)
}

/// Block-diagonal noise covariance `Σ = I_{I_r} ⊗ F` with diagonal `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCovariance {
    feed_variances: RVector,
    snapshots: usize,
}

impl NoiseCovariance {
    pub fn new(feed_variances: RVector, snapshots: usize) -> Result<Self> {
        if feed_variances.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
            return Err(Error::DegenerateCovariance);
        }
        Ok(Self { feed_variances, snapshots })
    }

    /// Diagonal of `F`, one variance per receive feed.
    pub fn feed_variances(&self) -> &RVector {
        &self.feed_variances
    }

    pub fn snapshots(&self) -> usize {
        self.snapshots
    }

    pub fn dim(&self) -> usize {
        self.feed_variances.len() * self.snapshots
    }

    /// Diagonal of `Σ` in `vec_cols` order.
    pub fn diagonal(&self) -> RVector {
        let l = self.feed_variances.len();
        RVector::from_fn(self.dim(), |i, _| self.feed_variances[i % l])
    }

    /// Dense `Σ`.
    pub fn dense(&self) -> CMatrix {
        CMatrix::from_diagonal(&self.diagonal().map(|v| Complex64::new(v, 0.0)))
    }

    pub fn trace(&self) -> f64 {
        self.feed_variances.sum() * self.snapshots as f64
    }

    /// `v^H Σ^{-1} v` without forming `Σ^{-1}`.
    pub fn inverse_quadratic(&self, v: &CVector) -> Result<f64> {
        if v.len() != self.dim() {
            return Err(Error::dims("noise quadratic form", self.dim(), v.len()));
        }
        let l = self.feed_variances.len();
        Ok(v.iter().enumerate().map(|(i, z)| z.norm_sqr() / self.feed_variances[i % l]).sum())
    }
}

/// `F = diag{σ² Σ_n |ψ^r_n q_{n,l} γ_{n,l}|²}` and `Σ = I ⊗ F`.
pub fn noise_covariance(
    psi_r: &AmplitudeVector,
    rx: &PropagationModel,
    noise_power: f64,
    snapshots: usize,
) -> Result<NoiseCovariance> {
    if psi_r.len() != rx.n_elements() {
        return Err(Error::dims("receive amplitudes", rx.n_elements(), psi_r.len()));
    }
    if psi_r.is_zero() {
        return Err(Error::DegenerateCovariance);
    }
    let paths = rx.combined();
    let f = DVector::from_fn(rx.n_feeds(), |l, _| {
        noise_power * psi_r.values().iter().enumerate().map(|(n, &p)| p * p * paths[(n, l)].norm_sqr()).sum::<f64>()
    });
    NoiseCovariance::new(f, snapshots)
}

/// Element-level noise `W` (`N_r × I_r`), i.i.d. circular Gaussian with
/// per-entry variance `σ²`.
pub fn draw_element_noise<R: Rng + ?Sized>(
    rng: &mut R,
    n_elements: usize,
    snapshots: usize,
    noise_power: f64,
) -> CMatrix {
    CMatrix::from_fn(n_elements, snapshots, |_, _| complex_gaussian(rng, noise_power))
}

/// `y = u(scene) + vec_cols([Ψ^r(Q^r ∘ Γ^r)]^T W)`.
pub fn simulate_measurement<R: Rng + ?Sized>(
    scene: &Scene,
    x: &Waveform,
    psi_t: &AmplitudeVector,
    psi_r: &AmplitudeVector,
    ctx: &MeasurementContext,
    rng: &mut R,
) -> Result<CVector> {
    ctx.check_variables(x, psi_t, psi_r)?;
    let s = transmit(x, psi_t, &ctx.tx.propagation)?;
    let w = draw_element_noise(rng, ctx.rx.n_elements(), ctx.snapshots, ctx.noise_power);
    let v = reflect(&s, scene, ctx, Some(&w))?;
    let (_, y) = receive(&v, psi_r, &ctx.rx.propagation)?;
    Ok(y)
}
