//! Surface geometry, feed-to-element propagation and far-field steering.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{CMatrix, CVector, RMatrix};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Free-space wavelength in meters for a carrier frequency in Hz.
pub fn wavelength(frequency_hz: f64) -> f64 {
    SPEED_OF_LIGHT / frequency_hz
}

/// Azimuth `θ ∈ [0, 2π)` and polar angle `φ ∈ [0, π/2]`, both in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    azimuth: f64,
    polar: f64,
}

impl Direction {
    /// The azimuth is wrapped into `[0, 2π)`; the polar angle must already lie
    /// in `[0, π/2]`.
    pub fn new(azimuth: f64, polar: f64) -> Result<Self> {
        if !azimuth.is_finite() || !polar.is_finite() {
            return Err(Error::InvalidParameter("direction angles must be finite".into()));
        }
        if !(0.0..=PI / 2.0).contains(&polar) {
            return Err(Error::InvalidParameter(format!("polar angle {polar} outside [0, π/2]")));
        }
        let mut az = azimuth.rem_euclid(TAU);
        if az >= TAU {
            az = 0.0;
        }
        Ok(Self { azimuth: az, polar })
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn polar(&self) -> f64 {
        self.polar
    }

    /// Unit propagation vector `(sin φ cos θ, sin φ sin θ, cos φ)`.
    pub fn unit_vector(&self) -> Vector3<f64> {
        let (st, ct) = self.azimuth.sin_cos();
        let (sp, cp) = self.polar.sin_cos();
        Vector3::new(sp * ct, sp * st, cp)
    }
}

/// Where the feeds of a planar surface sit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeedLayout {
    /// Feeds evenly spaced along the lower edge, one element spacing outside
    /// the first row, in the surface plane.
    #[default]
    Edge,
    /// Feeds co-located with the given (0-based) elements.
    AtElements(Vec<usize>),
    /// Explicit feed coordinates in meters.
    Positions(Vec<[f64; 3]>),
}

/// Element and feed layout of a planar surface in the `z = 0` plane.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGeometry {
    element_positions: Vec<Vector3<f64>>,
    feed_positions: Vec<Vector3<f64>>,
    element_spacing: f64,
    rows: usize,
    cols: usize,
}

impl SurfaceGeometry {
    /// Builds a centered `rows × cols` grid. Elements are numbered row-major.
    pub fn planar(rows: usize, cols: usize, spacing: f64, feeds: &FeedLayout) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidParameter("surface needs at least one element".into()));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidParameter(format!("element spacing must be positive, got {spacing}")));
        }
        let x0 = (cols as f64 - 1.0) / 2.0;
        let y0 = (rows as f64 - 1.0) / 2.0;
        let element_positions: Vec<_> = (0..rows)
            .flat_map(|r| {
                (0..cols).map(move |c| Vector3::new((c as f64 - x0) * spacing, (r as f64 - y0) * spacing, 0.0))
            })
            .collect();

        let feed_positions = match feeds {
            FeedLayout::Edge => {
                return Err(Error::InvalidParameter(
                    "edge layout needs a feed count; use planar_with_edge_feeds".into(),
                ))
            }
            FeedLayout::AtElements(idx) => idx
                .iter()
                .map(|&i| {
                    element_positions
                        .get(i)
                        .copied()
                        .ok_or_else(|| Error::InvalidParameter(format!("feed element {i} out of range")))
                })
                .collect::<Result<Vec<_>>>()?,
            FeedLayout::Positions(p) => p.iter().map(|q| Vector3::new(q[0], q[1], q[2])).collect(),
        };
        Self::from_parts(element_positions, feed_positions, spacing, rows, cols)
    }

    /// Centered grid with `n_feeds` feeds placed by [`FeedLayout::Edge`].
    pub fn planar_with_edge_feeds(rows: usize, cols: usize, spacing: f64, n_feeds: usize) -> Result<Self> {
        if n_feeds == 0 {
            return Err(Error::InvalidParameter("surface needs at least one feed".into()));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidParameter(format!("element spacing must be positive, got {spacing}")));
        }
        let width = cols as f64 * spacing;
        let x_start = -width / 2.0;
        let y_edge = -((rows as f64 - 1.0) / 2.0) * spacing - spacing;
        let feeds = (0..n_feeds)
            .map(|l| {
                let x = x_start + (l as f64 + 0.5) * width / n_feeds as f64;
                [x, y_edge, 0.0]
            })
            .collect();
        Self::planar(rows, cols, spacing, &FeedLayout::Positions(feeds))
    }

    /// Planar surface with `n_elements` arranged by [`grid_shape`].
    pub fn with_element_count(n_elements: usize, spacing: f64, n_feeds: usize, layout: &FeedLayout) -> Result<Self> {
        let (rows, cols) = grid_shape(n_elements)?;
        match layout {
            FeedLayout::Edge => Self::planar_with_edge_feeds(rows, cols, spacing, n_feeds),
            other => Self::planar(rows, cols, spacing, other),
        }
    }

    fn from_parts(
        element_positions: Vec<Vector3<f64>>,
        feed_positions: Vec<Vector3<f64>>,
        element_spacing: f64,
        rows: usize,
        cols: usize,
    ) -> Result<Self> {
        if feed_positions.is_empty() {
            return Err(Error::InvalidParameter("surface needs at least one feed".into()));
        }
        if feed_positions.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("feed positions"));
        }
        Ok(Self { element_positions, feed_positions, element_spacing, rows, cols })
    }

    pub fn n_elements(&self) -> usize {
        self.element_positions.len()
    }

    pub fn n_feeds(&self) -> usize {
        self.feed_positions.len()
    }

    pub fn element_positions(&self) -> &[Vector3<f64>] {
        &self.element_positions
    }

    pub fn feed_positions(&self) -> &[Vector3<f64>] {
        &self.feed_positions
    }

    pub fn element_spacing(&self) -> f64 {
        self.element_spacing
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Feed-to-element distances `D[n, l]` in meters.
    pub fn feed_distances(&self) -> RMatrix {
        RMatrix::from_fn(self.n_elements(), self.n_feeds(), |n, l| {
            (self.element_positions[n] - self.feed_positions[l]).norm()
        })
    }
}

/// Most square `rows × cols` factorization of `n` with `rows ≤ cols`.
pub fn grid_shape(n: usize) -> Result<(usize, usize)> {
    if n == 0 {
        return Err(Error::InvalidParameter("surface needs at least one element".into()));
    }
    let mut rows = (n as f64).sqrt().floor() as usize;
    while rows > 1 && n % rows != 0 {
        rows -= 1;
    }
    Ok((rows.max(1), n / rows.max(1)))
}

/// In-surface phase shifts `Q` and attenuations `Γ` between feeds and elements.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationModel {
    phase: CMatrix,
    attenuation: RMatrix,
    refractive_index: f64,
    attenuation_per_meter: f64,
    wavelength: f64,
}

impl PropagationModel {
    /// `q = exp(−j2πνD/λ)`, `γ = exp(−αD)` with `α` in 1/m and `D` in meters.
    pub fn new(
        geometry: &SurfaceGeometry,
        refractive_index: f64,
        attenuation_per_meter: f64,
        wavelength: f64,
    ) -> Result<Self> {
        if ![refractive_index, attenuation_per_meter, wavelength].iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("propagation parameters"));
        }
        if refractive_index <= 0.0 || attenuation_per_meter < 0.0 || wavelength <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "need ν > 0, α ≥ 0, λ > 0 (got ν={refractive_index}, α={attenuation_per_meter}, λ={wavelength})"
            )));
        }
        let d = geometry.feed_distances();
        let k = TAU * refractive_index / wavelength;
        let phase = d.map(|dist| Complex64::from_polar(1.0, -k * dist));
        let attenuation = d.map(|dist| (-attenuation_per_meter * dist).exp());
        Ok(Self { phase, attenuation, refractive_index, attenuation_per_meter, wavelength })
    }

    /// `Q` (N × L, unit-modulus entries).
    pub fn phase(&self) -> &CMatrix {
        &self.phase
    }

    /// `Γ` (N × L, entries in (0, 1]).
    pub fn attenuation(&self) -> &RMatrix {
        &self.attenuation
    }

    /// `Q ∘ Γ`.
    pub fn combined(&self) -> CMatrix {
        self.phase.zip_map(&self.attenuation, |q, g| q * g)
    }

    pub fn n_elements(&self) -> usize {
        self.phase.nrows()
    }

    pub fn n_feeds(&self) -> usize {
        self.phase.ncols()
    }

    pub fn refractive_index(&self) -> f64 {
        self.refractive_index
    }

    pub fn attenuation_per_meter(&self) -> f64 {
        self.attenuation_per_meter
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }
}

/// Plane-wave steering vector: entry `n` is `exp(j 2π/λ ⟨p_n, k(θ, φ)⟩)`.
pub fn steering_vector(geometry: &SurfaceGeometry, dir: Direction, wavelength: f64) -> CVector {
    let k = dir.unit_vector() * (TAU / wavelength);
    CVector::from_iterator(
        geometry.n_elements(),
        geometry.element_positions().iter().map(|p| Complex64::from_polar(1.0, p.dot(&k))),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_element_colocated_feed() {
        let g = SurfaceGeometry::planar(1, 1, 0.01, &FeedLayout::AtElements(vec![0])).unwrap();
        assert_eq!(g.feed_distances()[(0, 0)], 0.0);
    }

    #[test]
    fn collinear_pair_distances() {
        let s = 0.004;
        let g = SurfaceGeometry::planar(1, 2, s, &FeedLayout::AtElements(vec![0])).unwrap();
        let d = g.feed_distances();
        assert_eq!(d[(0, 0)], 0.0);
        assert!((d[(1, 0)] - s).abs() < 1e-15);
    }

    #[test]
    fn square_grid_corner_feed() {
        let s = 1.0;
        let g = SurfaceGeometry::planar(2, 2, s, &FeedLayout::Positions(vec![[-1.0, -1.0, 0.0]])).unwrap();
        // elements at (±0.5, ±0.5); hand-computed distances from (-1, -1)
        let expected = [
            (0.5f64 * 0.5 + 0.5 * 0.5).sqrt(),
            (1.5f64 * 1.5 + 0.5 * 0.5).sqrt(),
            (0.5f64 * 0.5 + 1.5 * 1.5).sqrt(),
            (1.5f64 * 1.5 + 1.5 * 1.5).sqrt(),
        ];
        let d = g.feed_distances();
        for (n, e) in expected.iter().enumerate() {
            assert!((d[(n, 0)] - e).abs() < 1e-14, "element {n}");
        }
    }

    #[test]
    fn edge_feeds_sit_below_first_row() {
        let s = 0.001;
        let g = SurfaceGeometry::planar_with_edge_feeds(2, 4, s, 2).unwrap();
        let feeds = g.feed_positions();
        assert_eq!(feeds.len(), 2);
        assert!((feeds[0].y - (-0.5 * s - s)).abs() < 1e-15);
        assert!((feeds[0].x + s).abs() < 1e-15);
        assert!((feeds[1].x - s).abs() < 1e-15);
    }

    #[test]
    fn invalid_surfaces() {
        assert!(SurfaceGeometry::planar(0, 2, 0.1, &FeedLayout::AtElements(vec![0])).is_err());
        assert!(SurfaceGeometry::planar(1, 2, 0.0, &FeedLayout::AtElements(vec![0])).is_err());
        assert!(SurfaceGeometry::planar(1, 2, 0.1, &FeedLayout::AtElements(vec![])).is_err());
        assert!(SurfaceGeometry::planar_with_edge_feeds(2, 2, 0.1, 0).is_err());
        assert!(grid_shape(0).is_err());
    }

    #[test]
    fn grid_shapes() {
        assert_eq!(grid_shape(1).unwrap(), (1, 1));
        assert_eq!(grid_shape(8).unwrap(), (2, 4));
        assert_eq!(grid_shape(16).unwrap(), (4, 4));
        assert_eq!(grid_shape(24).unwrap(), (4, 6));
        assert_eq!(grid_shape(7).unwrap(), (1, 7));
    }

    #[test]
    fn propagation_zero_and_full_wavelength_paths() {
        let lambda = 0.01;
        let nu = 3f64.sqrt();
        let g = SurfaceGeometry::planar(1, 2, lambda / nu, &FeedLayout::AtElements(vec![0])).unwrap();
        let p = PropagationModel::new(&g, nu, 5.0, lambda).unwrap();
        assert!((p.phase()[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert_eq!(p.attenuation()[(0, 0)], 1.0);
        // D = λ/ν wraps the phase by a full turn
        assert!((p.phase()[(1, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn propagation_scalar_formula() {
        let g = SurfaceGeometry::planar(1, 1, 0.01, &FeedLayout::Positions(vec![[0.005, 0.0, 0.0]])).unwrap();
        let nu = 3f64.sqrt();
        let p = PropagationModel::new(&g, nu, 5.0, 0.01).unwrap();
        let expected_q = Complex64::from_polar(1.0, -PI * nu);
        assert!((p.phase()[(0, 0)] - expected_q).norm() < 1e-12);
        assert!((p.attenuation()[(0, 0)] - (-0.025f64).exp()).abs() < 1e-15);
        assert!((p.attenuation()[(0, 0)] - 0.97531).abs() < 1e-5);
    }

    #[test]
    fn propagation_rejects_bad_parameters() {
        let g = SurfaceGeometry::planar(1, 1, 0.01, &FeedLayout::AtElements(vec![0])).unwrap();
        assert!(PropagationModel::new(&g, 0.0, 5.0, 0.01).is_err());
        assert!(PropagationModel::new(&g, 1.0, -1.0, 0.01).is_err());
        assert!(PropagationModel::new(&g, 1.0, 5.0, f64::NAN).is_err());
    }

    #[test]
    fn permuting_feeds_permutes_columns() {
        let feeds = vec![[0.0, -0.01, 0.0], [0.003, -0.01, 0.0]];
        let mut swapped = feeds.clone();
        swapped.swap(0, 1);
        let a = SurfaceGeometry::planar(2, 3, 0.002, &FeedLayout::Positions(feeds)).unwrap();
        let b = SurfaceGeometry::planar(2, 3, 0.002, &FeedLayout::Positions(swapped)).unwrap();
        let pa = PropagationModel::new(&a, 1.7, 5.0, 0.01).unwrap();
        let pb = PropagationModel::new(&b, 1.7, 5.0, 0.01).unwrap();
        assert_eq!(pa.phase().column(0), pb.phase().column(1));
        assert_eq!(pa.attenuation().column(1), pb.attenuation().column(0));
    }

    #[test]
    fn boresight_steering_is_all_ones() {
        let g = SurfaceGeometry::planar_with_edge_feeds(3, 3, 0.003, 1).unwrap();
        let a = steering_vector(&g, Direction::new(1.2, 0.0).unwrap(), 0.01);
        for z in a.iter() {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn half_wavelength_pair_endfire_phase() {
        let lambda = 0.01;
        let g = SurfaceGeometry::planar(1, 2, lambda / 2.0, &FeedLayout::AtElements(vec![0])).unwrap();
        let a = steering_vector(&g, Direction::new(0.0, PI / 2.0).unwrap(), lambda);
        let rel = (a[1] / a[0]).arg();
        assert!((rel.abs() - PI).abs() < 1e-9);
    }

    #[test]
    fn steering_reflection_symmetry() {
        let g = SurfaceGeometry::planar_with_edge_feeds(3, 4, 0.002, 1).unwrap();
        let d = Direction::new(0.7, PI / 2.0).unwrap();
        let r = Direction::new(0.7 + PI, PI / 2.0).unwrap();
        let a = steering_vector(&g, d, 0.01);
        let b = steering_vector(&g, r, 0.01);
        assert!((a.map(|z| z.conj()) - b).norm() < 1e-12);
    }

    #[test]
    fn direction_validation() {
        assert!(Direction::new(0.0, 2.0).is_err());
        let d = Direction::new(-PI / 2.0, 0.1).unwrap();
        assert!((d.azimuth() - 1.5 * PI).abs() < 1e-12);
    }
}
