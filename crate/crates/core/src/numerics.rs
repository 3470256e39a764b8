//! Dense complex linear algebra shared by the signal models and solvers.
//!
//! All vectorization in the crate stacks columns: `vec_cols(X)` places column
//! 0 first, then column 1, and so on. With snapshots stored as columns this
//! groups a measurement by snapshot, which is what makes the noise covariance
//! `I ⊗ F` block diagonal.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

/// Default relative cut-off below which eigenvalues are treated as zero.
pub const DEFAULT_REL_TOL: f64 = 1e-10;

/// Relative slack for eigenvalues that are negative only through rounding.
const PSD_SLACK: f64 = 1e-10;

/// Modulus under which an eigenvector component is ignored by the phase convention.
const PHASE_PIVOT_TOL: f64 = 1e-12;

/// Eigen-decomposition of a Hermitian matrix.
///
/// `values` are sorted in descending order and `vectors` holds the matching
/// orthonormal eigenvectors as columns. Each column is rotated so that its
/// first component with modulus above 1e-12 is real and positive.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: RVector,
    pub vectors: CMatrix,
}

impl HermitianEig {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Reassembles `V diag(f(λ)) V^H`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            for i in 0..n {
                scaled[(i, j)] *= w;
            }
        }
        &scaled * self.vectors.adjoint()
    }
}

/// Eigen-decomposition of a real symmetric matrix, same ordering and sign
/// convention as [`HermitianEig`].
#[derive(Debug, Clone)]
pub struct SymmetricEig {
    pub values: RVector,
    pub vectors: RMatrix,
}

fn check_square<T>(m: &DMatrix<T>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NonSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

/// Hermitian eigen-decomposition. The input is symmetrized as `(M + M^H)/2`
/// before decomposing.
pub fn eigh(m: &CMatrix) -> Result<HermitianEig> {
    let n = check_square(m)?;
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("eigh input"));
    }
    if n == 0 {
        return Ok(HermitianEig { values: RVector::zeros(0), vectors: CMatrix::zeros(0, 0) });
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut values = RVector::zeros(n);
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let mut col = eig.eigenvectors.column(src).into_owned();
        let norm = col.norm();
        if norm > 0.0 {
            col /= Complex64::new(norm, 0.0);
        }
        if let Some(pivot) = col.iter().find(|z| z.norm() > PHASE_PIVOT_TOL) {
            let rot = pivot.conj() / pivot.norm();
            col *= rot;
        }
        vectors.set_column(dst, &col);
    }
    Ok(HermitianEig { values, vectors })
}

/// Real symmetric eigen-decomposition (input symmetrized first).
pub fn eigh_symmetric(m: &RMatrix) -> Result<SymmetricEig> {
    let n = check_square(m)?;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eigh_symmetric input"));
    }
    if n == 0 {
        return Ok(SymmetricEig { values: RVector::zeros(0), vectors: RMatrix::zeros(0, 0) });
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut values = RVector::zeros(n);
    let mut vectors = RMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let mut col = eig.eigenvectors.column(src).into_owned();
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
        if let Some(pivot) = col.iter().find(|v| v.abs() > PHASE_PIVOT_TOL) {
            if *pivot < 0.0 {
                col.neg_mut();
            }
        }
        vectors.set_column(dst, &col);
    }
    Ok(SymmetricEig { values, vectors })
}

fn pseudo_inv_sqrt(values: &RVector, rel_tol: f64) -> Result<impl Fn(f64) -> f64> {
    let lambda_max = values.iter().copied().fold(0.0_f64, f64::max);
    if let Some(&neg) = values.iter().find(|&&v| v < -PSD_SLACK * lambda_max) {
        return Err(Error::NotPsd { eigenvalue: neg });
    }
    let cutoff = rel_tol * lambda_max;
    Ok(move |v: f64| if lambda_max > 0.0 && v > cutoff { v.powf(-0.5) } else { 0.0 })
}

/// `M^{-1/2}` for a Hermitian PSD matrix, with eigenvalues at or below
/// `rel_tol · λ_max` mapped to zero (pseudo-inverse branch).
pub fn inv_sqrt_psd(m: &CMatrix, rel_tol: f64) -> Result<CMatrix> {
    let eig = eigh(m)?;
    let f = pseudo_inv_sqrt(&eig.values, rel_tol)?;
    Ok(eig.reconstruct_with(f))
}

/// Real symmetric counterpart of [`inv_sqrt_psd`].
pub fn inv_sqrt_psd_real(m: &RMatrix, rel_tol: f64) -> Result<RMatrix> {
    let eig = eigh_symmetric(m)?;
    let f = pseudo_inv_sqrt(&eig.values, rel_tol)?;
    let mut scaled = eig.vectors.clone();
    for (j, &lambda) in eig.values.iter().enumerate() {
        let w = f(lambda);
        scaled.column_mut(j).scale_mut(w);
    }
    Ok(&scaled * eig.vectors.transpose())
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Column-stacking vectorization.
pub fn vec_cols(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_cols`] for a matrix with `rows` rows.
pub fn unvec_cols(v: &CVector, rows: usize) -> Result<CMatrix> {
    if rows == 0 || v.len() % rows != 0 {
        return Err(Error::dims("unvec_cols", format!("multiple of {rows}"), v.len()));
    }
    Ok(CMatrix::from_column_slice(rows, v.len() / rows, v.as_slice()))
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

pub fn real_part(m: &CMatrix) -> RMatrix {
    m.map(|z| z.re)
}

/// Relative Frobenius distance `‖a − b‖_F / ‖b‖_F` (absolute when `b` is zero).
pub fn rel_frobenius(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = (a - b).norm();
    let base = b.norm();
    if base > 0.0 {
        diff / base
    } else {
        diff
    }
}
