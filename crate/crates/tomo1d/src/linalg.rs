//! Small dense linear-algebra helpers used throughout the crate.
//!
//! Everything funnels through symmetric factorizations: positive-definite
//! systems go through Cholesky with a condition-number guard, ranks come from
//! singular values, and inverse square roots from a spectral decomposition.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen, SVD};

use crate::error::{Result, TomoError};

/// Condition numbers above this trigger a `log::warn!` on SPD solves.
pub const CONDITION_WARN_THRESHOLD: f64 = 1e10;

/// Relative singular-value cutoff for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Cholesky factorization of a symmetric positive-definite matrix, with a
/// condition estimate from the extreme diagonal entries of the factor.
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    /// Factor `m`, which must be symmetric positive definite.
    ///
    /// Warns when the (cheap, factor-based) condition estimate exceeds
    /// [`CONDITION_WARN_THRESHOLD`]; near-singular covariances are a real
    /// failure mode for dense routing matrices.
    pub fn new(m: &DMatrix<f64>, context: &str) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(TomoError::DimensionMismatch(format!(
                "{context}: expected square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let chol = Cholesky::new(m.clone()).ok_or_else(|| {
            TomoError::SingularCovariance(format!("{context}: Cholesky factorization failed"))
        })?;
        let l = chol.l_dirty();
        let mut dmin = f64::INFINITY;
        let mut dmax: f64 = 0.0;
        for i in 0..l.nrows() {
            let d = l[(i, i)].abs();
            dmin = dmin.min(d);
            dmax = dmax.max(d);
        }
        if dmin <= 0.0 || !dmin.is_finite() {
            return Err(TomoError::SingularCovariance(format!(
                "{context}: zero pivot in Cholesky factor"
            )));
        }
        let cond = (dmax / dmin).powi(2);
        if cond > CONDITION_WARN_THRESHOLD {
            log::warn!("{context}: condition estimate {cond:.3e} exceeds 1e10");
        }
        Ok(Self { chol })
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// log det of the factored matrix.
    pub fn log_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
    }
}

/// Numerical rank: count of singular values above `tol` times the largest.
pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let svd = SVD::new(m.clone(), false, false);
    let smax = svd.singular_values.max();
    if smax <= 0.0 {
        return 0;
    }
    svd.singular_values.iter().filter(|&&s| s > tol * smax).count()
}

/// Inverse of the symmetric (spectral) square root of an SPD matrix.
pub fn inv_sqrt_spd(m: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(TomoError::DimensionMismatch(format!(
            "{context}: expected square matrix"
        )));
    }
    let eig = SymmetricEigen::new(m.clone());
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    if lmin <= 0.0 || lmin < 1e-14 * lmax {
        return Err(TomoError::SingularCovariance(format!(
            "{context}: eigenvalue {lmin:.3e} is not safely positive"
        )));
    }
    let q = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        q[(i, j)] / eig.eigenvalues[j].sqrt()
    });
    Ok(&scaled * q.transpose())
}

/// Force exact symmetry by averaging with the transpose.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Half-vectorization index pairs (j, l) with j <= l, in column-major order
/// of the upper triangle: (0,0), (0,1), (1,1), (0,2), ...
pub fn vech_indices(n: usize) -> Vec<(usize, usize)> {
    let mut idx = Vec::with_capacity(n * (n + 1) / 2);
    for l in 0..n {
        for j in 0..=l {
            idx.push((j, l));
        }
    }
    idx
}

/// Minimum-norm least-squares solution of `a x = b` via SVD, together with
/// the numerical rank of `a`.
pub fn lstsq_min_norm(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Result<(DVector<f64>, usize)> {
    if a.nrows() != b.len() {
        return Err(TomoError::DimensionMismatch(format!(
            "least squares: {} rows vs rhs of length {}",
            a.nrows(),
            b.len()
        )));
    }
    let svd = SVD::new(a.clone(), true, true);
    let smax = svd.singular_values.max();
    let eff_rank = if smax > 0.0 {
        svd.singular_values.iter().filter(|&&s| s > tol * smax).count()
    } else {
        0
    };
    let cutoff = if smax > 0.0 { tol * smax } else { f64::INFINITY };
    let x = svd
        .solve(b, cutoff)
        .map_err(|e| TomoError::InvalidParameter(format!("least squares solve failed: {e}")))?;
    Ok((x, eff_rank))
}

/// Frobenius-norm relative difference `||a - b||_F / ||b||_F`.
pub fn rel_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}
