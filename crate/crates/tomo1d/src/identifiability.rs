//! Identifiability of the latent distribution from 1-D projection marginals.
//!
//! A set of projections `beta_k' Y` determines the distribution of `X` (up to
//! its mean) exactly when every elementwise power `M_n` of `Gamma = B A` has
//! full column rank, for all orders `n >= 2`. All orders cannot be checked,
//! so the checker scans `n = 2..=max_order`; structural failures show up at
//! small `n` and the violating projection sets have Lebesgue measure zero.

use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::topology::RoutingMatrix;

/// Default highest power order scanned by [`check_identifiability`].
pub const DEFAULT_MAX_ORDER: usize = 20;

/// Default relative singular-value tolerance for the rank decisions.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-9;

/// K projection directions over measurement space, one per row of `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet {
    b: DMatrix<f64>,
}

impl ProjectionSet {
    /// Wrap a K x J direction matrix, rejecting zero rows and pairs of rows
    /// that are scale multiples of each other (a rescaled projection carries
    /// no new information).
    pub fn new(b: DMatrix<f64>) -> Result<Self> {
        let set = Self::allowing_scale_duplicates(b)?;
        for k in 0..set.b.nrows() {
            for l in (k + 1)..set.b.nrows() {
                let u = set.b.row(k);
                let v = set.b.row(l);
                let cross = u.dot(&v).abs();
                let bound = u.norm() * v.norm();
                if bound - cross <= 1e-12 * bound {
                    return Err(TomoError::InvalidParameter(format!(
                        "projections {k} and {l} are scale multiples of each other"
                    )));
                }
            }
        }
        Ok(set)
    }

    /// Wrap a direction matrix without the proportional-rows check. Needed to
    /// exercise degenerate designs (e.g. the two-leaf set at `a = 0`, whose
    /// third projection coincides with the first).
    pub fn allowing_scale_duplicates(b: DMatrix<f64>) -> Result<Self> {
        if b.nrows() == 0 || b.ncols() == 0 {
            return Err(TomoError::InvalidParameter("empty projection set".into()));
        }
        for k in 0..b.nrows() {
            if b.row(k).iter().all(|&v| v == 0.0) {
                return Err(TomoError::InvalidParameter(format!(
                    "projection {k} is the zero vector"
                )));
            }
        }
        Ok(Self { b })
    }

    /// The Lemma-style two-leaf design `{Y1, Y2, Y1 + a Y2}`.
    pub fn two_leaf_family(a: f64) -> Self {
        Self::allowing_scale_duplicates(DMatrix::from_row_slice(
            3,
            2,
            &[1.0, 0.0, 0.0, 1.0, 1.0, a],
        ))
        .expect("rows are nonzero")
    }

    /// Number of projections K.
    pub fn len(&self) -> usize {
        self.b.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.b.nrows() == 0
    }

    /// Dimension J of the measurement space.
    pub fn dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn directions(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Row k as a column vector beta_k.
    pub fn beta(&self, k: usize) -> nalgebra::DVector<f64> {
        self.b.row(k).transpose()
    }

    /// The K x I coefficient matrix `Gamma = B A` over latent components.
    pub fn gamma(&self, a: &RoutingMatrix) -> Result<DMatrix<f64>> {
        if self.dim() != a.n_measurements() {
            return Err(TomoError::DimensionMismatch(format!(
                "projections live in R^{} but the routing matrix has {} measurements",
                self.dim(),
                a.n_measurements()
            )));
        }
        Ok(&self.b * a.matrix())
    }

    /// Keep only the selected projections (used by the monotonicity tests).
    pub fn subset(&self, rows: &[usize]) -> Result<Self> {
        let mut b = DMatrix::zeros(rows.len(), self.dim());
        for (i, &r) in rows.iter().enumerate() {
            if r >= self.len() {
                return Err(TomoError::InvalidParameter(format!(
                    "projection index {r} out of range"
                )));
            }
            b.set_row(i, &self.b.row(r));
        }
        Self::allowing_scale_duplicates(b)
    }
}

/// Outcome of the order-by-order rank scan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    /// Full column rank at every scanned order: the distribution of X is
    /// determined up to its mean.
    pub identifiable_all: bool,
    /// Full column rank at every even order: all even cumulants determined.
    pub identifiable_even: bool,
    /// Smallest order at which the rank test fails, if any.
    pub first_failing_order: Option<usize>,
    /// `(order, rank of M_n)` for every scanned order.
    pub rank_by_order: Vec<(usize, usize)>,
    pub max_order_checked: usize,
}

impl IdentifiabilityReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Elementwise `n`-th power of `Gamma = B A`: entry `(k, i)` is `gamma_ki^n`.
pub fn power_matrix(
    projections: &ProjectionSet,
    a: &RoutingMatrix,
    n: u32,
) -> Result<DMatrix<f64>> {
    if n < 1 {
        return Err(TomoError::InvalidParameter("power order must be >= 1".into()));
    }
    let gamma = projections.gamma(a)?;
    Ok(gamma.map(|g| g.powi(n as i32)))
}

/// Scan orders `2..=max_order` and report the column rank of each `M_n`.
///
/// Rank is the number of singular values above `rank_tolerance` times the
/// largest. Because entries of `M_n` grow like `|gamma|^n`, rows of `Gamma`
/// are sup-norm normalized before taking powers; this rescales rows of `M_n`
/// by positive constants and leaves every rank verdict unchanged.
///
/// `K < I` designs are not an error: every order simply fails the full
/// column rank test, which the report conveys.
pub fn check_identifiability(
    projections: &ProjectionSet,
    a: &RoutingMatrix,
    max_order: usize,
    rank_tolerance: f64,
) -> Result<IdentifiabilityReport> {
    if max_order < 2 {
        return Err(TomoError::InvalidParameter("max_order must be >= 2".into()));
    }
    if !(rank_tolerance > 0.0) {
        return Err(TomoError::InvalidParameter(
            "rank tolerance must be positive".into(),
        ));
    }
    let gamma = projections.gamma(a)?;
    let n_components = gamma.ncols();

    // Sup-norm normalize each row; an all-zero row stays zero.
    let mut scaled = gamma.clone();
    for k in 0..scaled.nrows() {
        let m = scaled.row(k).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if m > 0.0 {
            for j in 0..scaled.ncols() {
                scaled[(k, j)] /= m;
            }
        }
    }

    let mut rank_by_order = Vec::with_capacity(max_order - 1);
    let mut identifiable_all = true;
    let mut identifiable_even = true;
    let mut first_failing_order = None;
    for n in 2..=max_order {
        let mn = scaled.map(|g| g.powi(n as i32));
        let svd = SVD::new(mn, false, false);
        let smax = svd.singular_values.max();
        let rank = if smax > 0.0 {
            svd.singular_values
                .iter()
                .filter(|&&s| s > rank_tolerance * smax)
                .count()
        } else {
            0
        };
        rank_by_order.push((n, rank));
        if rank < n_components {
            identifiable_all = false;
            if n % 2 == 0 {
                identifiable_even = false;
            }
            if first_failing_order.is_none() {
                first_failing_order = Some(n);
            }
        }
    }
    Ok(IdentifiabilityReport {
        identifiable_all,
        identifiable_even,
        first_failing_order,
        rank_by_order,
        max_order_checked: max_order,
    })
}

/// Closed form `det(M_n) = (1 + a)^n - a^n - 1` for the two-leaf design
/// `{Y1, Y2, Y1 + a Y2}`; the independent oracle for the rank scan.
pub fn two_leaf_determinant(a: f64, n: u32) -> f64 {
    (1.0 + a).powi(n as i32) - a.powi(n as i32) - 1.0
}
