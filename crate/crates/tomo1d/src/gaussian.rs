//! Exact analytics for the Gaussian tomography model `Y ~ N(0, A Theta A')`.
//!
//! This module carries the population-level quantities: the model covariance,
//! the Fisher information of the full likelihood, the correlation-optimal and
//! covariance-adjusted random projection designs, and the asymptotic sandwich
//! covariances of the 1D-projection and pairwise-2D pseudo-likelihood
//! estimators. Everything here is a closed-form function of `(A, theta)`;
//! finite-sample estimation lives in [`crate::estimators`].

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::identifiability::ProjectionSet;
use crate::linalg::{self, SpdFactor};
use crate::topology::RoutingMatrix;

/// Component variances (and optional means) of the latent vector X.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    theta: DVector<f64>,
    mu: DVector<f64>,
}

impl GaussianModel {
    /// Zero-mean model with the given component variances.
    pub fn new(theta: DVector<f64>) -> Result<Self> {
        let mu = DVector::zeros(theta.len());
        Self::with_means(theta, mu)
    }

    pub fn with_means(theta: DVector<f64>, mu: DVector<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(TomoError::InvalidParameter("empty variance vector".into()));
        }
        if theta.len() != mu.len() {
            return Err(TomoError::DimensionMismatch(
                "means and variances must have the same length".into(),
            ));
        }
        if theta.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return Err(TomoError::InvalidParameter(
                "all component variances must be strictly positive and finite".into(),
            ));
        }
        Ok(Self { theta, mu })
    }

    pub fn from_slice(theta: &[f64]) -> Result<Self> {
        Self::new(DVector::from_row_slice(theta))
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }
}

/// Which estimator a covariance matrix belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorTag {
    Mle,
    OneD,
    TwoD,
    Moment,
}

/// Limit covariance of `sqrt(n) (theta_hat - theta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticCovariance {
    matrix: DMatrix<f64>,
    pub estimator_tag: EstimatorTag,
}

impl AsymptoticCovariance {
    pub fn new(mut matrix: DMatrix<f64>, estimator_tag: EstimatorTag) -> Result<Self> {
        let scale = matrix.amax().max(1e-300);
        for i in 0..matrix.nrows() {
            for j in (i + 1)..matrix.ncols() {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-10 * scale.max(1.0) {
                    return Err(TomoError::InvalidParameter(format!(
                        "asymptotic covariance is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        linalg::symmetrize(&mut matrix);
        if (0..matrix.nrows()).any(|i| !(matrix[(i, i)] > 0.0)) {
            return Err(TomoError::InvalidParameter(
                "asymptotic covariance has a nonpositive diagonal entry".into(),
            ));
        }
        Ok(Self {
            matrix,
            estimator_tag,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Per-parameter limit standard deviations `sqrt(diag)`.
    pub fn limit_stds(&self) -> DVector<f64> {
        DVector::from_fn(self.matrix.nrows(), |i, _| self.matrix[(i, i)].sqrt())
    }
}

/// Measurement covariance `Sigma = A Theta A'`.
pub fn model_covariance(a: &RoutingMatrix, model: &GaussianModel) -> Result<DMatrix<f64>> {
    check_dims(a, model)?;
    let mut scaled = a.matrix().clone();
    for (i, &t) in model.theta().iter().enumerate() {
        let mut col = scaled.column_mut(i);
        col *= t;
    }
    let mut sigma = scaled * a.matrix().transpose();
    linalg::symmetrize(&mut sigma);
    Ok(sigma)
}

fn check_dims(a: &RoutingMatrix, model: &GaussianModel) -> Result<()> {
    if model.dim() != a.n_components() {
        return Err(TomoError::DimensionMismatch(format!(
            "model has {} components but the routing matrix has {}",
            model.dim(),
            a.n_components()
        )));
    }
    Ok(())
}

/// Fisher information of the full Gaussian likelihood: `I_F(a, b) = U_ab^2 / 2`
/// where `U = A' Sigma^-1 A`.
pub fn fisher_information(a: &RoutingMatrix, model: &GaussianModel) -> Result<DMatrix<f64>> {
    let sigma = model_covariance(a, model)?;
    let factor = SpdFactor::new(&sigma, "fisher_information")?;
    let u = a.matrix().transpose() * factor.solve_mat(a.matrix());
    let mut info = u.map(|x| 0.5 * x * x);
    linalg::symmetrize(&mut info);
    Ok(info)
}

/// Exact log-density of the zero-mean model at a single measurement vector.
pub fn gaussian_log_density(a: &RoutingMatrix, model: &GaussianModel, y: &DVector<f64>) -> Result<f64> {
    let sigma = model_covariance(a, model)?;
    if y.len() != sigma.nrows() {
        return Err(TomoError::DimensionMismatch(
            "observation length does not match measurement count".into(),
        ));
    }
    let factor = SpdFactor::new(&sigma, "gaussian_log_density")?;
    let quad = y.dot(&factor.solve_vec(y));
    let j = y.len() as f64;
    Ok(-0.5 * (quad + factor.log_det() + j * (2.0 * std::f64::consts::PI).ln()))
}

/// Per-component score `s_i(y) = -d/d theta_i log p(y)`, i.e.
/// `[ -(y' Sigma^-1 A^i)^2 + A^i' Sigma^-1 A^i ] / 2`. Its expectation under
/// the model is zero.
pub fn gaussian_score(a: &RoutingMatrix, model: &GaussianModel, y: &DVector<f64>) -> Result<DVector<f64>> {
    let sigma = model_covariance(a, model)?;
    if y.len() != sigma.nrows() {
        return Err(TomoError::DimensionMismatch(
            "observation length does not match measurement count".into(),
        ));
    }
    let factor = SpdFactor::new(&sigma, "gaussian_score")?;
    let w = factor.solve_mat(a.matrix()); // column i is Sigma^-1 A^i
    let i_dim = a.n_components();
    let mut s = DVector::zeros(i_dim);
    for i in 0..i_dim {
        let wi = w.column(i);
        let lin = y.dot(&wi);
        let trace_term = a.matrix().column(i).dot(&wi);
        s[i] = 0.5 * (trace_term - lin * lin);
    }
    Ok(s)
}

/// Correlation-optimal projection design: `beta_k = Sigma^-1 A^k / lambda_k`
/// with `lambda_k = (A^k' Sigma^-1 A^k)^{1/2}`, one projection per latent
/// component (K = I). Each row maximizes `corr(X_k, beta' Y)` and satisfies
/// `beta_k' Sigma beta_k = 1`.
pub fn optimal_projections(a: &RoutingMatrix, sigma: &DMatrix<f64>) -> Result<ProjectionSet> {
    if sigma.nrows() != a.n_measurements() {
        return Err(TomoError::DimensionMismatch(
            "sigma does not match the measurement count".into(),
        ));
    }
    let factor = SpdFactor::new(sigma, "optimal_projections")?;
    let w = factor.solve_mat(a.matrix());
    let i_dim = a.n_components();
    let mut b = DMatrix::zeros(i_dim, a.n_measurements());
    for k in 0..i_dim {
        let lambda_sq = a.matrix().column(k).dot(&w.column(k));
        if !(lambda_sq > 0.0) {
            return Err(TomoError::SingularCovariance(format!(
                "optimal_projections: nonpositive normalizer for component {k}"
            )));
        }
        let scale = lambda_sq.sqrt().recip();
        for j in 0..a.n_measurements() {
            b[(k, j)] = w[(j, k)] * scale;
        }
    }
    // Rows can come out near-parallel when sigma is ill conditioned (plug-in
    // with a ridged sample covariance); the rank checks downstream report
    // that as a non-identifiable design, which is the more useful failure.
    ProjectionSet::allowing_scale_duplicates(b)
}

/// Squared normalizers `lambda_k^2 = A^k' Sigma^-1 A^k` of the optimal
/// design (the diagonal of `S` in the efficiency identities).
pub fn optimal_projection_scales(a: &RoutingMatrix, sigma: &DMatrix<f64>) -> Result<DVector<f64>> {
    let factor = SpdFactor::new(sigma, "optimal_projection_scales")?;
    let w = factor.solve_mat(a.matrix());
    Ok(DVector::from_fn(a.n_components(), |k, _| {
        a.matrix().column(k).dot(&w.column(k))
    }))
}

/// K random directions adjusted for the covariance of Y: row k is
/// `alpha_k' Sigma^-1/2` with `alpha_k` standard Gaussian and the symmetric
/// (spectral) inverse square root. Deterministic given the generator state.
pub fn random_projections<R: Rng + ?Sized>(
    sigma: &DMatrix<f64>,
    k: usize,
    rng: &mut R,
) -> Result<ProjectionSet> {
    if k == 0 {
        return Err(TomoError::InvalidParameter(
            "need at least one projection".into(),
        ));
    }
    let root = linalg::inv_sqrt_spd(sigma, "random_projections")?;
    let j = sigma.nrows();
    let alpha = DMatrix::from_fn(k, j, |_, _| rng.sample::<f64, _>(StandardNormal));
    // alpha' Sigma^-1/2 per row; the root is symmetric. Distinct Gaussian
    // draws are never exact scale multiples, so skip the quadratic check.
    ProjectionSet::allowing_scale_duplicates(alpha * root)
}

fn projection_second_moments(
    projections: &ProjectionSet,
    sigma: &DMatrix<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let b = projections.directions();
    let gram = b * sigma * b.transpose();
    let sigmas = DVector::from_fn(gram.nrows(), |k, _| gram[(k, k)]);
    (gram, sigmas)
}

/// The `V` and `W` matrices of the 1D sandwich: `V_ka = gamma_ka^2 / sigma_k^2`
/// and `W_kk' = (beta_k' Sigma beta_k')^2 / (sigma_k^2 sigma_k'^2)`.
pub fn sandwich_components_1d(
    a: &RoutingMatrix,
    model: &GaussianModel,
    projections: &ProjectionSet,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let sigma = model_covariance(a, model)?;
    let gamma = projections.gamma(a)?;
    let (gram, sigmas) = projection_second_moments(projections, &sigma);
    let k_dim = projections.len();
    if sigmas.iter().any(|&s| !(s > 0.0)) {
        return Err(TomoError::SingularCovariance(
            "a projection has nonpositive model variance".into(),
        ));
    }
    let v = DMatrix::from_fn(k_dim, a.n_components(), |k, i| {
        gamma[(k, i)] * gamma[(k, i)] / sigmas[k]
    });
    let w = DMatrix::from_fn(k_dim, k_dim, |k, l| {
        let g = gram[(k, l)];
        g * g / (sigmas[k] * sigmas[l])
    });
    Ok((v, w))
}

/// Asymptotic covariance `C^-1 I C^-1` of the 1D-projection estimator, with
/// `C = V'V / 2` and `I = V'WV / 2`, evaluated through a QR factorization of
/// `V` for accuracy.
pub fn asymptotic_cov_1d(
    a: &RoutingMatrix,
    model: &GaussianModel,
    projections: &ProjectionSet,
) -> Result<AsymptoticCovariance> {
    let (v, w) = sandwich_components_1d(a, model, projections)?;
    let i_dim = v.ncols();
    if v.nrows() < i_dim || linalg::rank(&v, 1e-10) < i_dim {
        return Err(TomoError::NonIdentifiableDesign(format!(
            "the {}-projection design does not determine all {} parameters",
            v.nrows(),
            i_dim
        )));
    }
    // C^-1 I C^-1 = 2 R^-1 (Q' W Q) R^-T for V = QR.
    let qr = v.qr();
    let q = qr.q();
    let r = qr.r();
    let core = q.transpose() * w * q;
    let x = r
        .solve_upper_triangular(&core)
        .ok_or_else(|| TomoError::NonIdentifiableDesign("singular design curvature".into()))?;
    let y = r
        .solve_upper_triangular(&x.transpose())
        .ok_or_else(|| TomoError::NonIdentifiableDesign("singular design curvature".into()))?;
    let mut cov = 2.0 * y.transpose();
    linalg::symmetrize(&mut cov);
    AsymptoticCovariance::new(cov, EstimatorTag::OneD)
}

/// The K = I shortcut `2 V^-1 W V^-T` of the 1D limit covariance; a second
/// algebraic route that must agree with [`asymptotic_cov_1d`].
pub fn asymptotic_cov_1d_square(
    a: &RoutingMatrix,
    model: &GaussianModel,
    projections: &ProjectionSet,
) -> Result<DMatrix<f64>> {
    let (v, w) = sandwich_components_1d(a, model, projections)?;
    if v.nrows() != v.ncols() {
        return Err(TomoError::InvalidParameter(
            "shortcut requires exactly K = I projections".into(),
        ));
    }
    let lu = v.clone().lu();
    let x = lu
        .solve(&w)
        .ok_or_else(|| TomoError::NonIdentifiableDesign("V is singular".into()))?;
    // 2 V^-1 W V^-T = 2 (V^-1 (V^-1 W)')'
    let y = lu
        .solve(&x.transpose())
        .ok_or_else(|| TomoError::NonIdentifiableDesign("V is singular".into()))?;
    let mut cov = 2.0 * y.transpose();
    linalg::symmetrize(&mut cov);
    Ok(cov)
}

/// Asymptotic covariance of the all-pairs 2D pseudo-likelihood estimator
/// (`C_2D^-1 I_2D C_2D^-1`), accumulated over every measurement pair
/// `k < k'` exactly as the element formulas prescribe.
pub fn asymptotic_cov_2d(a: &RoutingMatrix, model: &GaussianModel) -> Result<AsymptoticCovariance> {
    let sigma = model_covariance(a, model)?;
    let j_dim = a.n_measurements();
    let i_dim = a.n_components();
    if j_dim < 2 {
        return Err(TomoError::InvalidParameter(
            "pairwise estimator needs at least two measurements".into(),
        ));
    }
    let pairs: Vec<(usize, usize)> = (0..j_dim)
        .flat_map(|k| ((k + 1)..j_dim).map(move |l| (k, l)))
        .collect();

    // Per pair p and component i: w[p][i] = Sigma_p^-1 [A_ki, A_k'i]'.
    let amat = a.matrix();
    let mut w_vecs: Vec<Vec<Vector2<f64>>> = Vec::with_capacity(pairs.len());
    let mut u_vecs: Vec<Vec<Vector2<f64>>> = Vec::with_capacity(pairs.len());
    for &(k, l) in &pairs {
        let s = Matrix2::new(sigma[(k, k)], sigma[(k, l)], sigma[(l, k)], sigma[(l, l)]);
        let det = s.determinant();
        if !(det.abs() > 1e-14 * (s[(0, 0)] * s[(1, 1)]).abs().max(f64::MIN_POSITIVE)) {
            return Err(TomoError::SingularCovariance(format!(
                "2x2 submatrix for pair ({k}, {l}) is singular"
            )));
        }
        let inv = s.try_inverse().ok_or_else(|| {
            TomoError::SingularCovariance(format!("2x2 submatrix for pair ({k}, {l}) is singular"))
        })?;
        let mut ws = Vec::with_capacity(i_dim);
        let mut us = Vec::with_capacity(i_dim);
        for i in 0..i_dim {
            let u = Vector2::new(amat[(k, i)], amat[(l, i)]);
            ws.push(inv * u);
            us.push(u);
        }
        w_vecs.push(ws);
        u_vecs.push(us);
    }

    let mut curvature = DMatrix::zeros(i_dim, i_dim);
    for p in 0..pairs.len() {
        for ai in 0..i_dim {
            for bi in ai..i_dim {
                let t = u_vecs[p][ai].dot(&w_vecs[p][bi]);
                curvature[(ai, bi)] += 0.5 * t * t;
            }
        }
    }
    for ai in 0..i_dim {
        for bi in 0..ai {
            curvature[(ai, bi)] = curvature[(bi, ai)];
        }
    }

    // Cross-covariance blocks between pairs p = (k,k') and q = (l,l').
    let mut score_var = DMatrix::zeros(i_dim, i_dim);
    for (p, &(k0, k1)) in pairs.iter().enumerate() {
        for (q, &(l0, l1)) in pairs.iter().enumerate() {
            let cross = Matrix2::new(
                sigma[(k0, l0)],
                sigma[(k0, l1)],
                sigma[(k1, l0)],
                sigma[(k1, l1)],
            );
            for ai in 0..i_dim {
                let left = cross.transpose() * w_vecs[p][ai];
                for bi in 0..i_dim {
                    let t = left.dot(&w_vecs[q][bi]);
                    score_var[(ai, bi)] += 0.5 * t * t;
                }
            }
        }
    }
    linalg::symmetrize(&mut score_var);

    let factor = SpdFactor::new(&curvature, "asymptotic_cov_2d curvature").map_err(|_| {
        TomoError::NonIdentifiableDesign("pairwise curvature C_2D is singular".into())
    })?;
    let half = factor.solve_mat(&score_var);
    let mut cov = factor.solve_mat(&half.transpose()).transpose();
    linalg::symmetrize(&mut cov);
    AsymptoticCovariance::new(cov, EstimatorTag::TwoD)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::derive_rng;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    fn identity_routing(n: usize) -> RoutingMatrix {
        RoutingMatrix::new(DMatrix::identity(n, n)).unwrap()
    }

    #[test]
    fn covariance_diagonal_for_identity_routing() {
        let a = identity_routing(3);
        let model = GaussianModel::from_slice(&[1.0, 2.0, 3.0]).unwrap();
        let sigma = model_covariance(&a, &model).unwrap();
        assert_eq!(sigma, DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 2.0, 3.0])));
    }

    #[test]
    fn covariance_two_leaf_hand_expansion() {
        let a = RoutingMatrix::two_leaf();
        let model = GaussianModel::from_slice(&[1.0, 1.0, 1.0]).unwrap();
        let sigma = model_covariance(&a, &model).unwrap();
        assert_eq!(sigma, dmatrix![2.0, 1.0; 1.0, 2.0]);
    }

    #[test]
    fn covariance_four_leaf_counts_shared_path() {
        let a = RoutingMatrix::four_leaf();
        let model = GaussianModel::from_slice(&[1.0; 7]).unwrap();
        let sigma = model_covariance(&a, &model).unwrap();
        // Diagonal = leaf depth, off-diagonal = shared-path length.
        let expected = dmatrix![
            3.0, 2.0, 1.0, 1.0;
            2.0, 3.0, 1.0, 1.0;
            1.0, 1.0, 3.0, 2.0;
            1.0, 1.0, 2.0, 3.0
        ];
        assert_eq!(sigma, expected);
    }

    #[test]
    fn fisher_identity_routing_is_classical() {
        let a = identity_routing(3);
        let theta = [0.5, 2.0, 4.0];
        let model = GaussianModel::from_slice(&theta).unwrap();
        let info = fisher_information(&a, &model).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 0.5 / (theta[i] * theta[i]) } else { 0.0 };
                assert_relative_eq!(info[(i, j)], expected, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn fisher_two_leaf_direct_arithmetic() {
        // Sigma = [[2,1],[1,2]], Sigma^-1 = [[2,-1],[-1,2]]/3,
        // U = A' Sigma^-1 A = [[2,1,1],[1,2,-1],[1,-1,2]]/3,
        // I_F = U.^2 / 2 = [[4,1,1],[1,4,1],[1,1,4]]/18.
        let a = RoutingMatrix::two_leaf();
        let model = GaussianModel::from_slice(&[1.0, 1.0, 1.0]).unwrap();
        let info = fisher_information(&a, &model).unwrap();
        let expected = dmatrix![
            4.0/18.0, 1.0/18.0, 1.0/18.0;
            1.0/18.0, 4.0/18.0, 1.0/18.0;
            1.0/18.0, 1.0/18.0, 4.0/18.0
        ];
        assert_relative_eq!(info, expected, max_relative = 1e-12);
    }

    #[test]
    fn fisher_scales_inverse_quadratically() {
        let a = crate::topology::build_router_routing(2, 2, true).unwrap();
        let theta = DVector::from_row_slice(&[0.7, 1.1, 2.2, 0.4]);
        let base = fisher_information(&a, &GaussianModel::new(theta.clone()).unwrap()).unwrap();
        let c = 3.5;
        let scaled = fisher_information(&a, &GaussianModel::new(c * theta).unwrap()).unwrap();
        assert_relative_eq!(scaled, base / (c * c), max_relative = 1e-10);
    }

    #[test]
    fn optimal_projections_identity_are_standardized_axes() {
        let a = identity_routing(3);
        let theta = [1.0, 4.0, 9.0];
        let model = GaussianModel::from_slice(&theta).unwrap();
        let sigma = model_covariance(&a, &model).unwrap();
        let p = optimal_projections(&a, &sigma).unwrap();
        for k in 0..3 {
            for j in 0..3 {
                let expected = if k == j { 1.0 / theta[k].sqrt() } else { 0.0 };
                assert_relative_eq!(p.directions()[(k, j)], expected, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn optimal_projections_are_unit_variance() {
        let a = RoutingMatrix::two_leaf();
        let model = GaussianModel::from_slice(&[1.0, 1.0, 1.0]).unwrap();
        let sigma = model_covariance(&a, &model).unwrap();
        let p = optimal_projections(&a, &sigma).unwrap();
        assert_eq!(p.len(), 3);
        for k in 0..3 {
            let beta = p.beta(k);
            assert_relative_eq!(beta.dot(&(&sigma * &beta)), 1.0, epsilon = 1e-12);
        }
    }

    fn correlation_with_component(
        a: &RoutingMatrix,
        model: &GaussianModel,
        sigma: &DMatrix<f64>,
        beta: &DVector<f64>,
        k: usize,
    ) -> f64 {
        // corr(X_k, beta'Y) = beta' A^k theta_k^{1/2} / sqrt(beta' Sigma beta)
        let num = beta.dot(&a.matrix().column(k).into_owned()) * model.theta()[k].sqrt();
        num / beta.dot(&(sigma * beta)).sqrt()
    }

    #[test]
    fn optimal_projection_maximizes_correlation() {
        let a = crate::topology::build_router_routing(2, 2, true).unwrap();
        let model = GaussianModel::from_slice(&[0.5, 1.5, 0.9, 2.5]).unwrap();
        let sigma = model_covariance(&a, &model).unwrap();
        let p = optimal_projections(&a, &sigma).unwrap();
        let mut rng = derive_rng(31, "corr_probe", 0);
        for k in 0..a.n_components() {
            let beta = p.beta(k);
            let best = correlation_with_component(&a, &model, &sigma, &beta, k);
            for _ in 0..200 {
                let noise = DVector::from_fn(beta.len(), |_, _| {
                    rng.sample::<f64, _>(StandardNormal) * 0.1
                });
                let perturbed = &beta + noise;
                let c = correlation_with_component(&a, &model, &sigma, &perturbed, k);
                assert!(c <= best + 1e-10, "perturbation beat the optimal direction");
            }
        }
    }

    #[test]
    fn random_projections_deterministic_and_whitening() {
        let sigma = dmatrix![2.0, 0.6; 0.6, 1.0];
        let p1 = random_projections(&sigma, 4, &mut derive_rng(9, "rp", 0)).unwrap();
        let p2 = random_projections(&sigma, 4, &mut derive_rng(9, "rp", 0)).unwrap();
        assert_eq!(p1.directions(), p2.directions());

        // Each row beta = Sigma^-1/2 alpha gives var(beta'Y) = |alpha|^2;
        // statistically, var over many rows should average J = 2.
        let many = random_projections(&sigma, 4000, &mut derive_rng(9, "rp", 1)).unwrap();
        let b = many.directions();
        let mut mean_var = 0.0;
        for k in 0..b.nrows() {
            let beta = b.row(k).transpose();
            mean_var += beta.dot(&(&sigma * &beta));
        }
        mean_var /= b.nrows() as f64;
        assert!((mean_var - 2.0).abs() < 0.1, "got {mean_var}");
    }

    #[test]
    fn random_projections_identity_sigma_is_raw_gaussian() {
        let sigma = DMatrix::identity(3, 3);
        let p = random_projections(&sigma, 2000, &mut derive_rng(5, "rp", 2)).unwrap();
        let b = p.directions();
        let mean: f64 = b.iter().sum::<f64>() / (b.len() as f64);
        let var: f64 = b.iter().map(|x| x * x).sum::<f64>() / (b.len() as f64);
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn optimal_design_reaches_fisher_bound() {
        let a = crate::topology::build_router_routing(2, 2, true).unwrap();
        let model = GaussianModel::from_slice(&[0.8, 1.7, 0.4, 2.9]).unwrap();
        let sigma = model_covariance(&a, &model).unwrap();
        let p = optimal_projections(&a, &sigma).unwrap();
        let cov = asymptotic_cov_1d(&a, &model, &p).unwrap();
        let info = fisher_information(&a, &model).unwrap();
        let inv = SpdFactor::new(&info, "test").unwrap().inverse();
        assert!(linalg::rel_frobenius(cov.matrix(), &inv) < 1e-10);
    }

    #[test]
    fn proof_identities_for_v_and_w() {
        // With optimal projections, V = 2 S^-1 I_F and W = 2 S^-1 I_F S^-1.
        let a = RoutingMatrix::four_leaf();
        let model = GaussianModel::from_slice(&[1.3, 0.5, 0.8, 2.0, 0.3, 1.1, 0.9]).unwrap();
        let sigma = model_covariance(&a, &model).unwrap();
        let p = optimal_projections(&a, &sigma).unwrap();
        let (v, w) = sandwich_components_1d(&a, &model, &p).unwrap();
        let info = fisher_information(&a, &model).unwrap();
        let s = optimal_projection_scales(&a, &sigma).unwrap();
        let s_inv = DMatrix::from_diagonal(&s.map(|x| 1.0 / x));
        assert_relative_eq!(v, 2.0 * &s_inv * &info, max_relative = 1e-9);
        assert_relative_eq!(w, 2.0 * &s_inv * &info * &s_inv, max_relative = 1e-9);
    }

    #[test]
    fn square_route_agrees_with_sandwich() {
        let a = RoutingMatrix::two_leaf();
        let model = GaussianModel::from_slice(&[1.0, 2.0, 0.5]).unwrap();
        let p = ProjectionSet::new(DMatrix::from_row_slice(
            3,
            2,
            &[1.0, 0.0, 0.0, 1.0, 1.0, 0.8],
        ))
        .unwrap();
        let sandwich = asymptotic_cov_1d(&a, &model, &p).unwrap();
        let square = asymptotic_cov_1d_square(&a, &model, &p).unwrap();
        assert!(linalg::rel_frobenius(sandwich.matrix(), &square) < 1e-10);
    }

    #[test]
    fn duplicate_projection_row_is_non_identifiable() {
        let a = RoutingMatrix::two_leaf();
        let model = GaussianModel::from_slice(&[1.0, 1.0, 1.0]).unwrap();
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        let p = ProjectionSet::allowing_scale_duplicates(b).unwrap();
        assert!(matches!(
            asymptotic_cov_1d(&a, &model, &p),
            Err(TomoError::NonIdentifiableDesign(_))
        ));
    }

    #[test]
    fn two_measurement_pairwise_estimator_is_efficient() {
        // J = 2 has a single pair, so the 2D estimator uses the joint law.
        let a = RoutingMatrix::two_leaf();
        let model = GaussianModel::from_slice(&[1.4, 0.7, 2.1]).unwrap();
        let cov = asymptotic_cov_2d(&a, &model).unwrap();
        let info = fisher_information(&a, &model).unwrap();
        let inv = SpdFactor::new(&info, "test").unwrap().inverse();
        assert!(linalg::rel_frobenius(cov.matrix(), &inv) < 1e-10);
    }

    #[test]
    fn pairwise_covariance_scales_quadratically() {
        let a = RoutingMatrix::four_leaf();
        let theta = DVector::from_row_slice(&[1.3, 0.5, 0.8, 2.0, 0.3, 1.1, 0.9]);
        let base = asymptotic_cov_2d(&a, &GaussianModel::new(theta.clone()).unwrap()).unwrap();
        let c = 2.5;
        let scaled = asymptotic_cov_2d(&a, &GaussianModel::new(c * theta).unwrap()).unwrap();
        assert_relative_eq!(
            scaled.matrix().clone(),
            c * c * base.matrix().clone(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn score_identity_routing_at_origin() {
        let a = identity_routing(4);
        let model = GaussianModel::from_slice(&[1.0; 4]).unwrap();
        let s = gaussian_score(&a, &model, &DVector::zeros(4)).unwrap();
        for i in 0..4 {
            assert_relative_eq!(s[i], 0.5, max_relative = 1e-12);
        }
    }

    #[test]
    fn score_has_zero_mean_under_model() {
        let a = RoutingMatrix::two_leaf();
        let model = GaussianModel::from_slice(&[1.0, 0.6, 1.8]).unwrap();
        let sigma = model_covariance(&a, &model).unwrap();
        let chol = sigma.clone().cholesky().unwrap();
        let l = chol.l();
        let mut rng = derive_rng(77, "score_mc", 0);
        let n = 100_000;
        let mut sum: DVector<f64> = DVector::zeros(3);
        let mut sumsq: DVector<f64> = DVector::zeros(3);
        for _ in 0..n {
            let z = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
            let y = &l * z;
            let s = gaussian_score(&a, &model, &y).unwrap();
            for i in 0..3 {
                sum[i] += s[i];
                sumsq[i] += s[i] * s[i];
            }
        }
        for i in 0..3 {
            let mean = sum[i] / n as f64;
            let var = sumsq[i] / n as f64 - mean * mean;
            let se = (var / n as f64).sqrt();
            assert!(mean.abs() < 3.0 * se, "component {i}: mean {mean}, se {se}");
        }
    }

    #[test]
    fn score_matches_central_differences() {
        let a = RoutingMatrix::four_leaf();
        let theta = [1.3, 0.5, 0.8, 2.0, 0.3, 1.1, 0.9];
        let model = GaussianModel::from_slice(&theta).unwrap();
        let mut rng = derive_rng(13, "score_fd", 0);
        let y = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal) * 2.0);
        let s = gaussian_score(&a, &model, &y).unwrap();
        let h = 1e-5;
        for i in 0..theta.len() {
            let mut up = theta.to_vec();
            let mut dn = theta.to_vec();
            up[i] += h;
            dn[i] -= h;
            let fd = (gaussian_log_density(&a, &GaussianModel::from_slice(&up).unwrap(), &y).unwrap()
                - gaussian_log_density(&a, &GaussianModel::from_slice(&dn).unwrap(), &y).unwrap())
                / (2.0 * h);
            assert_relative_eq!(s[i], -fd, max_relative = 1e-5);
        }
    }

    #[test]
    fn nonpositive_variance_rejected() {
        assert!(GaussianModel::from_slice(&[1.0, 0.0]).is_err());
        assert!(GaussianModel::from_slice(&[1.0, -2.0]).is_err());
    }
}
