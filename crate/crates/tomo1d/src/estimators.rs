//! Finite-sample estimators for the Gaussian tomography family.
//!
//! Four routes to `theta` from an n x J block of measurements: the exact
//! joint MLE, the 1D-projection pseudo-likelihood, the all-pairs 2D
//! pseudo-likelihood, and a linear moment estimator (the customary starting
//! value). The likelihood estimators optimize in log-parameter coordinates
//! with analytic gradients; under a mean-variance power relation the free
//! parameter is the mean vector and the variances follow as `phi * mu^c`.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::gaussian::EstimatorTag;
use crate::identifiability::ProjectionSet;
use crate::linalg::{self, SpdFactor};
use crate::optimize::{minimize_bfgs, OptimOptions};
use crate::seed::SeedProvenance;
use crate::topology::RoutingMatrix;

/// An n x J block of i.i.d. measurement vectors plus RNG provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBlock {
    data: DMatrix<f64>,
    provenance: SeedProvenance,
}

impl SampleBlock {
    pub fn new(data: DMatrix<f64>, provenance: SeedProvenance) -> Result<Self> {
        if data.nrows() < 2 {
            return Err(TomoError::InvalidParameter(
                "a sample block needs at least two observations".into(),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(TomoError::InvalidParameter(
                "sample block contains a non-finite entry".into(),
            ));
        }
        Ok(Self { data, provenance })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Measurement dimension J.
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn provenance(&self) -> &SeedProvenance {
        &self.provenance
    }

    pub fn sample_mean(&self) -> DVector<f64> {
        let n = self.n() as f64;
        DVector::from_fn(self.dim(), |j, _| self.data.column(j).sum() / n)
    }

    /// Uncentered second-moment matrix `Y'Y / n`.
    pub fn second_moment(&self) -> DMatrix<f64> {
        let mut m = self.data.transpose() * &self.data / self.n() as f64;
        linalg::symmetrize(&mut m);
        m
    }

    /// Centered covariance with divisor n.
    pub fn sample_covariance(&self) -> DMatrix<f64> {
        let mean = self.sample_mean();
        let mut cov = self.second_moment() - &mean * mean.transpose();
        linalg::symmetrize(&mut cov);
        cov
    }

    /// Projected scalars `B y_j` for every observation, one row per sample.
    pub fn project(&self, projections: &ProjectionSet) -> Result<DMatrix<f64>> {
        if projections.dim() != self.dim() {
            return Err(TomoError::DimensionMismatch(
                "projection dimension does not match sample dimension".into(),
            ));
        }
        Ok(&self.data * projections.directions().transpose())
    }
}

/// Power relation `variance = phi * mean^c` between a component's mean and
/// variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanVarianceRelation {
    pub phi: f64,
    pub c: f64,
}

impl MeanVarianceRelation {
    pub fn new(phi: f64, c: f64) -> Result<Self> {
        if !(phi > 0.0) || !phi.is_finite() || !c.is_finite() {
            return Err(TomoError::InvalidParameter(
                "relation needs finite c and phi > 0".into(),
            ));
        }
        Ok(Self { phi, c })
    }

    pub fn variance(&self, mean: f64) -> f64 {
        self.phi * mean.powf(self.c)
    }

    /// d variance / d mean.
    pub fn dvariance(&self, mean: f64) -> f64 {
        if self.c == 0.0 {
            0.0
        } else {
            self.phi * self.c * mean.powf(self.c - 1.0)
        }
    }
}

/// Knobs shared by the likelihood estimators.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorOptions {
    pub grad_tol: f64,
    pub obj_tol: f64,
    pub max_iters: usize,
    /// When set, the free parameter is the mean vector and variances follow
    /// the power relation.
    pub relation: Option<MeanVarianceRelation>,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-7,
            obj_tol: 1e-10,
            max_iters: 500,
            relation: None,
        }
    }
}

impl EstimatorOptions {
    pub fn with_relation(relation: MeanVarianceRelation) -> Self {
        Self {
            relation: Some(relation),
            ..Self::default()
        }
    }

    fn optim(&self) -> OptimOptions {
        OptimOptions {
            grad_tol: self.grad_tol,
            obj_tol: self.obj_tol,
            max_iters: self.max_iters,
        }
    }
}

/// Fit outcome: variance estimates, optional mean estimates, and optimizer
/// diagnostics. `objective_value` is the mean negative log-(pseudo)likelihood
/// at the solution, or the residual norm for the moment estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub theta_hat: Vec<f64>,
    pub mu_hat: Option<Vec<f64>>,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub estimator_tag: EstimatorTag,
    pub warnings: Vec<String>,
}

impl EstimateReport {
    pub fn theta(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.theta_hat)
    }

    pub fn mu(&self) -> Option<DVector<f64>> {
        self.mu_hat.as_ref().map(|m| DVector::from_row_slice(m))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_init(init: &DVector<f64>, dim: usize, what: &str) -> Result<()> {
    if init.len() != dim {
        return Err(TomoError::DimensionMismatch(format!(
            "{what}: initial point has length {} but the model has {dim} components",
            init.len()
        )));
    }
    if init.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(TomoError::InvalidParameter(format!(
            "{what}: initial point must be strictly positive"
        )));
    }
    Ok(())
}

fn check_samples(a: &RoutingMatrix, samples: &SampleBlock) -> Result<()> {
    if samples.dim() != a.n_measurements() {
        return Err(TomoError::DimensionMismatch(format!(
            "samples have {} columns but the routing matrix has {} measurements",
            samples.dim(),
            a.n_measurements()
        )));
    }
    Ok(())
}

/// Exact Gaussian MLE over the joint distribution of Y.
pub fn estimate_mle(
    a: &RoutingMatrix,
    samples: &SampleBlock,
    init: &DVector<f64>,
    options: &EstimatorOptions,
) -> Result<EstimateReport> {
    check_samples(a, samples)?;
    check_init(init, a.n_components(), "estimate_mle")?;
    if linalg::rank(a.matrix(), linalg::DEFAULT_RANK_TOL) < a.n_measurements() {
        return Err(TomoError::InvalidParameter(
            "estimate_mle requires a routing matrix of full row rank".into(),
        ));
    }
    let amat = a.matrix().clone();
    let j_dim = a.n_measurements() as f64;
    let const_term = 0.5 * j_dim * (2.0 * std::f64::consts::PI).ln();

    match options.relation {
        None => {
            let shat = samples.second_moment();
            run_log_space(init, options, EstimatorTag::Mle, None, |theta| {
                let (factor, _) = match spd_sigma(&amat, theta) {
                    Some(f) => f,
                    None => return None,
                };
                let w = factor.solve_mat(&amat);
                let value =
                    0.5 * (factor.solve_mat(&shat).trace() + factor.log_det()) + const_term;
                let grad = DVector::from_fn(theta.len(), |i, _| {
                    let wi = w.column(i);
                    0.5 * (amat.column(i).dot(&wi) - wi.dot(&(&shat * &wi)))
                });
                Some((value, grad))
            })
        }
        Some(rel) => {
            let chat = samples.sample_covariance();
            let ybar = samples.sample_mean();
            run_log_space(init, options, EstimatorTag::Mle, Some(rel), |mu| {
                let theta = DVector::from_fn(mu.len(), |i, _| rel.variance(mu[i]));
                let (factor, _) = spd_sigma(&amat, &theta)?;
                let r = &ybar - &amat * mu;
                let m = &chat + &r * r.transpose();
                let w = factor.solve_mat(&amat);
                let sig_inv_r = factor.solve_vec(&r);
                let value = 0.5 * (factor.solve_mat(&m).trace() + factor.log_det()) + const_term;
                let grad = DVector::from_fn(mu.len(), |i, _| {
                    let wi = w.column(i);
                    let dtheta = rel.dvariance(mu[i]);
                    0.5 * dtheta * (amat.column(i).dot(&wi) - wi.dot(&(&m * &wi)))
                        - amat.column(i).dot(&sig_inv_r)
                });
                Some((value, grad))
            })
        }
    }
}

/// 1D-projection pseudo-likelihood: minimize the summed negative marginal
/// Gaussian log-likelihoods of the projected scalars.
pub fn estimate_1d(
    a: &RoutingMatrix,
    samples: &SampleBlock,
    projections: &ProjectionSet,
    init: &DVector<f64>,
    options: &EstimatorOptions,
) -> Result<EstimateReport> {
    check_samples(a, samples)?;
    check_init(init, a.n_components(), "estimate_1d")?;
    let gamma = projections.gamma(a)?;
    let i_dim = a.n_components();
    let z = samples.project(projections)?;
    let n = samples.n() as f64;
    let k_dim = projections.len();
    let m1 = DVector::from_fn(k_dim, |k, _| z.column(k).sum() / n);
    let m2 = DVector::from_fn(k_dim, |k, _| z.column(k).map(|v| v * v).sum() / n);

    // Design check at the initial point: the curvature of the projected
    // objective is V'V/2 with V_ka = gamma_ka^2 / sigma_k^2, so a
    // rank-deficient V cannot identify theta.
    let theta0 = match options.relation {
        None => init.clone(),
        Some(rel) => DVector::from_fn(init.len(), |i, _| rel.variance(init[i])),
    };
    let sig0 = DVector::from_fn(k_dim, |k, _| {
        (0..i_dim).map(|i| gamma[(k, i)] * gamma[(k, i)] * theta0[i]).sum::<f64>()
    });
    if sig0.iter().any(|&s| !(s > 0.0)) {
        return Err(TomoError::SingularCovariance(
            "a projection has zero model variance at the initial point".into(),
        ));
    }
    let v0 = DMatrix::from_fn(k_dim, i_dim, |k, i| gamma[(k, i)] * gamma[(k, i)] / sig0[k]);
    let design = match options.relation {
        // Mean equations add gamma rows of information.
        Some(_) => {
            let mut stacked = DMatrix::zeros(2 * k_dim, i_dim);
            stacked.view_mut((0, 0), (k_dim, i_dim)).copy_from(&v0);
            stacked.view_mut((k_dim, 0), (k_dim, i_dim)).copy_from(&gamma);
            stacked
        }
        None => v0,
    };
    if linalg::rank(&design, 1e-10) < i_dim {
        return Err(TomoError::NonIdentifiableDesign(format!(
            "{k_dim} projections cannot determine {i_dim} parameters"
        )));
    }

    let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    match options.relation {
        None => run_log_space(init, options, EstimatorTag::OneD, None, |theta| {
            let mut value = 0.0;
            let mut grad = DVector::zeros(theta.len());
            for k in 0..k_dim {
                let sig: f64 =
                    (0..theta.len()).map(|i| gamma[(k, i)] * gamma[(k, i)] * theta[i]).sum();
                if !(sig > 0.0) {
                    return None;
                }
                value += 0.5 * (m2[k] / sig + sig.ln()) + half_ln_2pi;
                let common = (sig - m2[k]) / (2.0 * sig * sig);
                for i in 0..theta.len() {
                    grad[i] += gamma[(k, i)] * gamma[(k, i)] * common;
                }
            }
            Some((value, grad))
        }),
        Some(rel) => run_log_space(init, options, EstimatorTag::OneD, Some(rel), |mu| {
            let theta = DVector::from_fn(mu.len(), |i, _| rel.variance(mu[i]));
            let mut value = 0.0;
            let mut grad = DVector::zeros(mu.len());
            for k in 0..k_dim {
                let sig: f64 =
                    (0..mu.len()).map(|i| gamma[(k, i)] * gamma[(k, i)] * theta[i]).sum();
                if !(sig > 0.0) {
                    return None;
                }
                let nu: f64 = (0..mu.len()).map(|i| gamma[(k, i)] * mu[i]).sum();
                let m2c = m2[k] - 2.0 * m1[k] * nu + nu * nu;
                value += 0.5 * (m2c / sig + sig.ln()) + half_ln_2pi;
                let common = (sig - m2c) / (2.0 * sig * sig);
                let dmean = (nu - m1[k]) / sig;
                for i in 0..mu.len() {
                    let g = gamma[(k, i)];
                    grad[i] += g * g * rel.dvariance(mu[i]) * common + g * dmean;
                }
            }
            Some((value, grad))
        }),
    }
}

/// All-pairs 2D pseudo-likelihood: sum of bivariate Gaussian marginals over
/// every measurement pair `k < k'`.
pub fn estimate_2d(
    a: &RoutingMatrix,
    samples: &SampleBlock,
    init: &DVector<f64>,
    options: &EstimatorOptions,
) -> Result<EstimateReport> {
    check_samples(a, samples)?;
    check_init(init, a.n_components(), "estimate_2d")?;
    let j_dim = a.n_measurements();
    let i_dim = a.n_components();
    if j_dim < 2 {
        return Err(TomoError::InvalidParameter(
            "the pairwise estimator needs at least two measurements".into(),
        ));
    }
    // Pairwise marginals see every entry of Sigma, so identifiability is the
    // rank of the vech design G[(j,l), i] = A_ji * A_li.
    if linalg::rank(&vech_design(a), 1e-10) < i_dim {
        return Err(TomoError::NonIdentifiableDesign(
            "the pairwise design cannot determine all parameters".into(),
        ));
    }
    let amat = a.matrix().clone();
    let pairs: Vec<(usize, usize)> = (0..j_dim)
        .flat_map(|k| ((k + 1)..j_dim).map(move |l| (k, l)))
        .collect();
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();

    match options.relation {
        None => {
            let shat = samples.second_moment();
            run_log_space(init, options, EstimatorTag::TwoD, None, |theta| {
                let sigma = scaled_gram(&amat, theta);
                let mut value = 0.0;
                let mut grad = DVector::zeros(theta.len());
                for &(k, l) in &pairs {
                    let s = Matrix2::new(sigma[(k, k)], sigma[(k, l)], sigma[(l, k)], sigma[(l, l)]);
                    let det = s.determinant();
                    if !(det > 0.0) || !(s[(0, 0)] > 0.0) {
                        return None;
                    }
                    let inv = Matrix2::new(s[(1, 1)], -s[(0, 1)], -s[(1, 0)], s[(0, 0)]) / det;
                    let sh = Matrix2::new(shat[(k, k)], shat[(k, l)], shat[(l, k)], shat[(l, l)]);
                    value += 0.5 * ((inv * sh).trace() + det.ln()) + ln_2pi;
                    for i in 0..theta.len() {
                        let u = Vector2::new(amat[(k, i)], amat[(l, i)]);
                        if u[0] == 0.0 && u[1] == 0.0 {
                            continue;
                        }
                        let w = inv * u;
                        grad[i] += 0.5 * (u.dot(&w) - w.dot(&(sh * w)));
                    }
                }
                Some((value, grad))
            })
        }
        Some(rel) => {
            let chat = samples.sample_covariance();
            let ybar = samples.sample_mean();
            run_log_space(init, options, EstimatorTag::TwoD, Some(rel), |mu| {
                let theta = DVector::from_fn(mu.len(), |i, _| rel.variance(mu[i]));
                let sigma = scaled_gram(&amat, &theta);
                let r_full = &ybar - &amat * mu;
                let mut value = 0.0;
                let mut grad = DVector::zeros(mu.len());
                for &(k, l) in &pairs {
                    let s = Matrix2::new(sigma[(k, k)], sigma[(k, l)], sigma[(l, k)], sigma[(l, l)]);
                    let det = s.determinant();
                    if !(det > 0.0) || !(s[(0, 0)] > 0.0) {
                        return None;
                    }
                    let inv = Matrix2::new(s[(1, 1)], -s[(0, 1)], -s[(1, 0)], s[(0, 0)]) / det;
                    let r = Vector2::new(r_full[k], r_full[l]);
                    let m = Matrix2::new(chat[(k, k)], chat[(k, l)], chat[(l, k)], chat[(l, l)])
                        + r * r.transpose();
                    value += 0.5 * ((inv * m).trace() + det.ln()) + ln_2pi;
                    let inv_r = inv * r;
                    for i in 0..mu.len() {
                        let u = Vector2::new(amat[(k, i)], amat[(l, i)]);
                        if u[0] == 0.0 && u[1] == 0.0 {
                            continue;
                        }
                        let w = inv * u;
                        grad[i] += 0.5
                            * rel.dvariance(mu[i])
                            * (u.dot(&w) - w.dot(&(m * w)))
                            - u.dot(&inv_r);
                    }
                }
                Some((value, grad))
            })
        }
    }
}

/// `A diag(theta) A'` without going through a `GaussianModel` (the optimizer
/// visits points that may not satisfy its invariants).
fn scaled_gram(amat: &DMatrix<f64>, theta: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = amat.clone();
    for (i, &t) in theta.iter().enumerate() {
        let mut col = scaled.column_mut(i);
        col *= t;
    }
    scaled * amat.transpose()
}

fn spd_sigma(amat: &DMatrix<f64>, theta: &DVector<f64>) -> Option<(SpdFactor, DMatrix<f64>)> {
    if theta.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
        return None;
    }
    let sigma = scaled_gram(amat, theta);
    SpdFactor::new(&sigma, "estimator").ok().map(|f| (f, sigma))
}

/// Shared optimizer driver: exponentiate, evaluate, and chain-rule the
/// gradient into log coordinates so positivity is automatic.
fn run_log_space<F>(
    init: &DVector<f64>,
    options: &EstimatorOptions,
    tag: EstimatorTag,
    relation: Option<MeanVarianceRelation>,
    mut eval: F,
) -> Result<EstimateReport>
where
    F: FnMut(&DVector<f64>) -> Option<(f64, DVector<f64>)>,
{
    let eta0 = init.map(f64::ln);
    let outcome = minimize_bfgs(
        |eta| {
            let param = eta.map(f64::exp);
            match eval(&param) {
                Some((value, grad_param)) => {
                    let grad_eta = DVector::from_fn(eta.len(), |i, _| grad_param[i] * param[i]);
                    (value, grad_eta)
                }
                None => (f64::INFINITY, DVector::zeros(eta.len())),
            }
        },
        eta0,
        &options.optim(),
    );
    let param = outcome.x.map(f64::exp);
    let (theta_hat, mu_hat) = match relation {
        None => (param.iter().copied().collect::<Vec<f64>>(), None),
        Some(rel) => (
            param.iter().map(|&m| rel.variance(m)).collect(),
            Some(param.iter().copied().collect()),
        ),
    };
    let mut warnings = Vec::new();
    if !outcome.converged {
        warnings.push(format!(
            "optimizer stopped after {} iterations with gradient sup-norm {:.3e}",
            outcome.iterations, outcome.grad_sup_norm
        ));
    }
    Ok(EstimateReport {
        theta_hat,
        mu_hat,
        objective_value: outcome.value,
        iterations: outcome.iterations,
        converged: outcome.converged,
        estimator_tag: tag,
        warnings,
    })
}

/// Rows of the half-vectorized covariance design: entry `((j,l), i)` is
/// `A_ji A_li`, so that `vech(A Theta A') = G theta`.
fn vech_design(a: &RoutingMatrix) -> DMatrix<f64> {
    let idx = linalg::vech_indices(a.n_measurements());
    let amat = a.matrix();
    DMatrix::from_fn(idx.len(), a.n_components(), |r, i| {
        let (j, l) = idx[r];
        amat[(j, i)] * amat[(l, i)]
    })
}

/// Moment estimator: stack the mean equations `A mu = mean(Y)` against the
/// distinct-entry covariance equations `vech(A Theta A') = vech(cov(Y))` and
/// solve by minimum-norm least squares. With a power relation the variance
/// block is refit by iterated linearization in `mu`. Solved variances that
/// come out nonpositive are clipped to a small floor; the result is meant as
/// a starting value, not a final estimate.
pub fn estimate_moment(
    a: &RoutingMatrix,
    samples: &SampleBlock,
    relation: Option<&MeanVarianceRelation>,
) -> Result<EstimateReport> {
    check_samples(a, samples)?;
    let i_dim = a.n_components();
    let amat = a.matrix();
    let ybar = samples.sample_mean();
    let chat = samples.sample_covariance();
    let g = vech_design(a);
    let vech_idx = linalg::vech_indices(a.n_measurements());
    let vhat = DVector::from_fn(vech_idx.len(), |r, _| {
        let (j, l) = vech_idx[r];
        chat[(j, l)]
    });
    let mut warnings = Vec::new();

    match relation {
        None => {
            let (mu, mu_rank) = linalg::lstsq_min_norm(amat, &ybar, linalg::DEFAULT_RANK_TOL)?;
            let (theta_raw, th_rank) = linalg::lstsq_min_norm(&g, &vhat, linalg::DEFAULT_RANK_TOL)?;
            if mu_rank < i_dim.min(amat.nrows()) || th_rank < i_dim.min(g.nrows()) {
                warnings.push("rank-deficient moment system; minimum-norm solution".into());
            }
            let theta = clip_positive(&theta_raw, &mut warnings);
            let resid = (&g * &theta - &vhat).norm();
            Ok(EstimateReport {
                theta_hat: theta.iter().copied().collect(),
                mu_hat: Some(mu.iter().copied().collect()),
                objective_value: resid,
                iterations: 1,
                converged: true,
                estimator_tag: EstimatorTag::Moment,
                warnings,
            })
        }
        Some(rel) => {
            // Start from the mean equations alone.
            let (mu0, _) = linalg::lstsq_min_norm(amat, &ybar, linalg::DEFAULT_RANK_TOL)?;
            let floor = positive_floor(&mu0);
            let mut mu = mu0.map(|m| m.max(floor));
            let n_mean = amat.nrows();
            let n_var = g.nrows();
            let mut stacked = DMatrix::zeros(n_mean + n_var, i_dim);
            stacked.view_mut((0, 0), (n_mean, i_dim)).copy_from(amat);
            let mut rhs = DVector::zeros(n_mean + n_var);
            rhs.rows_mut(0, n_mean).copy_from(&ybar);
            let mut iterations = 0;
            let mut converged = false;
            let mut rank_warned = false;
            for _ in 0..50 {
                iterations += 1;
                // Linearize theta_i = phi mu_i^c around the current mu.
                let theta0 = mu.map(|m| rel.variance(m));
                let slope = mu.map(|m| rel.dvariance(m));
                for r in 0..n_var {
                    for i in 0..i_dim {
                        stacked[(n_mean + r, i)] = g[(r, i)] * slope[i];
                    }
                }
                let offset = &vhat - &g * &theta0 + &g * &DVector::from_fn(i_dim, |i, _| slope[i] * mu[i]);
                rhs.rows_mut(n_mean, n_var).copy_from(&offset);
                let (mu_new, rank) =
                    linalg::lstsq_min_norm(&stacked, &rhs, linalg::DEFAULT_RANK_TOL)?;
                if rank < i_dim && !rank_warned {
                    warnings.push("rank-deficient moment system; minimum-norm solution".into());
                    rank_warned = true;
                }
                let mu_new = mu_new.map(|m| m.max(floor));
                let step = (&mu_new - &mu).amax();
                mu = mu_new;
                if step <= 1e-10 * mu.amax().max(1.0) {
                    converged = true;
                    break;
                }
            }
            let theta = clip_positive(&mu.map(|m| rel.variance(m)), &mut warnings);
            let resid = (&g * &theta - &vhat).norm();
            Ok(EstimateReport {
                theta_hat: theta.iter().copied().collect(),
                mu_hat: Some(mu.iter().copied().collect()),
                objective_value: resid,
                iterations,
                converged,
                estimator_tag: EstimatorTag::Moment,
                warnings,
            })
        }
    }
}

fn positive_floor(v: &DVector<f64>) -> f64 {
    let mean_abs = v.iter().map(|x| x.abs()).sum::<f64>() / v.len().max(1) as f64;
    (1e-6 * mean_abs).max(1e-12)
}

fn clip_positive(theta: &DVector<f64>, warnings: &mut Vec<String>) -> DVector<f64> {
    let floor = positive_floor(theta);
    let clipped = theta.iter().filter(|&&t| t <= 0.0).count();
    if clipped > 0 {
        warnings.push(format!("{clipped} nonpositive variance(s) clipped to {floor:.3e}"));
    }
    theta.map(|t| if t <= 0.0 { floor } else { t })
}

/// Projections from the correlation rule evaluated at the sample covariance.
#[derive(Debug, Clone)]
pub struct PluginProjections {
    pub set: ProjectionSet,
    /// True when the sample covariance needed a ridge `eps I` to become
    /// positive definite (always the case for n <= J).
    pub ridged: bool,
}

/// Plug-in optimal projections: the correlation-rule design evaluated at the
/// centered sample covariance (divisor n). Deterministic given the samples.
pub fn plugin_optimal_projections(
    a: &RoutingMatrix,
    samples: &SampleBlock,
) -> Result<PluginProjections> {
    check_samples(a, samples)?;
    let mut sigma_hat = samples.sample_covariance();
    let eig = nalgebra::SymmetricEigen::new(sigma_hat.clone());
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    let mut ridged = false;
    if !(lmin > 1e-10 * lmax.max(f64::MIN_POSITIVE)) {
        let trace: f64 = sigma_hat.diagonal().sum();
        if !(trace > 0.0) {
            return Err(TomoError::SingularCovariance(
                "sample covariance has no positive mass to ridge".into(),
            ));
        }
        let eps = 1e-8 * trace / sigma_hat.nrows() as f64;
        for i in 0..sigma_hat.nrows() {
            sigma_hat[(i, i)] += eps;
        }
        ridged = true;
        log::warn!("plugin projections: singular sample covariance, ridged by {eps:.3e}");
    }
    let set = crate::gaussian::optimal_projections(a, &sigma_hat)?;
    Ok(PluginProjections { set, ridged })
}
