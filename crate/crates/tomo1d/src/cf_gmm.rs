//! Characteristic-function GMM estimation of mixture-modeled link delays.
//!
//! Each latent component gets a mixture law: an atom at zero, uniform pieces
//! over fixed bin edges, and an exponential tail from the last edge. The fit
//! minimizes the weighted L2 distance between empirical and model
//! characteristic functions of the projected measurements,
//! `sum_k int |phi_hat_k(t) - phi_k(t, theta)|^2 dmu(t)`,
//! where `mu` is a Gaussian weight sampled once by Monte Carlo (common random
//! nodes, so the objective is deterministic during optimization). With bin
//! edges and tail rates held fixed, the objective is quadratic in any one
//! link's weight vector, so the fit is cyclic coordinate descent with one
//! simplex-constrained quadratic program per link.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::estimators::SampleBlock;
use crate::identifiability::ProjectionSet;
use crate::seed::derive_rng;
use crate::simplex_qp::minimize_simplex_qp;
use crate::topology::RoutingMatrix;

/// Atom-at-zero + piecewise-uniform + exponential-tail distribution for one
/// latent component. The tail starts at the last bin edge (at zero when
/// there are no bins).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureLinkModel {
    pub atom_at_zero: f64,
    pub bin_edges: Vec<f64>,
    pub bin_weights: Vec<f64>,
    pub tail_weight: f64,
    pub tail_rate: f64,
}

impl MixtureLinkModel {
    pub fn new(
        atom_at_zero: f64,
        bin_edges: Vec<f64>,
        bin_weights: Vec<f64>,
        tail_weight: f64,
        tail_rate: f64,
    ) -> Result<Self> {
        let model = Self {
            atom_at_zero,
            bin_edges,
            bin_weights,
            tail_weight,
            tail_rate,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bin_edges.len() != self.bin_weights.len() {
            return Err(TomoError::InvalidParameter(
                "bin edges and weights differ in length".into(),
            ));
        }
        if self.bin_edges.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return Err(TomoError::InvalidParameter(
                "bin edges must be positive and finite".into(),
            ));
        }
        if self.bin_edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(TomoError::InvalidParameter(
                "bin edges must be strictly increasing".into(),
            ));
        }
        if !(self.tail_rate > 0.0) {
            return Err(TomoError::InvalidParameter("tail rate must be positive".into()));
        }
        let weights_ok = self.atom_at_zero >= 0.0
            && self.tail_weight >= 0.0
            && self.bin_weights.iter().all(|&w| w >= 0.0);
        if !weights_ok {
            return Err(TomoError::InvalidParameter("weights must be nonnegative".into()));
        }
        let total: f64 =
            self.atom_at_zero + self.tail_weight + self.bin_weights.iter().sum::<f64>();
        if (total - 1.0).abs() > 1e-12 {
            return Err(TomoError::InvalidParameter(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(())
    }

    /// The queueing law `P(X = 0) = 1 - u`, `P(X > x) = u exp(-x/v)`: an
    /// atom plus a tail starting at zero, no uniform pieces.
    pub fn mm1(u: f64, v: f64) -> Result<Self> {
        if !(u > 0.0 && u < 1.0) || !(v > 0.0) {
            return Err(TomoError::InvalidParameter(
                "utilization must be in (0,1) and scale positive".into(),
            ));
        }
        Self::new(1.0 - u, Vec::new(), Vec::new(), u, 1.0 / v)
    }

    /// Number of mixture components (atom + bins + tail).
    pub fn n_components(&self) -> usize {
        self.bin_weights.len() + 2
    }

    /// Weights in component order: atom, bins, tail.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.n_components());
        w.push(self.atom_at_zero);
        w.extend_from_slice(&self.bin_weights);
        w.push(self.tail_weight);
        w
    }

    /// Rebuild the model from a weight vector on the simplex.
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.n_components() {
            return Err(TomoError::DimensionMismatch(
                "weight vector does not match component count".into(),
            ));
        }
        Self::new(
            weights[0],
            self.bin_edges.clone(),
            weights[1..weights.len() - 1].to_vec(),
            weights[weights.len() - 1],
            self.tail_rate,
        )
    }

    fn tail_start(&self) -> f64 {
        self.bin_edges.last().copied().unwrap_or(0.0)
    }

    /// Characteristic function at `t`.
    pub fn cf(&self, t: f64) -> Complex64 {
        let mut value = Complex64::new(self.atom_at_zero, 0.0);
        let mut lo = 0.0;
        for (&hi, &w) in self.bin_edges.iter().zip(&self.bin_weights) {
            value += w * uniform_cf(lo, hi, t);
            lo = hi;
        }
        value += self.tail_weight * tail_cf(self.tail_start(), self.tail_rate, t);
        value
    }

    /// Cumulative distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let mut acc = self.atom_at_zero;
        let mut lo = 0.0;
        for (&hi, &w) in self.bin_edges.iter().zip(&self.bin_weights) {
            if x >= hi {
                acc += w;
            } else {
                acc += w * (x - lo) / (hi - lo);
                return acc.min(1.0);
            }
            lo = hi;
        }
        let start = self.tail_start();
        if x > start {
            acc += self.tail_weight * (1.0 - (-(x - start) * self.tail_rate).exp());
        }
        acc.min(1.0)
    }

    /// Generalized inverse of the CDF.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= self.atom_at_zero {
            return 0.0;
        }
        let mut cum = self.atom_at_zero;
        let mut lo = 0.0;
        for (&hi, &w) in self.bin_edges.iter().zip(&self.bin_weights) {
            if w > 0.0 && p <= cum + w {
                return lo + (p - cum) / w * (hi - lo);
            }
            cum += w;
            lo = hi;
        }
        let start = self.tail_start();
        if self.tail_weight <= 0.0 {
            return start;
        }
        let remaining = ((1.0 - p) / self.tail_weight).clamp(f64::MIN_POSITIVE, 1.0);
        start - remaining.ln() / self.tail_rate
    }

    /// Rescale the random variable by `s > 0`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            atom_at_zero: self.atom_at_zero,
            bin_edges: self.bin_edges.iter().map(|&e| e * s).collect(),
            bin_weights: self.bin_weights.clone(),
            tail_weight: self.tail_weight,
            tail_rate: self.tail_rate / s,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// CF of Uniform[lo, hi] with the removable t = 0 singularity handled by a
/// series expansion.
fn uniform_cf(lo: f64, hi: f64, t: f64) -> Complex64 {
    let width = hi - lo;
    let z = Complex64::new(0.0, t * width);
    let phase = Complex64::cis(t * lo);
    if (t * width).abs() < 1e-3 {
        // (e^z - 1)/z by series; the direct quotient loses ~eps/|z| digits
        // to cancellation, so the switchover sits where the five-term
        // truncation error (|z|^5/720) is already below 1e-17.
        let mut acc = Complex64::new(1.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for k in 2..=5 {
            term *= z / k as f64;
            acc += term;
        }
        phase * acc
    } else {
        phase * (z.exp() - 1.0) / z
    }
}

/// CF of `start + Exp(rate)`.
fn tail_cf(start: f64, rate: f64, t: f64) -> Complex64 {
    Complex64::cis(t * start) / Complex64::new(1.0, -t / rate)
}

/// Alias for [`MixtureLinkModel::cf`], the per-component model CF.
pub fn mixture_cf(model: &MixtureLinkModel, t: f64) -> Complex64 {
    model.cf(t)
}

/// Alias for [`MixtureLinkModel::cdf`].
pub fn mixture_cdf(model: &MixtureLinkModel, x: f64) -> f64 {
    model.cdf(x)
}

/// Model CF of the projection `beta' Y`: the product of per-component CFs at
/// `gamma_i t`, `gamma = A' beta`.
pub fn projection_cf(
    a: &RoutingMatrix,
    models: &[MixtureLinkModel],
    beta: &DVector<f64>,
    t: f64,
) -> Result<Complex64> {
    if models.len() != a.n_components() {
        return Err(TomoError::DimensionMismatch(
            "need one mixture model per latent component".into(),
        ));
    }
    if beta.len() != a.n_measurements() {
        return Err(TomoError::DimensionMismatch(
            "projection length does not match measurement count".into(),
        ));
    }
    let gamma = a.matrix().transpose() * beta;
    let mut value = Complex64::new(1.0, 0.0);
    for (model, &g) in models.iter().zip(gamma.iter()) {
        value *= model.cf(g * t);
    }
    Ok(value)
}

/// Empirical CF `mean_j exp(i t z_j)` of projected scalars.
pub fn empirical_cf(projected_samples: &[f64], t: f64) -> Complex64 {
    if projected_samples.is_empty() {
        return Complex64::new(1.0, 0.0);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for &z in projected_samples {
        acc += Complex64::cis(t * z);
    }
    acc / projected_samples.len() as f64
}

/// Gaussian weight measure for the CF objective: `n_nodes` Monte-Carlo nodes
/// per projection, drawn once from `N(0, std^2)` after each projection is
/// normalized to unit sample variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfWeightSpec {
    pub std: f64,
    pub n_nodes: usize,
    pub seed: u64,
}

impl CfWeightSpec {
    pub fn new(std: f64, n_nodes: usize, seed: u64) -> Result<Self> {
        if !(std > 0.0) || n_nodes == 0 {
            return Err(TomoError::InvalidParameter(
                "weight needs std > 0 and at least one node".into(),
            ));
        }
        Ok(Self { std, n_nodes, seed })
    }
}

impl Default for CfWeightSpec {
    fn default() -> Self {
        Self {
            std: 5.0,
            n_nodes: 64,
            seed: 0,
        }
    }
}

/// Fixed bin layout for one link: edges of the uniform pieces plus the tail
/// rate. Only mixture weights are optimized; keeping shapes fixed is what
/// makes each link subproblem a quadratic program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub edges: Vec<f64>,
    pub tail_rate: f64,
}

impl BinSpec {
    pub fn new(edges: Vec<f64>, tail_rate: f64) -> Result<Self> {
        // Reuse the mixture validation by building a placeholder model.
        let m = edges.len();
        let w = if m == 0 { 0.0 } else { 1.0 / m as f64 };
        MixtureLinkModel::new(
            if m == 0 { 0.5 } else { 0.0 },
            edges.clone(),
            vec![w; m],
            if m == 0 { 0.5 } else { 0.0 },
            tail_rate,
        )?;
        Ok(Self { edges, tail_rate })
    }

    /// Edges at quantiles `j / (n_bins + 1)` of a positive-part distribution
    /// given by its quantile function.
    pub fn from_positive_quantiles<F: Fn(f64) -> f64>(
        quantile: F,
        n_bins: usize,
        tail_rate: f64,
    ) -> Result<Self> {
        let edges = (1..=n_bins)
            .map(|j| quantile(j as f64 / (n_bins + 1) as f64))
            .collect();
        Self::new(edges, tail_rate)
    }

    /// Uniform mixture over the components described by this spec.
    pub fn uniform_model(&self) -> MixtureLinkModel {
        let m = self.edges.len();
        let w = 1.0 / (m + 2) as f64;
        MixtureLinkModel {
            atom_at_zero: w,
            bin_edges: self.edges.clone(),
            bin_weights: vec![w; m],
            tail_weight: w,
            tail_rate: self.tail_rate,
        }
    }

    fn component_cf(&self, component: usize, t: f64) -> Complex64 {
        let m = self.edges.len();
        if component == 0 {
            Complex64::new(1.0, 0.0)
        } else if component <= m {
            let lo = if component == 1 { 0.0 } else { self.edges[component - 2] };
            uniform_cf(lo, self.edges[component - 1], t)
        } else {
            tail_cf(self.edges.last().copied().unwrap_or(0.0), self.tail_rate, t)
        }
    }
}

/// One weighted moment condition: an empirical CF value and the per-link
/// coefficients at which the model CF product is evaluated.
struct CfCondition {
    /// Coefficient `c_i` per latent component; the model side is
    /// `prod_i psi_i(c_i)`.
    coeff: Vec<f64>,
    empirical: Complex64,
    weight: f64,
}

/// Sample standard deviation (divisor n) with a guard for degenerate data.
fn column_std(z: &[f64]) -> f64 {
    let n = z.len() as f64;
    let mean: f64 = z.iter().sum::<f64>() / n;
    let var: f64 = z.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var > 0.0 {
        var.sqrt()
    } else {
        1.0
    }
}

fn gaussian_nodes(weight: &CfWeightSpec, stream: &str, index: u64) -> Vec<f64> {
    let mut rng = derive_rng(weight.seed, stream, index);
    (0..weight.n_nodes)
        .map(|_| {
            rng.sample::<f64, _>(rand_distr::StandardNormal) * weight.std
        })
        .collect()
}

/// Conditions for 1D projections: per projection, normalize to unit sample
/// variance, draw nodes, and record empirical CF values.
fn conditions_1d(
    a: &RoutingMatrix,
    projections: &ProjectionSet,
    samples: &SampleBlock,
    weight: &CfWeightSpec,
) -> Result<Vec<CfCondition>> {
    let z = samples.project(projections)?;
    let gamma = projections.gamma(a)?;
    let mut conditions = Vec::with_capacity(projections.len() * weight.n_nodes);
    for k in 0..projections.len() {
        let zk: Vec<f64> = z.column(k).iter().copied().collect();
        let s = column_std(&zk);
        let zk_norm: Vec<f64> = zk.iter().map(|&v| v / s).collect();
        let nodes = gaussian_nodes(weight, "cf_nodes_1d", k as u64);
        let w = 1.0 / weight.n_nodes as f64;
        for &t in &nodes {
            let coeff: Vec<f64> = (0..a.n_components())
                .map(|i| gamma[(k, i)] / s * t)
                .collect();
            conditions.push(CfCondition {
                coeff,
                empirical: empirical_cf(&zk_norm, t),
                weight: w,
            });
        }
    }
    Ok(conditions)
}

/// Conditions for all pairwise 2D projections with a product Gaussian weight
/// of the same per-axis std, each axis normalized to unit sample variance.
fn conditions_2d(
    a: &RoutingMatrix,
    samples: &SampleBlock,
    weight: &CfWeightSpec,
) -> Result<Vec<CfCondition>> {
    let j_dim = a.n_measurements();
    if j_dim < 2 {
        return Err(TomoError::InvalidParameter(
            "pairwise conditions need at least two measurements".into(),
        ));
    }
    let data = samples.data();
    let stds: Vec<f64> = (0..j_dim)
        .map(|j| column_std(&data.column(j).iter().copied().collect::<Vec<f64>>()))
        .collect();
    let mut conditions = Vec::new();
    let mut pair_index = 0u64;
    for k in 0..j_dim {
        for l in (k + 1)..j_dim {
            let mut rng = derive_rng(weight.seed, "cf_nodes_2d", pair_index);
            pair_index += 1;
            let w = 1.0 / weight.n_nodes as f64;
            for _ in 0..weight.n_nodes {
                let t1 = rng.sample::<f64, _>(rand_distr::StandardNormal) * weight.std;
                let t2 = rng.sample::<f64, _>(rand_distr::StandardNormal) * weight.std;
                let coeff: Vec<f64> = (0..a.n_components())
                    .map(|i| t1 * a.matrix()[(k, i)] / stds[k] + t2 * a.matrix()[(l, i)] / stds[l])
                    .collect();
                let mut acc = Complex64::new(0.0, 0.0);
                for r in 0..samples.n() {
                    acc += Complex64::cis(t1 * data[(r, k)] / stds[k] + t2 * data[(r, l)] / stds[l]);
                }
                conditions.push(CfCondition {
                    coeff,
                    empirical: acc / samples.n() as f64,
                    weight: w,
                });
            }
        }
    }
    Ok(conditions)
}

fn objective_of(conditions: &[CfCondition], models: &[MixtureLinkModel]) -> f64 {
    conditions
        .iter()
        .map(|cond| {
            let mut value = Complex64::new(1.0, 0.0);
            for (model, &c) in models.iter().zip(&cond.coeff) {
                value *= model.cf(c);
            }
            cond.weight * (cond.empirical - value).norm_sqr()
        })
        .sum()
}

/// Weighted L2 distance between empirical and model CFs over the projection
/// set, with Monte-Carlo integration nodes fixed by the weight's seed.
pub fn cf_objective(
    a: &RoutingMatrix,
    models: &[MixtureLinkModel],
    projections: &ProjectionSet,
    samples: &SampleBlock,
    weight: &CfWeightSpec,
) -> Result<f64> {
    if models.len() != a.n_components() {
        return Err(TomoError::DimensionMismatch(
            "need one mixture model per latent component".into(),
        ));
    }
    let conditions = conditions_1d(a, projections, samples, weight)?;
    Ok(objective_of(&conditions, models))
}

/// Options for the coordinate-descent CF fit.
#[derive(Debug, Clone)]
pub struct CfGmmOptions {
    /// Stop when a full sweep decreases the objective by less than `tol`
    /// relative to the current objective.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Per-link QP tolerance.
    pub qp_tol: f64,
    /// Starting models; uniform weights over each link's components when
    /// absent.
    pub init: Option<Vec<MixtureLinkModel>>,
}

impl Default for CfGmmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_sweeps: 200,
            qp_tol: 1e-10,
            init: None,
        }
    }
}

/// Result of a CF-GMM fit.
#[derive(Debug, Clone)]
pub struct CfGmmFit {
    pub models: Vec<MixtureLinkModel>,
    pub objective: f64,
    pub sweeps: usize,
    pub converged: bool,
    /// Objective value after every accepted link update (non-increasing).
    pub objective_trace: Vec<f64>,
}

/// Fit mixture weights to 1D-projection CFs by cyclic quadratic programming.
pub fn fit_cf_gmm(
    a: &RoutingMatrix,
    samples: &SampleBlock,
    projections: &ProjectionSet,
    bin_specs: &[BinSpec],
    weight: &CfWeightSpec,
    options: &CfGmmOptions,
) -> Result<CfGmmFit> {
    let conditions = conditions_1d(a, projections, samples, weight)?;
    fit_conditions(a, &conditions, bin_specs, options)
}

/// Fit mixture weights to all pairwise 2D empirical CFs (product Gaussian
/// weight, same per-axis std).
pub fn fit_cf_gmm_pairwise(
    a: &RoutingMatrix,
    samples: &SampleBlock,
    bin_specs: &[BinSpec],
    weight: &CfWeightSpec,
    options: &CfGmmOptions,
) -> Result<CfGmmFit> {
    let conditions = conditions_2d(a, samples, weight)?;
    fit_conditions(a, &conditions, bin_specs, options)
}

fn fit_conditions(
    a: &RoutingMatrix,
    conditions: &[CfCondition],
    bin_specs: &[BinSpec],
    options: &CfGmmOptions,
) -> Result<CfGmmFit> {
    let i_dim = a.n_components();
    if bin_specs.len() != i_dim {
        return Err(TomoError::DimensionMismatch(
            "need one bin spec per latent component".into(),
        ));
    }
    let mut models: Vec<MixtureLinkModel> = match &options.init {
        Some(init) => {
            if init.len() != i_dim {
                return Err(TomoError::DimensionMismatch(
                    "init needs one model per latent component".into(),
                ));
            }
            for (m, spec) in init.iter().zip(bin_specs) {
                m.validate()?;
                if m.bin_edges != spec.edges || m.tail_rate != spec.tail_rate {
                    return Err(TomoError::InvalidParameter(
                        "init models must share the bin spec's edges and tail rate".into(),
                    ));
                }
            }
            init.clone()
        }
        None => bin_specs.iter().map(BinSpec::uniform_model).collect(),
    };

    // Per condition and link, the fixed component CF values at that link's
    // coefficient; the only data the sweeps need.
    let n_cond = conditions.len();
    let comp_cf: Vec<Vec<Vec<Complex64>>> = conditions
        .iter()
        .map(|cond| {
            (0..i_dim)
                .map(|i| {
                    (0..bin_specs[i].edges.len() + 2)
                        .map(|c| bin_specs[i].component_cf(c, cond.coeff[i]))
                        .collect()
                })
                .collect()
        })
        .collect();

    // psi[cond][i] = current model CF of link i at the condition coefficient.
    let mut psi = vec![vec![Complex64::new(0.0, 0.0); i_dim]; n_cond];
    let recompute_psi = |psi: &mut Vec<Vec<Complex64>>, models: &[MixtureLinkModel], link: usize| {
        let w = models[link].weights();
        for (cond_idx, row) in psi.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, &wc) in w.iter().enumerate() {
                acc += wc * comp_cf[cond_idx][link][c];
            }
            row[link] = acc;
        }
    };
    for i in 0..i_dim {
        recompute_psi(&mut psi, &models, i);
    }

    let mut objective = objective_of(conditions, &models);
    let mut trace = vec![objective];
    let mut converged = false;
    let mut sweeps = 0;

    for _ in 0..options.max_sweeps {
        sweeps += 1;
        let sweep_start = objective;
        for link in 0..i_dim {
            let n_comp = bin_specs[link].edges.len() + 2;
            // Quadratic subproblem: K - 2 b'p + p'Qp over the simplex, with
            // g_c(cond) = comp_cf * prod_{other} psi.
            let mut q = DMatrix::zeros(n_comp, n_comp);
            let mut b = DVector::zeros(n_comp);
            let mut constant = 0.0;
            let mut g = vec![Complex64::new(0.0, 0.0); n_comp];
            for (cond_idx, cond) in conditions.iter().enumerate() {
                let mut rest = Complex64::new(1.0, 0.0);
                for i in 0..i_dim {
                    if i != link {
                        rest *= psi[cond_idx][i];
                    }
                }
                for (c, gc) in g.iter_mut().enumerate() {
                    *gc = comp_cf[cond_idx][link][c] * rest;
                }
                constant += cond.weight * cond.empirical.norm_sqr();
                for c in 0..n_comp {
                    b[c] += cond.weight * (cond.empirical * g[c].conj()).re;
                    for d in c..n_comp {
                        q[(c, d)] += cond.weight * (g[c] * g[d].conj()).re;
                    }
                }
            }
            for c in 0..n_comp {
                for d in 0..c {
                    q[(c, d)] = q[(d, c)];
                }
            }
            let current = DVector::from_vec(models[link].weights());
            let solved = minimize_simplex_qp(&q, &b, Some(&current), options.qp_tol, 20_000);
            let obj_current = constant - 2.0 * b.dot(&current) + current.dot(&(&q * &current));
            let obj_solved = constant - 2.0 * b.dot(&solved) + solved.dot(&(&q * &solved));
            if obj_solved <= obj_current {
                models[link] = models[link].with_weights(solved.as_slice())?;
                recompute_psi(&mut psi, &models, link);
                objective = obj_solved;
            } else {
                objective = obj_current;
            }
            trace.push(objective);
        }
        if sweep_start - objective < options.tol * objective.abs().max(1e-30) {
            converged = true;
            break;
        }
    }

    Ok(CfGmmFit {
        models,
        objective,
        sweeps,
        converged,
        objective_trace: trace,
    })
}
