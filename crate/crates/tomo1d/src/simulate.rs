//! Data generators and the three bundled experiment drivers.
//!
//! - an asymptotic study tabulating limit standard deviations of the
//!   optimal-1D, pairwise-2D and random-projection estimators on a router
//!   instance;
//! - a traffic-demand experiment on the one-router network (Gaussian OD
//!   traffic with a power mean-variance relation), scoring median
//!   log-absolute errors of the estimated mean rates;
//! - a delay-tomography experiment on a multicast tree (queueing-delay
//!   links, mixture fits via the CF objective), scoring median normalized
//!   Mallows distances per link.
//!
//! Every replicate derives its own RNG stream from `(root seed, tag, run
//! index)`, so results are independent of scheduling and of which estimator
//! modes are enabled; identical configs reproduce identical tables.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cf_gmm::{
    fit_cf_gmm, fit_cf_gmm_pairwise, BinSpec, CfGmmOptions, CfWeightSpec,
};
use crate::error::{Result, TomoError};
use crate::estimators::{
    estimate_1d, estimate_2d, estimate_mle, estimate_moment, plugin_optimal_projections,
    EstimatorOptions, MeanVarianceRelation, SampleBlock,
};
use crate::gaussian::{
    asymptotic_cov_1d, asymptotic_cov_2d, model_covariance, optimal_projections,
    random_projections, GaussianModel,
};
use crate::metrics::{log_abs_error, normalized_mallows, CdfCurve};
use crate::seed::{derive_rng, derive_u64, SeedProvenance};
use crate::topology::{build_router_routing, RoutingMatrix};

/// Which estimators a traffic run exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficEstimator {
    Moment,
    TwoD,
    OneDOpt,
    Mle,
}

impl TrafficEstimator {
    pub fn name(&self) -> &'static str {
        match self {
            TrafficEstimator::Moment => "moment",
            TrafficEstimator::TwoD => "two_d",
            TrafficEstimator::OneDOpt => "one_d_opt",
            TrafficEstimator::Mle => "mle",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "moment" => Ok(Self::Moment),
            "two_d" => Ok(Self::TwoD),
            "one_d_opt" => Ok(Self::OneDOpt),
            "mle" => Ok(Self::Mle),
            other => Err(TomoError::Config(format!("unknown estimator '{other}'"))),
        }
    }
}

/// Projection modes of the delay experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayMode {
    OneDCor,
    OneDRand,
    TwoD,
}

impl DelayMode {
    pub fn name(&self) -> &'static str {
        match self {
            DelayMode::OneDCor => "one_d_cor",
            DelayMode::OneDRand => "one_d_rand",
            DelayMode::TwoD => "two_d",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "one_d_cor" => Ok(Self::OneDCor),
            "one_d_rand" => Ok(Self::OneDRand),
            "two_d" => Ok(Self::TwoD),
            other => Err(TomoError::Config(format!("unknown mode '{other}'"))),
        }
    }
}

/// OD mean rates: explicit values or a log-uniform draw frozen by the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OdMeans {
    Explicit(Vec<f64>),
    LogUniform { low: f64, high: f64 },
}

impl OdMeans {
    /// Materialize the mean vector for `n_components` components. The
    /// log-uniform draw uses its own stream so it is frozen across runs.
    pub fn resolve(&self, n_components: usize, seed: u64) -> Result<DVector<f64>> {
        match self {
            OdMeans::Explicit(v) => {
                if v.len() != n_components {
                    return Err(TomoError::Config(format!(
                        "od_means has {} entries, expected {n_components}",
                        v.len()
                    )));
                }
                if v.iter().any(|&m| !(m > 0.0)) {
                    return Err(TomoError::Config("od_means must be positive".into()));
                }
                Ok(DVector::from_row_slice(v))
            }
            OdMeans::LogUniform { low, high } => {
                if !(*low > 0.0 && high > low) {
                    return Err(TomoError::Config(
                        "log-uniform range needs 0 < low < high".into(),
                    ));
                }
                let mut rng = derive_rng(seed, "od_means", 0);
                let (ll, lh) = (low.ln(), high.ln());
                Ok(DVector::from_fn(n_components, |_, _| {
                    (ll + (lh - ll) * rng.random::<f64>()).exp()
                }))
            }
        }
    }
}

/// Configuration of the traffic-demand experiment (one-router network).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficExperimentConfig {
    pub n_in: usize,
    pub n_out: usize,
    pub od_means: OdMeans,
    pub relation: MeanVarianceRelation,
    pub n_samples: usize,
    pub n_runs: usize,
    pub seed: u64,
    pub estimators: Vec<TrafficEstimator>,
}

impl TrafficExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.n_samples < 2 || self.n_runs < 1 {
            return Err(TomoError::Config(
                "need n_samples >= 2 and n_runs >= 1".into(),
            ));
        }
        if self.estimators.is_empty() {
            return Err(TomoError::Config("no estimators selected".into()));
        }
        Ok(())
    }
}

/// Configuration of the delay-tomography experiment.
#[derive(Debug, Clone)]
pub struct DelayExperimentConfig {
    pub routing: RoutingMatrix,
    pub u_range: (f64, f64),
    pub v_mean: f64,
    pub n_samples: usize,
    pub n_runs: usize,
    pub n_bins: usize,
    pub weight: CfWeightSpec,
    pub modes: Vec<DelayMode>,
    pub seed: u64,
    /// Redraw per-link (u, v) each run instead of freezing one setup.
    pub redraw_uv_each_run: bool,
    /// Export CDF curves for this run index.
    pub emit_cdf_run: Option<usize>,
}

impl DelayExperimentConfig {
    pub fn new(routing: RoutingMatrix, seed: u64) -> Self {
        Self {
            routing,
            u_range: (0.3, 0.7),
            v_mean: 3.0,
            n_samples: 1000,
            n_runs: 100,
            n_bins: 10,
            weight: CfWeightSpec::default(),
            modes: vec![DelayMode::TwoD, DelayMode::OneDCor, DelayMode::OneDRand],
            seed,
            redraw_uv_each_run: false,
            emit_cdf_run: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.u_range;
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return Err(TomoError::Config(
                "utilization range must satisfy 0 < lo <= hi < 1".into(),
            ));
        }
        if !(self.v_mean > 0.0) {
            return Err(TomoError::Config("v_mean must be positive".into()));
        }
        if self.n_samples < 2 || self.n_runs < 1 || self.n_bins < 1 {
            return Err(TomoError::Config(
                "need n_samples >= 2, n_runs >= 1, n_bins >= 1".into(),
            ));
        }
        if self.modes.is_empty() {
            return Err(TomoError::Config("no projection modes selected".into()));
        }
        if self.modes.contains(&DelayMode::TwoD) && self.routing.n_measurements() < 2 {
            return Err(TomoError::Config(
                "pairwise mode needs at least two measurements".into(),
            ));
        }
        Ok(())
    }
}

/// Gaussian OD draw: `X_i ~ N(mu_i, phi mu_i^c)` independently, `Y = A X`.
pub struct OdSample {
    pub x: DMatrix<f64>,
    pub y: SampleBlock,
}

pub fn sample_gaussian_od<R: Rng + ?Sized>(
    a: &RoutingMatrix,
    means: &DVector<f64>,
    relation: &MeanVarianceRelation,
    n: usize,
    rng: &mut R,
    provenance: SeedProvenance,
) -> Result<OdSample> {
    if means.len() != a.n_components() {
        return Err(TomoError::DimensionMismatch(
            "mean vector does not match component count".into(),
        ));
    }
    if means.iter().any(|&m| !(m > 0.0)) {
        return Err(TomoError::InvalidParameter("means must be positive".into()));
    }
    let i_dim = a.n_components();
    let sds: Vec<f64> = means.iter().map(|&m| relation.variance(m).sqrt()).collect();
    let mut x = DMatrix::zeros(n, i_dim);
    for r in 0..n {
        for i in 0..i_dim {
            x[(r, i)] = means[i] + sds[i] * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let y = &x * a.matrix().transpose();
    Ok(OdSample {
        x,
        y: SampleBlock::new(y, provenance)?,
    })
}

/// Queueing delay draw: zero with probability `1 - u`, otherwise an
/// exponential of mean `v`.
pub fn sample_mm1_delay<R: Rng + ?Sized>(u: f64, v: f64, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if !(u > 0.0 && u < 1.0) || !(v > 0.0) {
        return Err(TomoError::InvalidParameter(
            "need 0 < u < 1 and v > 0".into(),
        ));
    }
    Ok((0..n)
        .map(|_| {
            if rng.random::<f64>() < u {
                -v * (1.0 - rng.random::<f64>()).ln()
            } else {
                0.0
            }
        })
        .collect())
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Per-parameter limit standard deviations of the competing designs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticStudyTable {
    pub theta: Vec<f64>,
    /// sqrt diag of the optimal-1D limit covariance (equals the MLE's).
    pub optimal_1d: Vec<f64>,
    pub two_d: Vec<f64>,
    /// For each requested K: per-parameter medians over the replicate draws.
    pub random_medians: Vec<(usize, Vec<f64>)>,
    /// Random draws whose design failed (rank-deficient), per K.
    pub failures: Vec<(usize, usize)>,
}

/// Tabulate limit stds for optimal-1D, pairwise-2D, and K random projections
/// (medians over `n_replicates` draws per K).
pub fn run_asymptotic_study(
    a: &RoutingMatrix,
    theta: &DVector<f64>,
    k_list: &[usize],
    n_replicates: usize,
    seed: u64,
) -> Result<AsymptoticStudyTable> {
    let model = GaussianModel::new(theta.clone())?;
    let sigma = model_covariance(a, &model)?;
    let opt = optimal_projections(a, &sigma)?;
    let optimal_1d: Vec<f64> = asymptotic_cov_1d(a, &model, &opt)?
        .limit_stds()
        .iter()
        .copied()
        .collect();
    let two_d: Vec<f64> = asymptotic_cov_2d(a, &model)?
        .limit_stds()
        .iter()
        .copied()
        .collect();

    let i_dim = a.n_components();
    let mut random_medians = Vec::new();
    let mut failures = Vec::new();
    for &k in k_list {
        let draws: Vec<Option<Vec<f64>>> = (0..n_replicates)
            .into_par_iter()
            .map(|rep| {
                let mut rng = derive_rng(seed, &format!("random_proj_k{k}"), rep as u64);
                let set = random_projections(&sigma, k, &mut rng).ok()?;
                let cov = asymptotic_cov_1d(a, &model, &set).ok()?;
                Some(cov.limit_stds().iter().copied().collect())
            })
            .collect();
        let ok: Vec<&Vec<f64>> = draws.iter().flatten().collect();
        failures.push((k, n_replicates - ok.len()));
        let med = (0..i_dim)
            .map(|i| median(ok.iter().map(|stds| stds[i]).collect()))
            .collect();
        random_medians.push((k, med));
    }

    Ok(AsymptoticStudyTable {
        theta: theta.iter().copied().collect(),
        optimal_1d,
        two_d,
        random_medians,
        failures,
    })
}

/// Median log-absolute errors of the estimated mean rates, per estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrafficExperimentResult {
    pub mean_truth: Vec<f64>,
    /// estimator name -> per-parameter median |log mu_hat - log mu|.
    pub medians: BTreeMap<String, Vec<f64>>,
    /// estimator name -> runs that failed to converge (excluded above).
    pub failures: BTreeMap<String, usize>,
    pub n_runs: usize,
}

pub fn run_traffic_experiment(config: &TrafficExperimentConfig) -> Result<TrafficExperimentResult> {
    config.validate()?;
    let a = build_router_routing(config.n_in, config.n_out, true)?;
    let i_dim = a.n_components();
    let means = config.od_means.resolve(i_dim, config.seed)?;
    let relation = config.relation;
    let opts = EstimatorOptions::with_relation(relation);

    type RunErrors = BTreeMap<&'static str, Option<Vec<f64>>>;
    let runs: Vec<Result<RunErrors>> = (0..config.n_runs)
        .into_par_iter()
        .map(|run| -> Result<RunErrors> {
            let mut rng = derive_rng(config.seed, "traffic_run", run as u64);
            let sample = sample_gaussian_od(
                &a,
                &means,
                &relation,
                config.n_samples,
                &mut rng,
                SeedProvenance::new(config.seed, "traffic_run", run as u64),
            )?;
            let moment = estimate_moment(&a, &sample.y, Some(&relation))?;
            let init = moment.mu().expect("moment estimator always returns means");

            let mut out: RunErrors = BTreeMap::new();
            for est in &config.estimators {
                let report = match est {
                    TrafficEstimator::Moment => Ok(moment.clone()),
                    TrafficEstimator::Mle => estimate_mle(&a, &sample.y, &init, &opts),
                    TrafficEstimator::TwoD => estimate_2d(&a, &sample.y, &init, &opts),
                    TrafficEstimator::OneDOpt => plugin_optimal_projections(&a, &sample.y)
                        .and_then(|plug| estimate_1d(&a, &sample.y, &plug.set, &init, &opts)),
                };
                let entry = match report {
                    Ok(rep) if rep.converged => match rep.mu_hat {
                        Some(mu_hat) => {
                            log_abs_error(&mu_hat, means.as_slice()).ok()
                        }
                        None => None,
                    },
                    _ => None,
                };
                out.insert(est.name(), entry);
            }
            Ok(out)
        })
        .collect();

    let mut medians = BTreeMap::new();
    let mut failures = BTreeMap::new();
    for est in &config.estimators {
        let name = est.name();
        let mut per_run = Vec::new();
        let mut failed = 0usize;
        for run in &runs {
            match run {
                Ok(map) => match map.get(name) {
                    Some(Some(errs)) => per_run.push(errs.clone()),
                    _ => failed += 1,
                },
                Err(_) => failed += 1,
            }
        }
        let med: Vec<f64> = (0..i_dim)
            .map(|i| median(per_run.iter().map(|e| e[i]).collect()))
            .collect();
        medians.insert(name.to_string(), med);
        failures.insert(name.to_string(), failed);
    }

    Ok(TrafficExperimentResult {
        mean_truth: means.iter().copied().collect(),
        medians,
        failures,
        n_runs: config.n_runs,
    })
}

/// CDF curves exported for one link of one run.
#[derive(Debug, Clone)]
pub struct LinkCdfSet {
    pub link: usize,
    pub truth: CdfCurve,
    pub fitted: BTreeMap<String, CdfCurve>,
}

/// Median normalized Mallows distances per link, per projection mode.
#[derive(Debug, Clone)]
pub struct DelayExperimentResult {
    /// Per-link (utilization, scale) of the frozen setup; `None` when the
    /// setup is redrawn per run.
    pub link_uv: Option<Vec<(f64, f64)>>,
    pub medians: BTreeMap<String, Vec<f64>>,
    pub failures: BTreeMap<String, usize>,
    pub n_runs: usize,
    pub cdf_curves: Option<Vec<LinkCdfSet>>,
}

fn draw_uv(config: &DelayExperimentConfig, index: u64) -> Vec<(f64, f64)> {
    let mut rng = derive_rng(config.seed, "uv_setup", index);
    let (lo, hi) = config.u_range;
    (0..config.routing.n_components())
        .map(|_| {
            let u = lo + (hi - lo) * rng.random::<f64>();
            let v = -config.v_mean * (1.0 - rng.random::<f64>()).ln();
            (u, v)
        })
        .collect()
}

fn ridged_sample_covariance(samples: &SampleBlock) -> DMatrix<f64> {
    let mut sigma = samples.sample_covariance();
    let eig = nalgebra::SymmetricEigen::new(sigma.clone());
    let lmax = eig.eigenvalues.max();
    if !(eig.eigenvalues.min() > 1e-10 * lmax.max(f64::MIN_POSITIVE)) {
        let eps = 1e-8 * sigma.diagonal().sum().max(f64::MIN_POSITIVE) / sigma.nrows() as f64;
        for i in 0..sigma.nrows() {
            sigma[(i, i)] += eps;
        }
    }
    sigma
}

struct DelayRunOutput {
    mallows: BTreeMap<&'static str, Option<Vec<f64>>>,
    curves: Option<Vec<LinkCdfSet>>,
}

fn delay_run(
    config: &DelayExperimentConfig,
    run: usize,
    uv: &[(f64, f64)],
) -> Result<DelayRunOutput> {
    let a = &config.routing;
    let i_dim = a.n_components();
    let n = config.n_samples;

    let mut rng = derive_rng(config.seed, "delay_run", run as u64);
    let mut x = DMatrix::zeros(n, i_dim);
    for (i, &(u, v)) in uv.iter().enumerate() {
        let delays = sample_mm1_delay(u, v, n, &mut rng)?;
        for r in 0..n {
            x[(r, i)] = delays[r];
        }
    }
    let y = SampleBlock::new(
        &x * a.matrix().transpose(),
        SeedProvenance::new(config.seed, "delay_run", run as u64),
    )?;

    // Bin edges at quantiles of each link's true positive part, the tail
    // rate from its true scale (quantiles are treated as predetermined).
    let specs: Vec<BinSpec> = uv
        .iter()
        .map(|&(_, v)| {
            BinSpec::from_positive_quantiles(|p| -v * (1.0 - p).ln(), config.n_bins, 1.0 / v)
        })
        .collect::<Result<_>>()?;

    // Fresh Monte-Carlo nodes per run, still fully seed-derived.
    let weight = CfWeightSpec {
        seed: derive_u64(config.seed, "cf_nodes_seed", run as u64),
        ..config.weight
    };
    let fit_opts = CfGmmOptions::default();

    let mut mallows: BTreeMap<&'static str, Option<Vec<f64>>> = BTreeMap::new();
    let mut curves: Option<Vec<LinkCdfSet>> = None;
    let emit = config.emit_cdf_run == Some(run);
    if emit {
        let sets = uv
            .iter()
            .enumerate()
            .map(|(i, &(u, v))| {
                Ok(LinkCdfSet {
                    link: i,
                    truth: CdfCurve::mm1(u, v)?,
                    fitted: BTreeMap::new(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        curves = Some(sets);
    }

    for mode in &config.modes {
        let fit = match mode {
            DelayMode::OneDCor => plugin_optimal_projections(a, &y)
                .and_then(|plug| fit_cf_gmm(a, &y, &plug.set, &specs, &weight, &fit_opts)),
            DelayMode::OneDRand => {
                let sigma = ridged_sample_covariance(&y);
                let mut proj_rng = derive_rng(config.seed, "delay_rand_proj", run as u64);
                random_projections(&sigma, i_dim, &mut proj_rng)
                    .and_then(|set| fit_cf_gmm(a, &y, &set, &specs, &weight, &fit_opts))
            }
            DelayMode::TwoD => fit_cf_gmm_pairwise(a, &y, &specs, &weight, &fit_opts),
        };
        let entry = match fit {
            Ok(fit) if fit.converged => {
                let mut per_link = Vec::with_capacity(i_dim);
                let mut ok = true;
                for (i, &(u, v)) in uv.iter().enumerate() {
                    let truth = CdfCurve::mm1(u, v)?;
                    match CdfCurve::from_mixture(&fit.models[i])
                        .and_then(|hat| normalized_mallows(&truth, &hat, 10_000))
                    {
                        Ok(d) => per_link.push(d),
                        Err(_) => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    if let Some(curve_sets) = curves.as_mut() {
                        for (i, set) in curve_sets.iter_mut().enumerate() {
                            set.fitted.insert(
                                mode.name().to_string(),
                                CdfCurve::from_mixture(&fit.models[i])?,
                            );
                        }
                    }
                    Some(per_link)
                } else {
                    None
                }
            }
            _ => None,
        };
        mallows.insert(mode.name(), entry);
    }

    Ok(DelayRunOutput { mallows, curves })
}

pub fn run_delay_experiment(config: &DelayExperimentConfig) -> Result<DelayExperimentResult> {
    config.validate()?;
    let i_dim = config.routing.n_components();
    let frozen_uv = if config.redraw_uv_each_run {
        None
    } else {
        Some(draw_uv(config, 0))
    };

    let runs: Vec<Result<DelayRunOutput>> = (0..config.n_runs)
        .into_par_iter()
        .map(|run| {
            let uv = match &frozen_uv {
                Some(uv) => uv.clone(),
                None => draw_uv(config, run as u64 + 1),
            };
            delay_run(config, run, &uv)
        })
        .collect();

    let mut medians = BTreeMap::new();
    let mut failures = BTreeMap::new();
    let mut curves = None;
    for mode in &config.modes {
        let name = mode.name();
        let mut per_run = Vec::new();
        let mut failed = 0usize;
        for run in &runs {
            match run {
                Ok(out) => match out.mallows.get(name) {
                    Some(Some(v)) => per_run.push(v.clone()),
                    _ => failed += 1,
                },
                Err(_) => failed += 1,
            }
        }
        let med: Vec<f64> = (0..i_dim)
            .map(|i| median(per_run.iter().map(|v| v[i]).collect()))
            .collect();
        medians.insert(name.to_string(), med);
        failures.insert(name.to_string(), failed);
    }
    for run in runs.into_iter().flatten() {
        if let Some(c) = run.curves {
            curves = Some(c);
        }
    }

    Ok(DelayExperimentResult {
        link_uv: frozen_uv,
        medians,
        failures,
        n_runs: config.n_runs,
        cdf_curves: curves,
    })
}
