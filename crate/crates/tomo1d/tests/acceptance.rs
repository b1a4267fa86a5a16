//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use nalgebra::{DMatrix, DVector};
use rand::RngExt;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use tomo1d::cf_gmm::MixtureLinkModel;
use tomo1d::estimators::{
    estimate_1d, estimate_2d, estimate_mle, estimate_moment, EstimatorOptions, MeanVarianceRelation,
    SampleBlock,
};
use tomo1d::gaussian::{
    asymptotic_cov_1d, asymptotic_cov_2d, fisher_information, gaussian_log_density, gaussian_score,
    model_covariance, optimal_projections, GaussianModel,
};
use tomo1d::identifiability::{
    check_identifiability, two_leaf_determinant, ProjectionSet, DEFAULT_RANK_TOLERANCE,
};
use tomo1d::linalg::{rel_frobenius, SpdFactor};
use tomo1d::metrics::{mallows_distance, normalized_mallows, CdfCurve};
use tomo1d::seed::{derive_rng, SeedProvenance};
use tomo1d::simulate::{
    run_asymptotic_study, run_delay_experiment, run_traffic_experiment, sample_mm1_delay,
    DelayExperimentConfig, DelayMode, OdMeans, TrafficEstimator, TrafficExperimentConfig,
};
use tomo1d::topology::{build_router_routing, RoutingMatrix};

const ACCEPT_SEED: u64 = 20070213;

fn verdict(criterion: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn exp_theta(dim: usize, tag: &str, index: u64) -> DVector<f64> {
    let mut rng = derive_rng(ACCEPT_SEED, tag, index);
    DVector::from_fn(dim, |_, _| -(1.0 - rng.random::<f64>()).ln())
}

/// The seeded router instance shared by the analytic and Monte-Carlo checks.
fn router_instance() -> (RoutingMatrix, DVector<f64>) {
    let a = build_router_routing(4, 4, true).unwrap();
    let theta = exp_theta(a.n_components(), "router_theta", 0);
    (a, theta)
}

fn draw_gaussian_block(
    sigma_chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    j: usize,
    n: usize,
    tag: &str,
    idx: u64,
) -> SampleBlock {
    let mut rng = derive_rng(ACCEPT_SEED, tag, idx);
    let mut data = DMatrix::zeros(n, j);
    for r in 0..n {
        let z = DVector::from_fn(j, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = sigma_chol.l() * z;
        for c in 0..j {
            data[(r, c)] = y[c];
        }
    }
    SampleBlock::new(data, SeedProvenance::new(ACCEPT_SEED, tag, idx)).unwrap()
}

#[test]
fn criterion_01_optimal_projections_reach_fisher_bound() {
    let start = std::time::Instant::now();
    let topologies = [
        ("router_7x16", build_router_routing(4, 4, true).unwrap()),
        ("four_leaf", RoutingMatrix::four_leaf()),
    ];
    let mut worst = 0.0f64;
    for (tag, a) in &topologies {
        for instance in 0..50u64 {
            let theta = exp_theta(a.n_components(), tag, instance);
            let model = GaussianModel::new(theta).unwrap();
            let sigma = model_covariance(a, &model).unwrap();
            let projections = optimal_projections(a, &sigma).unwrap();
            let cov = asymptotic_cov_1d(a, &model, &projections).unwrap();
            let info = fisher_information(a, &model).unwrap();
            let bound = SpdFactor::new(&info, "accept").unwrap().inverse();
            worst = worst.max(rel_frobenius(cov.matrix(), &bound));
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        "1 (Theorem 3.1 optimality)",
        worst < 1e-8 && elapsed < 5.0,
        &format!("worst relative Frobenius gap {worst:.3e} over 100 instances in {elapsed:.2}s"),
    );
}

#[test]
fn criterion_02_identifiability_matches_determinant_oracle() {
    let start = std::time::Instant::now();
    let a_mat = RoutingMatrix::two_leaf();
    let mut checked = 0usize;
    let mut ok = true;
    let mut detail = String::new();
    for &a in &[-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0] {
        let set = ProjectionSet::two_leaf_family(a);
        let report = check_identifiability(&set, &a_mat, 20, DEFAULT_RANK_TOLERANCE).unwrap();
        for &(n, rank) in &report.rank_by_order {
            let full = rank == 3;
            let oracle = two_leaf_determinant(a, n as u32) != 0.0;
            if full != oracle {
                ok = false;
                detail = format!("mismatch at a={a}, n={n}");
            }
            checked += 1;
        }
        if a == -1.0 && report.first_failing_order != Some(3) {
            ok = false;
            detail = format!("a=-1 first failure {:?}", report.first_failing_order);
        }
        if a == 0.0 && report.rank_by_order.iter().any(|&(_, r)| r == 3) {
            ok = false;
            detail = "a=0 passed some order".into();
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    if ok {
        detail = format!("{checked} (a, n) verdicts match the closed form in {elapsed:.3}s");
    }
    verdict("2 (Lemma 2.1 identifiability)", ok && elapsed < 1.0, &detail);
}

#[test]
fn criterion_03_sandwich_covariances_validated_by_monte_carlo() {
    let (a, theta) = router_instance();
    let model = GaussianModel::new(theta.clone()).unwrap();
    let sigma = model_covariance(&a, &model).unwrap();
    let chol = nalgebra::Cholesky::new(sigma.clone()).unwrap();
    let projections = optimal_projections(&a, &sigma).unwrap();
    let asym_1d = asymptotic_cov_1d(&a, &model, &projections).unwrap();
    let asym_2d = asymptotic_cov_2d(&a, &model).unwrap();

    let n = 4000usize;
    let replicates = 200usize;
    let i_dim = a.n_components();
    let opts = EstimatorOptions::default();

    let rows: Vec<(DVector<f64>, DVector<f64>)> = (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let samples = draw_gaussian_block(&chol, a.n_measurements(), n, "sandwich", rep as u64);
            let init = estimate_moment(&a, &samples, None).unwrap().theta();
            let one_d = estimate_1d(&a, &samples, &projections, &init, &opts).unwrap();
            assert!(one_d.converged, "1D fit failed to converge in replicate {rep}");
            let two_d = estimate_2d(&a, &samples, &init, &opts).unwrap();
            assert!(two_d.converged, "2D fit failed to converge in replicate {rep}");
            let scale = (n as f64).sqrt();
            (
                scale * (one_d.theta() - &theta),
                scale * (two_d.theta() - &theta),
            )
        })
        .collect();

    let empirical_var = |pick: &dyn Fn(&(DVector<f64>, DVector<f64>)) -> &DVector<f64>| {
        let mean = rows
            .iter()
            .fold(DVector::zeros(i_dim), |acc, row| acc + pick(row))
            / replicates as f64;
        rows.iter().fold(DVector::zeros(i_dim), |acc, row| {
            let d = pick(row) - &mean;
            acc + d.component_mul(&d)
        }) / replicates as f64
    };

    let var_1d = empirical_var(&|row| &row.0);
    let var_2d = empirical_var(&|row| &row.1);
    let mut worst_1d = 0.0f64;
    let mut worst_2d = 0.0f64;
    for i in 0..i_dim {
        worst_1d = worst_1d.max((var_1d[i] / asym_1d.matrix()[(i, i)] - 1.0).abs());
        worst_2d = worst_2d.max((var_2d[i] / asym_2d.matrix()[(i, i)] - 1.0).abs());
    }
    verdict(
        "3 (sandwich validity, Monte Carlo)",
        worst_1d < 0.25 && worst_2d < 0.25,
        &format!(
            "worst diagonal deviation: 1D {:.1}%, 2D {:.1}% over {replicates} replicates at n = {n}",
            100.0 * worst_1d,
            100.0 * worst_2d
        ),
    );
}

#[test]
fn criterion_04_design_ordering_is_analytic() {
    let (a, theta) = router_instance();
    let table = run_asymptotic_study(&a, &theta, &[32], 100, ACCEPT_SEED).unwrap();
    let i_dim = a.n_components();

    let opt_le_2d = (0..i_dim)
        .all(|i| table.optimal_1d[i] <= table.two_d[i] * (1.0 + 1e-9));
    let rand32 = &table.random_medians[0].1;
    let favorable = (0..i_dim).filter(|&i| table.two_d[i] <= rand32[i]).count();
    verdict(
        "4 (design ordering, Fig. 4)",
        opt_le_2d && favorable >= 12,
        &format!(
            "optimal <= 2D on all {i_dim}; 2D <= median random(K=32) on {favorable}/{i_dim}"
        ),
    );
}

#[test]
fn criterion_05_traffic_experiment_orderings() {
    let config = TrafficExperimentConfig {
        n_in: 4,
        n_out: 4,
        od_means: OdMeans::LogUniform { low: 1.0, high: 100.0 },
        relation: MeanVarianceRelation::new(1.0, 2.0).unwrap(),
        n_samples: 1000,
        n_runs: 50,
        seed: ACCEPT_SEED,
        estimators: vec![
            TrafficEstimator::Moment,
            TrafficEstimator::TwoD,
            TrafficEstimator::OneDOpt,
            TrafficEstimator::Mle,
        ],
    };
    let result = run_traffic_experiment(&config).unwrap();
    let mm = &result.medians["moment"];
    let twod = &result.medians["two_d"];
    let oned = &result.medians["one_d_opt"];
    let mle = &result.medians["mle"];
    let i_dim = mm.len();
    let good = (0..i_dim)
        .filter(|&i| mm[i] >= twod[i] && twod[i] >= oned[i] && oned[i] <= 1.25 * mle[i])
        .count();
    let failures: usize = result.failures.values().sum();
    verdict(
        "5 (traffic experiment, Fig. 5)",
        good >= 12,
        &format!(
            "orderings MM >= 2D >= 1D and 1D <= 1.25*MLE hold on {good}/{i_dim} parameters \
             ({failures} non-converged runs excluded)"
        ),
    );
}

#[test]
fn criterion_06_delay_experiment_orderings() {
    let mut config = DelayExperimentConfig::new(RoutingMatrix::four_leaf(), ACCEPT_SEED);
    config.n_samples = 1000;
    config.n_runs = 50;
    config.modes = vec![DelayMode::TwoD, DelayMode::OneDCor, DelayMode::OneDRand];
    let result = run_delay_experiment(&config).unwrap();
    let twod = &result.medians["two_d"];
    let cor = &result.medians["one_d_cor"];
    let rand = &result.medians["one_d_rand"];
    let links = twod.len();

    let ordered = (0..links)
        .filter(|&i| twod[i] <= cor[i] && cor[i] <= rand[i])
        .count();
    let close_second = (0..links).all(|i| cor[i] <= 1.3 * twod[i]);
    let failures: usize = result.failures.values().sum();
    verdict(
        "6 (delay experiment, Fig. 7)",
        ordered >= 5 && close_second,
        &format!(
            "2D <= 1D.Cor <= 1D.Rand on {ordered}/{links} links; 1D.Cor <= 1.3*2D on all links: \
             {close_second} ({failures} non-converged fits excluded)"
        ),
    );
}

#[test]
fn criterion_07_score_matches_finite_differences() {
    let topologies = [
        RoutingMatrix::two_leaf(),
        RoutingMatrix::four_leaf(),
        build_router_routing(2, 2, true).unwrap(),
        build_router_routing(4, 4, true).unwrap(),
    ];
    let mut worst = 0.0f64;
    for trial in 0..20u64 {
        let a = &topologies[(trial % 4) as usize];
        let mut rng = derive_rng(ACCEPT_SEED, "score_fd", trial);
        let theta = DVector::from_fn(a.n_components(), |_, _| 0.2 + 3.0 * rng.random::<f64>());
        let model = GaussianModel::new(theta.clone()).unwrap();
        let y = DVector::from_fn(a.n_measurements(), |_, _| {
            2.0 * rng.sample::<f64, _>(StandardNormal)
        });
        let score = gaussian_score(a, &model, &y).unwrap();
        for i in 0..a.n_components() {
            let h = 1e-5 * theta[i];
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (gaussian_log_density(a, &GaussianModel::new(up).unwrap(), &y).unwrap()
                - gaussian_log_density(a, &GaussianModel::new(dn).unwrap(), &y).unwrap())
                / (2.0 * h);
            let rel = (score[i] + fd).abs() / score[i].abs().max(fd.abs()).max(1e-12);
            worst = worst.max(rel);
        }
    }
    verdict(
        "7 (gradient correctness)",
        worst < 1e-5,
        &format!("worst relative error vs central differences {worst:.3e} over 20 triples"),
    );
}

#[test]
fn criterion_08_gaussian_fourth_moment_identity() {
    let rho = 0.5f64;
    let n = 1_000_000usize;
    let mut rng = derive_rng(ACCEPT_SEED, "fourth_moment", 0);
    let mut sum1 = 0.0;
    let mut sum2 = 0.0;
    let mut sum11 = 0.0;
    let mut sumsq = 0.0;
    let mut cross = 0.0;
    let mut sq1 = 0.0;
    let mut sq2 = 0.0;
    for _ in 0..n {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let n1 = z1;
        let n2 = rho * z1 + (1.0 - rho * rho).sqrt() * z2;
        sum1 += n1;
        sum2 += n2;
        sum11 += n1 * n2;
        sq1 += n1 * n1;
        sq2 += n2 * n2;
        cross += (n1 * n1) * (n2 * n2);
        sumsq += 0.0;
    }
    let _ = sumsq;
    let nf = n as f64;
    let cov_lin = sum11 / nf - (sum1 / nf) * (sum2 / nf);
    let cov_sq = cross / nf - (sq1 / nf) * (sq2 / nf);
    let expected = 2.0 * cov_lin * cov_lin;
    let rel = (cov_sq / expected - 1.0).abs();
    verdict(
        "8 (fourth-moment identity)",
        rel < 0.10,
        &format!(
            "cov(N1^2, N2^2) = {cov_sq:.5} vs 2 cov(N1, N2)^2 = {expected:.5} ({:.2}% off)",
            100.0 * rel
        ),
    );
}

#[test]
fn criterion_09_cf_fidelity_on_simulated_sums() {
    let a = RoutingMatrix::two_leaf();
    let mut rng = derive_rng(ACCEPT_SEED, "cf_uv", 0);
    let uv: Vec<(f64, f64)> = (0..3)
        .map(|_| {
            (
                0.3 + 0.4 * rng.random::<f64>(),
                -3.0f64 * (1.0 - rng.random::<f64>()).ln(),
            )
        })
        .collect();
    let models: Vec<MixtureLinkModel> = uv
        .iter()
        .map(|&(u, v)| MixtureLinkModel::mm1(u, v).unwrap())
        .collect();

    let n = 100_000usize;
    let mut data_rng = derive_rng(ACCEPT_SEED, "cf_data", 0);
    let x: Vec<Vec<f64>> = uv
        .iter()
        .map(|&(u, v)| sample_mm1_delay(u, v, n, &mut data_rng).unwrap())
        .collect();

    // The Lemma-style design {Y1, Y2, Y1 + Y2}, each scaled to unit sample
    // variance, checked over a grid of +-4 weight standard deviations.
    let weight_std = 5.0f64;
    let mut sup = 0.0f64;
    for beta in [
        DVector::from_vec(vec![1.0, 0.0]),
        DVector::from_vec(vec![0.0, 1.0]),
        DVector::from_vec(vec![1.0, 1.0]),
    ] {
        let z: Vec<f64> = (0..n)
            .map(|r| {
                let y1 = x[0][r] + x[1][r];
                let y2 = x[0][r] + x[2][r];
                beta[0] * y1 + beta[1] * y2
            })
            .collect();
        let mean = z.iter().sum::<f64>() / n as f64;
        let sd = (z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
        let z_norm: Vec<f64> = z.iter().map(|v| v / sd).collect();
        let beta_norm = &beta / sd;
        for step in 0..=100 {
            let t = -4.0 * weight_std + 8.0 * weight_std * step as f64 / 100.0;
            let emp = tomo1d::cf_gmm::empirical_cf(&z_norm, t);
            let model = tomo1d::cf_gmm::projection_cf(&a, &models, &beta_norm, t).unwrap();
            sup = sup.max((emp - model).norm());
        }
    }
    verdict(
        "9 (CF fidelity)",
        sup < 0.02,
        &format!("sup |empirical - model| CF error {sup:.4} over 3 projections x 101 nodes"),
    );
}

#[test]
fn criterion_10_mallows_metric_oracles() {
    let f = CdfCurve::uniform(0.0, 1.0).unwrap();
    let g = CdfCurve::uniform(0.0, 2.0).unwrap();
    let d = mallows_distance(&f, &g, 10_000);
    let uniform_ok = (d - 0.5).abs() < 1e-3;

    let c = 0.37;
    let base = CdfCurve::mm1(0.5, 2.0).unwrap();
    let (x, fv) = base.grid();
    let unshifted = CdfCurve::from_grid(x.to_vec(), fv.to_vec()).unwrap();
    let shifted = CdfCurve::from_grid(x.iter().map(|&v| v + c).collect(), fv.to_vec()).unwrap();
    let ds = mallows_distance(&unshifted, &shifted, 10_000);
    let shift_ok = (ds - c).abs() < 1e-3 * c;

    // The normalized variant is what the delay experiment reports.
    let self_zero = normalized_mallows(&base, &base, 10_000).unwrap() == 0.0;

    verdict(
        "10 (metric oracles)",
        uniform_ok && shift_ok && self_zero,
        &format!("Mallows(U[0,1], U[0,2]) = {d:.5}; shift-by-{c} recovered as {ds:.5}"),
    );
}
