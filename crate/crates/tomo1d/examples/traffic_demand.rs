//! Traffic-demand tomography on the one-router network, desk scale.
//!
//! Gaussian OD counts with variance = mean^2, estimated from per-link byte
//! counts by four estimators; reports the median |log(mu_hat) - log(mu)| per
//! OD pair. A smaller run count than the bundled fig5.cfg keeps this quick.
//!
//! Run with: cargo run --release --example traffic_demand

use tomo1d::estimators::MeanVarianceRelation;
use tomo1d::simulate::{
    run_traffic_experiment, OdMeans, TrafficEstimator, TrafficExperimentConfig,
};

fn main() -> tomo1d::Result<()> {
    let estimators = vec![
        TrafficEstimator::Moment,
        TrafficEstimator::TwoD,
        TrafficEstimator::OneDOpt,
        TrafficEstimator::Mle,
    ];
    let config = TrafficExperimentConfig {
        n_in: 4,
        n_out: 4,
        od_means: OdMeans::LogUniform { low: 1.0, high: 100.0 },
        relation: MeanVarianceRelation::new(1.0, 2.0)?,
        n_samples: 1000,
        n_runs: 20,
        seed: 41,
        estimators: estimators.clone(),
    };
    let result = run_traffic_experiment(&config)?;

    println!("median |log error| of mean OD rates over {} runs:", result.n_runs);
    println!(
        "{:>5} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "pair", "mean", "moment", "two_d", "one_d_opt", "mle"
    );
    for i in 0..result.mean_truth.len() {
        println!(
            "{:>5} {:>10.3} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            i + 1,
            result.mean_truth[i],
            result.medians["moment"][i],
            result.medians["two_d"][i],
            result.medians["one_d_opt"][i],
            result.medians["mle"][i]
        );
    }
    for est in &estimators {
        let f = result.failures[est.name()];
        if f > 0 {
            println!("note: {} failed to converge in {f} run(s)", est.name());
        }
    }

    let count = |a: &str, b: &str| {
        (0..result.mean_truth.len())
            .filter(|&i| result.medians[a][i] <= result.medians[b][i])
            .count()
    };
    println!(
        "\norderings: 1D <= 2D on {}/16 pairs, 2D <= moment on {}/16, 1D vs MLE within ratio {:.3} (max)",
        count("one_d_opt", "two_d"),
        count("two_d", "moment"),
        (0..result.mean_truth.len())
            .map(|i| result.medians["one_d_opt"][i] / result.medians["mle"][i])
            .fold(0.0f64, f64::max)
    );
    Ok(())
}
