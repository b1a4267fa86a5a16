//! One simulated dataset, four estimators, side by side.
//!
//! Draws a single block of zero-mean Gaussian measurements from a two-leaf
//! tree, then estimates the three link variances by the moment method, the
//! 1D-projection pseudo-likelihood under the plug-in optimal design, the
//! all-pairs 2D pseudo-likelihood, and the exact MLE, with the moment
//! estimate as the shared starting value.
//!
//! Run with: cargo run --example estimator_showdown

use nalgebra::{DMatrix, DVector};
use rand::RngExt;
use rand_distr::StandardNormal;
use tomo1d::estimators::{
    estimate_1d, estimate_2d, estimate_mle, estimate_moment, plugin_optimal_projections,
    EstimatorOptions, SampleBlock,
};
use tomo1d::gaussian::{model_covariance, GaussianModel};
use tomo1d::seed::{derive_rng, SeedProvenance};
use tomo1d::topology::RoutingMatrix;

fn main() -> tomo1d::Result<()> {
    let a = RoutingMatrix::two_leaf();
    let theta = [1.0, 2.0, 0.5];
    let n = 20_000;

    let model = GaussianModel::from_slice(&theta)?;
    let sigma = model_covariance(&a, &model)?;
    let chol = sigma.clone().cholesky().expect("model covariance is SPD");
    let mut rng = derive_rng(7, "showdown", 0);
    let mut data = DMatrix::zeros(n, 2);
    for r in 0..n {
        let z = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let y = chol.l() * z;
        data[(r, 0)] = y[0];
        data[(r, 1)] = y[1];
    }
    let samples = SampleBlock::new(data, SeedProvenance::new(7, "showdown", 0))?;

    let opts = EstimatorOptions::default();
    let moment = estimate_moment(&a, &samples, None)?;
    let init = moment.theta();
    let plug = plugin_optimal_projections(&a, &samples)?;
    let one_d = estimate_1d(&a, &samples, &plug.set, &init, &opts)?;
    let two_d = estimate_2d(&a, &samples, &init, &opts)?;
    let mle = estimate_mle(&a, &samples, &init, &opts)?;

    println!("true variances: {theta:?}   (n = {n})");
    println!("{:>10} {:>10} {:>10} {:>10} {:>6} {:>6}", "estimator", "theta_1", "theta_2", "theta_3", "iters", "conv");
    for (name, rep) in [
        ("moment", &moment),
        ("one_d", &one_d),
        ("two_d", &two_d),
        ("mle", &mle),
    ] {
        println!(
            "{name:>10} {:>10.4} {:>10.4} {:>10.4} {:>6} {:>6}",
            rep.theta_hat[0], rep.theta_hat[1], rep.theta_hat[2], rep.iterations, rep.converged
        );
    }
    println!("\nreport for the 1D estimator as JSON:\n{}", one_d.to_json()?);
    Ok(())
}
