//! The correlation-optimal projection design reaches the Fisher bound.
//!
//! Builds the 7x16 router matrix, draws variances, and shows that the
//! asymptotic covariance of the 1D estimator under the optimal design
//! matches the inverse Fisher information, while the pairwise-2D estimator
//! does not.
//!
//! Run with: cargo run --example optimal_design

use rand::RngExt;
use tomo1d::gaussian::{
    asymptotic_cov_1d, asymptotic_cov_2d, fisher_information, model_covariance,
    optimal_projections, GaussianModel,
};
use tomo1d::linalg::{rel_frobenius, SpdFactor};
use tomo1d::seed::derive_rng;
use tomo1d::topology::build_router_routing;

fn main() -> tomo1d::Result<()> {
    let a = build_router_routing(4, 4, true)?;
    println!(
        "router routing matrix: {} measurements x {} OD pairs",
        a.n_measurements(),
        a.n_components()
    );

    let mut rng = derive_rng(20070213, "theta", 0);
    let theta =
        nalgebra::DVector::from_fn(a.n_components(), |_, _| -(1.0 - rng.random::<f64>()).ln());
    let model = GaussianModel::new(theta)?;

    let sigma = model_covariance(&a, &model)?;
    let projections = optimal_projections(&a, &sigma)?;
    for k in 0..projections.len() {
        let beta = projections.beta(k);
        let var = beta.dot(&(&sigma * &beta));
        assert!((var - 1.0).abs() < 1e-12, "normalization failed for row {k}");
    }
    println!("all {} optimal projections have unit model variance", projections.len());

    let info = fisher_information(&a, &model)?;
    let bound = SpdFactor::new(&info, "fisher")?.inverse();
    let one_d = asymptotic_cov_1d(&a, &model, &projections)?;
    let two_d = asymptotic_cov_2d(&a, &model)?;

    println!(
        "relative gap between optimal-1D covariance and the Fisher bound: {:.3e}",
        rel_frobenius(one_d.matrix(), &bound)
    );

    println!("\nper-parameter limit standard deviations:");
    println!("{:>5} {:>12} {:>12} {:>12}", "param", "theta", "optimal_1d", "two_d");
    let s1 = one_d.limit_stds();
    let s2 = two_d.limit_stds();
    for i in 0..model.dim() {
        println!(
            "{:>5} {:>12.6} {:>12.6} {:>12.6}",
            i + 1,
            model.theta()[i],
            s1[i],
            s2[i]
        );
    }
    let worse = (0..model.dim()).filter(|&i| s2[i] > s1[i] * (1.0 + 1e-9)).count();
    println!("\npairwise-2D is strictly wider on {worse} of {} parameters", model.dim());
    Ok(())
}
