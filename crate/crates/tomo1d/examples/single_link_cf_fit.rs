//! Fit a mixture to one directly observed queueing-delay source.
//!
//! The simplest end of the CF machinery: one link, identity routing, one
//! projection. Shows the fitted weights, the objective trace (non-increasing
//! by construction), and the distance to the true law.
//!
//! Run with: cargo run --release --example single_link_cf_fit

use nalgebra::DMatrix;
use tomo1d::cf_gmm::{fit_cf_gmm, BinSpec, CfGmmOptions, CfWeightSpec};
use tomo1d::estimators::SampleBlock;
use tomo1d::identifiability::ProjectionSet;
use tomo1d::metrics::{normalized_mallows, CdfCurve};
use tomo1d::seed::{derive_rng, SeedProvenance};
use tomo1d::simulate::sample_mm1_delay;
use tomo1d::topology::RoutingMatrix;

fn main() -> tomo1d::Result<()> {
    let (u, v) = (0.55, 2.0);
    let n = 50_000;
    let mut rng = derive_rng(2024, "single_link", 0);
    let delays = sample_mm1_delay(u, v, n, &mut rng)?;
    println!(
        "sampled {n} delays: utilization {u}, mean scale {v}, observed zero fraction {:.4}",
        delays.iter().filter(|&&x| x == 0.0).count() as f64 / n as f64
    );

    let a = RoutingMatrix::new(DMatrix::from_row_slice(1, 1, &[1.0]))?;
    let samples = SampleBlock::new(
        DMatrix::from_fn(n, 1, |r, _| delays[r]),
        SeedProvenance::new(2024, "single_link", 0),
    )?;
    let projections = ProjectionSet::new(DMatrix::from_row_slice(1, 1, &[1.0]))?;
    let spec = BinSpec::from_positive_quantiles(|p| -v * (1.0 - p).ln(), 10, 1.0 / v)?;
    let weight = CfWeightSpec { std: 5.0, n_nodes: 64, seed: 2024 };

    let fit = fit_cf_gmm(
        &a,
        &samples,
        &projections,
        &[spec],
        &weight,
        &CfGmmOptions::default(),
    )?;
    let model = &fit.models[0];

    println!(
        "fit converged = {} after {} sweeps; objective {:.3e} (from {:.3e})",
        fit.converged,
        fit.sweeps,
        fit.objective,
        fit.objective_trace[0]
    );
    println!("atom at zero: fitted {:.4} vs true {:.4}", model.atom_at_zero, 1.0 - u);
    println!("bin weights: {:?}", model.bin_weights.iter().map(|w| (w * 1e4).round() / 1e4).collect::<Vec<_>>());
    println!("tail weight: {:.4}", model.tail_weight);

    let truth = CdfCurve::mm1(u, v)?;
    let fitted = CdfCurve::from_mixture(model)?;
    println!(
        "normalized Mallows distance to the true law: {:.4}",
        normalized_mallows(&truth, &fitted, 20_000)?
    );
    Ok(())
}
