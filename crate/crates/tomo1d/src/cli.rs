//! Config-driven experiment commands behind the `tomo1d` binary.
//!
//! Each command reads a flat `key = value` config (or matrix files), runs an
//! experiment, writes plot-ready CSV/JSON outputs into the output directory,
//! and drops a `run_manifest.json` describing exactly what happened. Numbers
//! are printed with 17 significant digits, so reruns with the same config
//! and seed reproduce outputs byte for byte.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::config::ConfigReader;
use crate::error::{Result, TomoError};
use crate::identifiability::{check_identifiability, ProjectionSet};
use crate::io::{fmt_f64, read_matrix_csv, CsvTable};
use crate::seed::derive_rng;
use crate::simulate::{
    run_asymptotic_study, run_delay_experiment, run_traffic_experiment, DelayExperimentConfig,
    DelayMode, OdMeans, TrafficEstimator, TrafficExperimentConfig,
};
use crate::topology::{build_tree_routing, RoutingMatrix, Tree};

/// Flags shared by every command.
#[derive(Debug, Clone)]
pub struct CommonOpts {
    pub out_dir: PathBuf,
    pub seed_override: Option<u64>,
    pub threads: Option<usize>,
}

impl Default for CommonOpts {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("."),
            seed_override: None,
            threads: None,
        }
    }
}

/// What a command did: inputs, effective seed, outputs, failure tallies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub version: String,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<String>,
    pub failures: BTreeMap<String, usize>,
}

struct ManifestBuilder {
    command: String,
    config: BTreeMap<String, String>,
    seed: u64,
    started_at: String,
    outputs: Vec<PathBuf>,
    failures: BTreeMap<String, usize>,
}

impl ManifestBuilder {
    fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            config: BTreeMap::new(),
            seed: 0,
            started_at: chrono::Utc::now().to_rfc3339(),
            outputs: Vec::new(),
            failures: BTreeMap::new(),
        }
    }

    fn write_output(&mut self, out_dir: &Path, name: &str, contents: &str) -> Result<()> {
        std::fs::create_dir_all(out_dir)?;
        let path = out_dir.join(name);
        std::fs::write(&path, contents)?;
        self.outputs.push(path);
        Ok(())
    }

    fn finish(self, out_dir: &Path) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: self.command,
            config: self.config,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: self.started_at,
            finished_at: chrono::Utc::now().to_rfc3339(),
            outputs: self
                .outputs
                .iter()
                .map(|p| p.to_string_lossy().into_owned())
                .collect(),
            failures: self.failures,
        };
        std::fs::create_dir_all(out_dir)?;
        std::fs::write(
            out_dir.join("run_manifest.json"),
            serde_json::to_string_pretty(&manifest)?,
        )?;
        Ok(manifest)
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| TomoError::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Rank-test a projection set against a routing matrix, both given as CSV
/// files, and write the JSON report.
pub fn cmd_identifiability(
    matrix_file: &Path,
    projections_file: &Path,
    max_order: usize,
    tol: f64,
    opts: &CommonOpts,
) -> Result<RunManifest> {
    let mut mb = ManifestBuilder::new("identifiability");
    mb.config
        .insert("matrix".into(), matrix_file.to_string_lossy().into_owned());
    mb.config.insert(
        "projections".into(),
        projections_file.to_string_lossy().into_owned(),
    );
    mb.config.insert("max_order".into(), max_order.to_string());
    mb.config.insert("tol".into(), tol.to_string());

    let a = RoutingMatrix::new(read_matrix_csv(matrix_file)?)?;
    // Degenerate sets (duplicate rows) are exactly what one wants diagnosed,
    // so skip the strict constructor.
    let projections = ProjectionSet::allowing_scale_duplicates(read_matrix_csv(projections_file)?)?;
    let report = check_identifiability(&projections, &a, max_order, tol)?;
    if !report.identifiable_all {
        mb.failures.insert("orders_failing_rank_test".into(), {
            report
                .rank_by_order
                .iter()
                .filter(|&&(_, r)| r < a.n_components())
                .count()
        });
    }
    mb.write_output(&opts.out_dir, "identifiability.json", &report.to_json()?)?;
    mb.finish(&opts.out_dir)
}

/// Limit standard deviations of the competing designs on a seeded router
/// instance (variances drawn i.i.d. exponential and frozen by the seed).
pub fn cmd_asymptotic(config_file: &Path, opts: &CommonOpts) -> Result<RunManifest> {
    let mut reader = ConfigReader::from_file(config_file)?;
    let seed_cfg: u64 = reader.parse_or("seed", 0)?;
    let n_in: usize = reader.parse_or("n_in", 4)?;
    let n_out: usize = reader.parse_or("n_out", 4)?;
    let theta_exp_mean: f64 = reader.parse_or("theta_exp_mean", 1.0)?;
    let k_list: Vec<usize> = reader.list_or("k_list", "32,160")?;
    let n_replicates: usize = reader.parse_or("n_replicates", 100)?;
    let echo = reader.finish()?;

    let seed = opts.seed_override.unwrap_or(seed_cfg);
    let a = crate::topology::build_router_routing(n_in, n_out, true)?;
    let mut rng = derive_rng(seed, "theta", 0);
    use rand::RngExt;
    let theta = DVector::from_fn(a.n_components(), |_, _| {
        -theta_exp_mean * (1.0 - rng.random::<f64>()).ln()
    });

    let table = with_threads(opts.threads, || {
        run_asymptotic_study(&a, &theta, &k_list, n_replicates, seed)
    })??;

    let mut header = vec!["param".to_string(), "theta".into(), "optimal_1d".into(), "two_d".into()];
    for &k in &k_list {
        header.push(format!("rand_k{k}"));
    }
    let mut csv = CsvTable::new(header);
    for i in 0..table.theta.len() {
        let mut row = vec![
            (i + 1).to_string(),
            fmt_f64(table.theta[i]),
            fmt_f64(table.optimal_1d[i]),
            fmt_f64(table.two_d[i]),
        ];
        for (_, med) in &table.random_medians {
            row.push(fmt_f64(med[i]));
        }
        csv.push_row(row);
    }

    let mut mb = ManifestBuilder::new("asymptotic");
    mb.config = echo;
    mb.seed = seed;
    for (k, failed) in &table.failures {
        if *failed > 0 {
            mb.failures.insert(format!("rand_k{k}"), *failed);
        }
    }
    mb.write_output(&opts.out_dir, "asymptotic_stds.csv", &csv.render())?;
    mb.finish(&opts.out_dir)
}

fn traffic_config_from(reader: &mut ConfigReader, seed: u64) -> Result<TrafficExperimentConfig> {
    let n_in = reader.parse_or("n_in", 4)?;
    let n_out = reader.parse_or("n_out", 4)?;
    let od_means = match reader.opt_list::<f64>("od_means")? {
        Some(v) if !v.is_empty() => OdMeans::Explicit(v),
        _ => OdMeans::LogUniform {
            low: reader.parse_or("mean_low", 1.0)?,
            high: reader.parse_or("mean_high", 100.0)?,
        },
    };
    let relation = crate::estimators::MeanVarianceRelation::new(
        reader.parse_or("phi", 1.0)?,
        reader.parse_or("c", 2.0)?,
    )?;
    let estimators = reader
        .list_or::<String>("estimators", "moment,two_d,one_d_opt,mle")?
        .iter()
        .map(|s| TrafficEstimator::parse(s))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrafficExperimentConfig {
        n_in,
        n_out,
        od_means,
        relation,
        n_samples: reader.parse_or("n_samples", 1000)?,
        n_runs: reader.parse_or("n_runs", 100)?,
        seed,
        estimators,
    })
}

/// Median log-absolute errors of the estimated mean OD rates (one column
/// per estimator).
pub fn cmd_traffic(config_file: &Path, opts: &CommonOpts) -> Result<RunManifest> {
    let mut reader = ConfigReader::from_file(config_file)?;
    let seed_cfg: u64 = reader.parse_or("seed", 0)?;
    let seed = opts.seed_override.unwrap_or(seed_cfg);
    let config = traffic_config_from(&mut reader, seed)?;
    let echo = reader.finish()?;

    let result = with_threads(opts.threads, || run_traffic_experiment(&config))??;

    let mut header = vec!["param".to_string(), "mean_truth".into()];
    header.extend(config.estimators.iter().map(|e| e.name().to_string()));
    let mut csv = CsvTable::new(header);
    for i in 0..result.mean_truth.len() {
        let mut row = vec![(i + 1).to_string(), fmt_f64(result.mean_truth[i])];
        for est in &config.estimators {
            row.push(fmt_f64(result.medians[est.name()][i]));
        }
        csv.push_row(row);
    }

    let mut mb = ManifestBuilder::new("traffic");
    mb.config = echo;
    mb.seed = seed;
    for (name, count) in &result.failures {
        if *count > 0 {
            mb.failures.insert(name.clone(), *count);
        }
    }
    mb.write_output(&opts.out_dir, "traffic_median_log_errors.csv", &csv.render())?;
    mb.finish(&opts.out_dir)
}

fn routing_from_tree_key(tree: &str) -> Result<RoutingMatrix> {
    match tree {
        "four_leaf" => Ok(RoutingMatrix::four_leaf()),
        "two_leaf" => Ok(RoutingMatrix::two_leaf()),
        path => build_tree_routing(&Tree::from_adjacency_file(Path::new(path))?, None),
    }
}

fn delay_config_from(
    reader: &mut ConfigReader,
    seed: u64,
    emit_cdf: bool,
) -> Result<DelayExperimentConfig> {
    let routing = routing_from_tree_key(&reader.str_or("tree", "four_leaf"))?;
    let modes = reader
        .list_or::<String>("modes", "two_d,one_d_cor,one_d_rand")?
        .iter()
        .map(|s| DelayMode::parse(s))
        .collect::<Result<Vec<_>>>()?;
    let weight = crate::cf_gmm::CfWeightSpec::new(
        reader.parse_or("weight_std", 5.0)?,
        reader.parse_or("n_nodes", 64)?,
        seed,
    )?;
    let mut config = DelayExperimentConfig::new(routing, seed);
    config.u_range = (reader.parse_or("u_low", 0.3)?, reader.parse_or("u_high", 0.7)?);
    config.v_mean = reader.parse_or("v_mean", 3.0)?;
    config.n_samples = reader.parse_or("n_samples", 1000)?;
    config.n_runs = reader.parse_or("n_runs", 100)?;
    config.n_bins = reader.parse_or("n_bins", 10)?;
    config.weight = weight;
    config.modes = modes;
    config.redraw_uv_each_run = reader.parse_or("redraw_uv", false)?;
    config.emit_cdf_run = if emit_cdf {
        Some(reader.parse_or("cdf_run", 0)?)
    } else {
        let _ = reader.opt_str("cdf_run");
        None
    };
    Ok(config)
}

/// Median normalized Mallows distances per link per projection mode, plus
/// optional CDF curve exports for one run.
pub fn cmd_delay(config_file: &Path, emit_cdf: bool, opts: &CommonOpts) -> Result<RunManifest> {
    let mut reader = ConfigReader::from_file(config_file)?;
    let seed_cfg: u64 = reader.parse_or("seed", 0)?;
    let seed = opts.seed_override.unwrap_or(seed_cfg);
    let config = delay_config_from(&mut reader, seed, emit_cdf)?;
    let echo = reader.finish()?;

    let result = with_threads(opts.threads, || run_delay_experiment(&config))??;

    let mut header = vec!["link".to_string(), "u".into(), "v".into()];
    header.extend(config.modes.iter().map(|m| m.name().to_string()));
    let mut csv = CsvTable::new(header);
    for i in 0..config.routing.n_components() {
        let (u, v) = result
            .link_uv
            .as_ref()
            .map(|uv| uv[i])
            .unwrap_or((f64::NAN, f64::NAN));
        let mut row = vec![(i + 1).to_string(), fmt_f64(u), fmt_f64(v)];
        for mode in &config.modes {
            row.push(fmt_f64(result.medians[mode.name()][i]));
        }
        csv.push_row(row);
    }

    let mut mb = ManifestBuilder::new("delay");
    mb.config = echo;
    mb.seed = seed;
    for (name, count) in &result.failures {
        if *count > 0 {
            mb.failures.insert(name.clone(), *count);
        }
    }
    mb.write_output(&opts.out_dir, "delay_median_mallows.csv", &csv.render())?;
    if let Some(curve_sets) = &result.cdf_curves {
        for set in curve_sets {
            mb.write_output(
                &opts.out_dir,
                &format!("cdf_link{}_true.csv", set.link + 1),
                &set.truth.to_csv(),
            )?;
            for (mode, curve) in &set.fitted {
                mb.write_output(
                    &opts.out_dir,
                    &format!("cdf_link{}_{}.csv", set.link + 1, mode),
                    &curve.to_csv(),
                )?;
            }
        }
    }
    mb.finish(&opts.out_dir)
}
