use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tomo1d::cli::{cmd_asymptotic, cmd_delay, cmd_identifiability, cmd_traffic, CommonOpts};
use tomo1d::TomoError;

/// Network tomography from 1-D linear projections.
#[derive(Parser)]
#[command(name = "tomo1d", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Directory for CSV/JSON outputs and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// Override the config file's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for replicate runs (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Rank-test whether a projection set identifies the latent distribution.
    Identifiability {
        /// Routing matrix as CSV of 0/1 entries.
        #[arg(long)]
        matrix: PathBuf,
        /// Projection directions as CSV, one row per projection.
        #[arg(long)]
        projections: PathBuf,
        /// Highest power order to scan.
        #[arg(long, default_value_t = tomo1d::identifiability::DEFAULT_MAX_ORDER)]
        max_order: usize,
        /// Relative singular-value tolerance for the rank decision.
        #[arg(long, default_value_t = tomo1d::identifiability::DEFAULT_RANK_TOLERANCE)]
        tol: f64,
    },
    /// Limit standard deviations of the competing projection designs.
    Asymptotic {
        #[arg(long)]
        config: PathBuf,
    },
    /// Traffic-demand experiment: median log errors of mean OD rates.
    Traffic {
        #[arg(long)]
        config: PathBuf,
    },
    /// Delay tomography experiment: median normalized Mallows distances.
    Delay {
        #[arg(long)]
        config: PathBuf,
        /// Also export per-link CDF curves for one run.
        #[arg(long)]
        emit_cdf: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let opts = CommonOpts {
        out_dir: cli.out_dir,
        seed_override: cli.seed,
        threads: cli.threads,
    };
    let result = match &cli.command {
        Command::Identifiability {
            matrix,
            projections,
            max_order,
            tol,
        } => cmd_identifiability(matrix, projections, *max_order, *tol, &opts),
        Command::Asymptotic { config } => cmd_asymptotic(config, &opts),
        Command::Traffic { config } => cmd_traffic(config, &opts),
        Command::Delay { config, emit_cdf } => cmd_delay(config, *emit_cdf, &opts),
    };
    match result {
        Ok(manifest) => {
            for output in &manifest.outputs {
                println!("{output}");
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                TomoError::Io(e) if e.kind() == std::io::ErrorKind::NotFound => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
