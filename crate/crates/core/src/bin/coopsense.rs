use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use coopsense::bench::Scheme;
use coopsense::experiment::{run_experiment, ExperimentConfig};
use coopsense::quality::PartitionResolution;

/// Run a cooperative sensing experiment and write CSV results.
#[derive(Debug, Parser)]
#[command(name = "coopsense", version)]
struct Cli {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// JSON scenario file (default: the built-in scene).
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated scheme names. A lone `all` runs every scheme; inside
    /// a list, `all` is the all-data baseline.
    #[arg(long, value_delimiter = ',')]
    scheme: Option<Vec<String>>,
    /// Comma-separated computation intensities, cycles per point.
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    /// Comma-separated accuracy requirements.
    #[arg(long = "accuracy-req", value_delimiter = ',')]
    accuracy_req: Option<Vec<f64>>,
    /// Partition resolution, 1 to 4.
    #[arg(long = "K")]
    k: Option<u8>,
    /// Train a new model even if --model exists.
    #[arg(long)]
    train: bool,
    /// Model file (.bin or .json) to load.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn config(cli: Cli) -> coopsense::Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.scenario {
        cfg.scenario = Some(s);
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(names) = cli.scheme {
        cfg.schemes = if names == ["all"] {
            Scheme::ALL.to_vec()
        } else {
            names.iter().map(|n| n.parse()).collect::<coopsense::Result<_>>()?
        };
    }
    if let Some(eps) = cli.epsilon {
        cfg.epsilon = eps;
    }
    if let Some(a) = cli.accuracy_req {
        cfg.accuracy_req = a;
    }
    if let Some(k) = cli.k {
        cfg.k = PartitionResolution::new(k)?;
    }
    cfg.train |= cli.train;
    if let Some(m) = cli.model {
        cfg.model = Some(m);
    }
    if let Some(o) = cli.out {
        cfg.out_dir = o;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match config(cli).and_then(|cfg| run_experiment(&cfg)) {
        Ok(report) => {
            println!(
                "{} rows written to {}",
                report.rows.len(),
                report.results_path.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
