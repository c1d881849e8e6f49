//! Runs a config-driven sweep and prints the summary. Pass a config path, or
//! nothing for the defaults (which train a model first).

use coopsense::experiment::{run_experiment, ExperimentConfig};

fn main() -> coopsense::Result<()> {
    let mut cfg = match std::env::args().nth(1) {
        Some(path) => ExperimentConfig::load(path.as_ref())?,
        None => ExperimentConfig::default(),
    };
    if std::env::args().nth(1).is_none() {
        cfg.out_dir = std::env::temp_dir().join("coopsense-sweep");
    }
    let report = run_experiment(&cfg)?;
    print!("{}", std::fs::read_to_string(cfg.out_dir.join("summary.txt")).unwrap_or_default());
    println!("{} rows in {}", report.rows.len(), report.results_path.display());
    Ok(())
}
