//! Runs the genetic search on the built-in scene with the oracle as the
//! accuracy estimator and prints the elite cost per generation.

use coopsense::accuracy::OracleParams;
use coopsense::context::TaskContext;
use coopsense::experiment::make_default_scenario;
use coopsense::ga::{self, GaConfig};
use coopsense::netmodel::SystemParams;
use coopsense::scene::LidarConfig;

fn main() -> coopsense::Result<()> {
    let oracle = OracleParams::default();
    let ctx = TaskContext::from_scenario(
        &make_default_scenario(0),
        &LidarConfig::default(),
        SystemParams::default(),
        &oracle,
        oracle.k_oracle,
        &oracle,
    )?;
    let out = ga::run(&ctx, &GaConfig::default())?;
    for (gen, cost) in out.history.iter().enumerate().step_by(5) {
        println!("generation {gen:>2}: elite cost {cost:.6}");
    }
    for (m, g) in out.best.genes.iter().enumerate() {
        println!("object {m}: vehicles {:04b} -> node {}", g.mask, g.node);
    }
    println!(
        "cost {:.6}, bandwidth {:.4}, compute {:.6}",
        out.allocation.cost, out.allocation.bandwidth_fraction, out.allocation.compute_fraction
    );
    Ok(())
}
