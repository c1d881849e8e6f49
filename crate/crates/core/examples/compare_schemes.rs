//! Compares the five schemes on the built-in scene across computation
//! intensities, using the oracle as the estimator.

use coopsense::accuracy::OracleParams;
use coopsense::bench::{compare_schemes, dominance_chain, BenchConfig, Scheme};
use coopsense::context::TaskContext;
use coopsense::experiment::make_default_scenario;
use coopsense::netmodel::SystemParams;
use coopsense::scene::LidarConfig;

fn main() -> coopsense::Result<()> {
    let oracle = OracleParams::default();
    let base = TaskContext::from_scenario(
        &make_default_scenario(0),
        &LidarConfig::default(),
        SystemParams::default(),
        &oracle,
        oracle.k_oracle,
        &oracle,
    )?;
    for eps in [10000.0, 20000.0, 30000.0, 40000.0] {
        let ctx = base.with_params(SystemParams { epsilon: eps, ..base.params })?;
        let results = compare_schemes(&ctx, &Scheme::ALL, &BenchConfig::default())?;
        println!("epsilon {eps}: chain {:?}", dominance_chain(&results));
        for r in &results {
            let below = r.accuracy_est.iter().filter(|&&a| a < ctx.params.accuracy_req).count();
            match r.cost() {
                Some(c) => println!("  {:<12} cost {c:.6}  below A: {below}", r.scheme.name()),
                None => println!("  {:<12} infeasible", r.scheme.name()),
            }
        }
    }
    Ok(())
}
