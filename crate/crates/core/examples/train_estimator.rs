//! Generates oracle-labelled point sets, trains the accuracy estimator and
//! saves it in both formats.
//!
//! Usage: `cargo run --release --example train_estimator -- [samples] [K]`

use coopsense::accuracy::dataset::split;
use coopsense::accuracy::{eval_metrics, generate_instances, train_mlp_with_history, OracleParams, TrainConfig};
use coopsense::quality::PartitionResolution;
use coopsense::scene::LidarConfig;

fn main() -> coopsense::Result<()> {
    let mut args = std::env::args().skip(1);
    let samples: usize = args.next().map_or(1600, |s| s.parse().expect("sample count"));
    let k = PartitionResolution::new(args.next().map_or(3, |s| s.parse().expect("K")))?;

    let instances = generate_instances(1, samples, &OracleParams::default(), &LidarConfig::default())?;
    let data: Vec<_> = instances.iter().map(|i| i.sample(k)).collect();
    let (train, held) = split(&data, 0.8, 1);
    let (model, history) = train_mlp_with_history(&train, &TrainConfig::default())?;
    for (epoch, mse) in history.iter().enumerate().step_by(25) {
        println!("epoch {epoch:>3}  training mse {mse:.5}");
    }
    let m = eval_metrics(&model, &held)?;
    println!("held-out mse {:.5}  mae {:.5}  vae {:.5}", m.mse, m.mae, m.vae);

    let dir = std::env::temp_dir();
    model.save_bin(&dir.join("estimator.bin"))?;
    model.save_json(&dir.join("estimator.json"))?;
    println!("saved {}", dir.join("estimator.{bin,json}").display());
    Ok(())
}
