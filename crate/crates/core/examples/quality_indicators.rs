//! Builds voxel-count indicators for one object from two vehicles, fuses
//! them, and shows how the oracle accuracy responds to the point count.

use coopsense::accuracy::{oracle_accuracy, OracleParams};
use coopsense::experiment::make_default_scenario;
use coopsense::quality::{compute_indicator, fuse_indicators, PartitionResolution};
use coopsense::scene::{partition_by_objects, simulate_lidar, LidarConfig, PointCloud};

fn main() -> coopsense::Result<()> {
    let scene = make_default_scenario(0);
    let object = 5;
    let bbox = scene.objects[object].bbox;
    let k = PartitionResolution::new(2)?;
    let oracle = OracleParams::default();

    let views: Vec<PointCloud> = [0, 3]
        .iter()
        .map(|&n| partition_by_objects(&simulate_lidar(&scene, n, &LidarConfig::default()), &scene.objects)
            .swap_remove(object))
        .collect();
    let indicators = views
        .iter()
        .map(|v| compute_indicator(v, &bbox, k))
        .collect::<coopsense::Result<Vec<_>>>()?;
    for (n, (v, z)) in [0, 3].iter().zip(views.iter().zip(&indicators)) {
        println!("cav {n}: counts {:?}, oracle accuracy {:.3}", z.counts(), oracle_accuracy(v, &bbox, &oracle)?);
    }

    let fused = fuse_indicators(&[true, true], &indicators)?;
    let mut union = views[0].clone();
    union.points.extend(&views[1].points);
    println!("fused: counts {:?}, oracle accuracy {:.3}", fused.counts(), oracle_accuracy(&union, &bbox, &oracle)?);

    // small objects saturate quickly; the curve is in the first few points
    for n in [1, 2, 4, 8, 16] {
        let part = PointCloud::new(union.points.iter().copied().take(n).collect());
        println!("first {n:>2} points: oracle accuracy {:.3}", oracle_accuracy(&part, &bbox, &oracle)?);
    }
    Ok(())
}
