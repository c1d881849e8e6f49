//! Scans the built-in road scene from every vehicle and reports how many
//! points land on each object.

use coopsense::experiment::make_default_scenario;
use coopsense::scene::{partition_by_objects, simulate_lidar, LidarConfig};

fn main() {
    let scene = make_default_scenario(0);
    let lidar = LidarConfig::default();
    print!("{:<8}", "");
    for o in &scene.objects {
        print!("{:>12}", format!("{}#{}", o.class.name(), o.id));
    }
    println!("{:>10}", "ground");
    for n in 0..scene.n_cavs() {
        let cloud = simulate_lidar(&scene, n, &lidar);
        let parts = partition_by_objects(&cloud, &scene.objects);
        let on_objects: usize = parts.iter().map(|p| p.len()).sum();
        print!("{:<8}", format!("cav {n}"));
        for p in &parts {
            print!("{:>12}", p.len());
        }
        println!("{:>10}", cloud.len() - on_objects);
    }
}
