//! Labelled training data from random road scenes.
//!
//! Each scene places a random number of vehicles and objects on a straight
//! multi-lane road, scans it from every vehicle, and cuts per-object point
//! sets. Samples fuse a random non-empty subset of the vehicles' views of one
//! object, thin the result with a random keep ratio, and label it with the
//! oracle.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::mlp::TrainingSample;
use super::oracle::{oracle_accuracy, OracleParams};
use crate::error::{Error, Result};
use crate::quality::{compute_indicator, PartitionResolution, QualityIndicator};
use crate::scene::{
    partition_by_objects, simulate_lidar, BoundingBox, CavSpec, LidarConfig, ObjectClass,
    ObjectSpec, Point3, PointCloud, Scenario,
};

pub const SAMPLES_PER_SCENE: usize = 8;

const LANES: [f64; 3] = [-3.5, 0.0, 3.5];
const SHOULDERS: [f64; 2] = [-6.5, 6.5];
const ROAD_LENGTH: f64 = 60.0;

/// Model input: the indicator counts followed by the box edge lengths.
pub fn features(indicator: &QualityIndicator, bbox: &BoundingBox) -> Vec<f64> {
    indicator
        .counts()
        .iter()
        .map(|&c| c as f64)
        .chain(bbox.lengths())
        .collect()
}

pub fn feature_len(k: PartitionResolution) -> usize {
    k.cells() + 3
}

/// One labelled point set before featurization.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledInstance {
    pub class: ObjectClass,
    pub bbox: BoundingBox,
    pub points: PointCloud,
    pub label: f64,
}

impl LabelledInstance {
    pub fn sample(&self, k: PartitionResolution) -> TrainingSample {
        let z = compute_indicator(&self.points, &self.bbox, k)
            .expect("instance points are extracted by box containment");
        TrainingSample {
            features: features(&z, &self.bbox),
            label: self.label,
        }
    }
}

pub fn generate_training_set(
    seed: u64,
    count: usize,
    k: PartitionResolution,
    oracle: &OracleParams,
) -> Result<Vec<TrainingSample>> {
    Ok(generate_instances(seed, count, oracle, &LidarConfig::default())?
        .iter()
        .map(|inst| inst.sample(k))
        .collect())
}

/// Raw labelled instances. The random stream does not depend on any
/// partition resolution, so one seed yields the same point sets for every K.
pub fn generate_instances(
    seed: u64,
    count: usize,
    oracle: &OracleParams,
    lidar: &LidarConfig,
) -> Result<Vec<LabelledInstance>> {
    if count == 0 {
        return Err(Error::param("count", "must be at least 1"));
    }
    oracle.validate()?;
    lidar.validate()?;
    let scenes = count.div_ceil(SAMPLES_PER_SCENE);
    let per_scene: Vec<Vec<LabelledInstance>> = (0..scenes)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            scene_instances(&mut rng, oracle, lidar)
        })
        .collect::<Result<_>>()?;
    let mut out: Vec<LabelledInstance> = per_scene.into_iter().flatten().collect();
    out.truncate(count);
    Ok(out)
}

fn scene_instances(
    rng: &mut ChaCha8Rng,
    oracle: &OracleParams,
    lidar: &LidarConfig,
) -> Result<Vec<LabelledInstance>> {
    let scene = random_scene(rng);
    let views: Vec<Vec<PointCloud>> = (0..scene.n_cavs())
        .map(|n| partition_by_objects(&simulate_lidar(&scene, n, lidar), &scene.objects))
        .collect();
    let n = scene.n_cavs();
    let mut out = Vec::with_capacity(SAMPLES_PER_SCENE);
    for _ in 0..SAMPLES_PER_SCENE {
        let m = rng.gen_range(0..scene.n_objects());
        let mask = rng.gen_range(1..(1u32 << n));
        // keep ratio log-uniform in [0.01, 1]
        let keep = 10f64.powf(rng.gen_range(-2.0..=0.0));
        let mut points = Vec::new();
        for (cav, view) in views.iter().enumerate() {
            if mask & (1 << cav) != 0 {
                points.extend(view[m].points.iter().copied().filter(|_| rng.gen::<f64>() < keep));
            }
        }
        let points = PointCloud::new(points);
        let obj = &scene.objects[m];
        let label = oracle_accuracy(&points, &obj.bbox, oracle)?;
        out.push(LabelledInstance {
            class: obj.class,
            bbox: obj.bbox,
            points,
            label,
        });
    }
    Ok(out)
}

/// Nominal edge lengths of a class with +-10% jitter (pedestrians +-5%).
pub fn class_dimensions(class: ObjectClass, rng: &mut impl Rng) -> [f64; 3] {
    let (base, jitter) = match class {
        ObjectClass::Car => ([4.5, 1.8, 1.5], 0.1),
        ObjectClass::Truck => ([9.0, 2.5, 3.5], 0.1),
        ObjectClass::Pedestrian => ([0.6, 0.6, 1.75], 0.05),
        ObjectClass::Cyclist => ([1.8, 0.6, 1.7], 0.05),
    };
    base.map(|b| b * (1.0 + rng.gen_range(-jitter..=jitter)))
}

fn footprint_clear(placed: &[BoundingBox], candidate: &BoundingBox, margin: f64) -> bool {
    placed.iter().all(|b| {
        let c = candidate.center();
        let o = b.center();
        (c.x - o.x).abs() > (candidate.lengths()[0] + b.lengths()[0]) / 2.0 + margin
            || (c.y - o.y).abs() > (candidate.lengths()[1] + b.lengths()[1]) / 2.0 + margin
    })
}

/// A random straight-road scene with 2..=5 vehicles and 2..=6 objects.
pub fn random_scene(rng: &mut impl Rng) -> Scenario {
    loop {
        if let Some(s) = try_random_scene(rng) {
            return s;
        }
    }
}

fn try_random_scene(rng: &mut impl Rng) -> Option<Scenario> {
    let n_cavs = rng.gen_range(2..=5);
    let n_objects = rng.gen_range(2..=6);
    let mut placed: Vec<BoundingBox> = Vec::new();
    let mut cavs = Vec::new();
    for id in 0..n_cavs {
        let body = (0..100).find_map(|_| {
            let lane = *LANES.choose(rng).unwrap();
            let x = rng.gen_range(3.0..ROAD_LENGTH - 3.0);
            let b = BoundingBox::new(Point3::new(x, lane, 0.75), [4.5, 1.8, 1.5]).ok()?;
            footprint_clear(&placed, &b, 0.5).then_some(b)
        })?;
        placed.push(body);
        let c = body.center();
        cavs.push(CavSpec {
            id,
            sensor_origin: Point3::new(c.x, c.y, 1.9),
            body,
        });
    }
    let mut objects = Vec::new();
    for id in 0..n_objects {
        let class = ObjectClass::ALL[rng.gen_range(0..4)];
        let dims = class_dimensions(class, rng);
        let bbox = (0..100).find_map(|_| {
            let y = match class {
                ObjectClass::Pedestrian | ObjectClass::Cyclist if rng.gen_bool(0.6) => {
                    *SHOULDERS.choose(rng).unwrap()
                }
                _ => *LANES.choose(rng).unwrap(),
            };
            let x = rng.gen_range(dims[0] / 2.0..ROAD_LENGTH - dims[0] / 2.0);
            let b = BoundingBox::new(Point3::new(x, y, dims[2] / 2.0), dims).ok()?;
            footprint_clear(&placed, &b, 0.5).then_some(b)
        })?;
        placed.push(bbox);
        objects.push(ObjectSpec { id, class, bbox });
    }
    Some(Scenario {
        cavs,
        objects,
        rsu_position: Point3::new(ROAD_LENGTH / 2.0, 12.0, 6.0),
        roi: BoundingBox::new(
            Point3::new(ROAD_LENGTH / 2.0, 0.0, 3.0),
            [ROAD_LENGTH, 16.0, 6.0],
        )
        .ok()?,
        ground_z: 0.0,
    })
}

/// Deterministic train / held-out split: the first `train_fraction` of a
/// seeded permutation is the training set.
pub fn split<T: Clone>(data: &[T], train_fraction: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((data.len() as f64) * train_fraction).round() as usize;
    let pick = |ids: &[usize]| ids.iter().map(|&i| data[i].clone()).collect();
    (pick(&idx[..cut]), pick(&idx[cut..]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_lidar() -> LidarConfig {
        LidarConfig {
            azimuth_steps: 360,
            elevation_angles: (0..8).map(|i| (-15.0 + 2.0 * i as f64).to_radians()).collect(),
            max_range: 60.0,
        }
    }

    #[test]
    fn deterministic_and_sized() {
        let o = OracleParams::default();
        let a = generate_instances(3, 20, &o, &small_lidar()).unwrap();
        let b = generate_instances(3, 20, &o, &small_lidar()).unwrap();
        assert_eq!(a.len(), 20);
        let k = PartitionResolution::new(2).unwrap();
        let sa: Vec<_> = a.iter().map(|i| i.sample(k)).collect();
        let sb: Vec<_> = b.iter().map(|i| i.sample(k)).collect();
        assert_eq!(sa, sb);
        assert!(sa.iter().all(|s| (0.0..=1.0).contains(&s.label) && s.features.len() == 11));
    }

    #[test]
    fn singleton() {
        let o = OracleParams::default();
        let k = PartitionResolution::new(1).unwrap();
        let s = generate_training_set(1, 1, k, &o).unwrap();
        assert_eq!(s.len(), 1);
        assert!((0.0..=1.0).contains(&s[0].label));
        assert!(generate_training_set(1, 0, k, &o).is_err());
    }

    #[test]
    fn random_scenes_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            random_scene(&mut rng).validate().unwrap();
        }
    }
}
