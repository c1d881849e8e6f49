//! The reference scene: an ego vehicle and three helpers on a 50 m stretch
//! with two trucks, two cars, a pedestrian and a cyclist.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scene::{BoundingBox, CavSpec, ObjectClass, ObjectSpec, Point3, Scenario};

const CAR: [f64; 3] = [4.5, 1.8, 1.5];
const SENSOR_HEIGHT: f64 = 1.9;

/// Nominal (x, y) of each vehicle; index 0 is the ego.
const CAVS: [[f64; 2]; 4] = [[5.0, 0.0], [33.0, -3.5], [46.0, 0.0], [12.0, 3.5]];

const OBJECTS: [(ObjectClass, [f64; 2], [f64; 3]); 6] = [
    (ObjectClass::Truck, [18.0, -3.5], [9.0, 2.5, 3.5]),
    (ObjectClass::Truck, [33.0, 1.5], [9.0, 2.5, 3.5]),
    (ObjectClass::Car, [26.0, 3.5], CAR),
    (ObjectClass::Car, [42.0, -3.5], CAR),
    (ObjectClass::Pedestrian, [22.0, 6.5], [0.6, 0.6, 1.75]),
    (ObjectClass::Cyclist, [33.0, 6.5], [1.8, 0.6, 1.7]),
];

/// Seed 0 gives the nominal layout; other seeds shift every vehicle and
/// object along the road by up to 0.5 m.
pub fn make_default_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = || {
        if seed == 0 {
            0.0
        } else {
            rng.gen_range(-0.5..=0.5)
        }
    };
    let cavs = CAVS
        .iter()
        .enumerate()
        .map(|(id, &[x, y])| {
            let x = x + jitter();
            CavSpec {
                id,
                sensor_origin: Point3::new(x, y, SENSOR_HEIGHT),
                body: BoundingBox::new(Point3::new(x, y, CAR[2] / 2.0), CAR).expect("positive lengths"),
            }
        })
        .collect();
    let objects = OBJECTS
        .iter()
        .enumerate()
        .map(|(id, &(class, [x, y], dims))| ObjectSpec {
            id,
            class,
            bbox: BoundingBox::new(Point3::new(x + jitter(), y, dims[2] / 2.0), dims)
                .expect("positive lengths"),
        })
        .collect();
    Scenario {
        cavs,
        objects,
        rsu_position: Point3::new(25.0, 12.0, 6.0),
        roi: BoundingBox::new(Point3::new(30.0, 0.0, 2.5), [40.0, 16.0, 5.0]).expect("positive lengths"),
        ground_z: 0.0,
    }
}
