//! Synthetic driving scenes, ray-cast LiDAR, and per-object point extraction.
//!
//! All geometry lives in one global frame (meters). Boxes are axis-aligned.
//! The LiDAR model fires one ray per (azimuth, elevation) pair from the
//! sensor origin and keeps the nearest hit among object boxes, the bodies of
//! the other vehicles, and the ground plane.

use std::collections::HashSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn coord(&self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    fn set_coord(&mut self, axis: usize, v: f64) {
        match axis {
            0 => self.x = v,
            1 => self.y = v,
            _ => self.z = v,
        }
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

/// Axis-aligned box given by its center and edge lengths (all strictly positive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    center: Point3,
    lengths: [f64; 3],
}

impl BoundingBox {
    pub fn new(center: Point3, lengths: [f64; 3]) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::InvalidBox("non-finite center".into()));
        }
        if lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::InvalidBox(format!(
                "all lengths must be positive, got {lengths:?}"
            )));
        }
        Ok(Self { center, lengths })
    }

    pub fn center(&self) -> Point3 {
        self.center
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.lengths
    }

    pub fn min_corner(&self) -> Point3 {
        Point3::new(
            self.center.x - self.lengths[0] / 2.0,
            self.center.y - self.lengths[1] / 2.0,
            self.center.z - self.lengths[2] / 2.0,
        )
    }

    pub fn max_corner(&self) -> Point3 {
        Point3::new(
            self.center.x + self.lengths[0] / 2.0,
            self.center.y + self.lengths[1] / 2.0,
            self.center.z + self.lengths[2] / 2.0,
        )
    }

    /// Closed-interval containment on every axis, against the corners so
    /// that the corners themselves are inside.
    pub fn contains(&self, p: &Point3) -> bool {
        let (lo, hi) = (self.min_corner(), self.max_corner());
        (0..3).all(|a| lo.coord(a) <= p.coord(a) && p.coord(a) <= hi.coord(a))
    }

    pub fn intersects(&self, other: &BoundingBox) -> bool {
        (0..3).all(|a| {
            (self.center.coord(a) - other.center.coord(a)).abs()
                <= (self.lengths[a] + other.lengths[a]) / 2.0
        })
    }

    /// Total surface area `2(lx*ly + ly*lz + lx*lz)`.
    pub fn surface_area(&self) -> f64 {
        let [lx, ly, lz] = self.lengths;
        2.0 * (lx * ly + ly * lz + lx * lz)
    }

    /// Unsigned distance from `p` to the box surface.
    pub fn surface_distance(&self, p: &Point3) -> f64 {
        let lo = self.min_corner();
        let hi = self.max_corner();
        if self.contains(p) {
            (0..3)
                .map(|a| (p.coord(a) - lo.coord(a)).min(hi.coord(a) - p.coord(a)))
                .fold(f64::INFINITY, f64::min)
        } else {
            let mut sq = 0.0;
            for a in 0..3 {
                let c = p.coord(a);
                let d = if c < lo.coord(a) {
                    lo.coord(a) - c
                } else if c > hi.coord(a) {
                    c - hi.coord(a)
                } else {
                    0.0
                };
                sq += d * d;
            }
            sq.sqrt()
        }
    }

    /// Slab test. Returns the entry distance and the axis of the entered face
    /// for a ray starting outside the box, or `None` on a miss.
    fn ray_entry(&self, origin: &Point3, dir: &[f64; 3]) -> Option<(f64, usize, f64)> {
        let lo = self.min_corner();
        let hi = self.max_corner();
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        let mut axis = 0;
        let mut face = 0.0;
        for a in 0..3 {
            let o = origin.coord(a);
            let (l, h) = (lo.coord(a), hi.coord(a));
            if dir[a].abs() < 1e-15 {
                if o < l || o > h {
                    return None;
                }
                continue;
            }
            let (t1, f1) = ((l - o) / dir[a], l);
            let (t2, f2) = ((h - o) / dir[a], h);
            let (tn, fnear, tf) = if t1 < t2 { (t1, f1, t2) } else { (t2, f2, t1) };
            if tn > t_near {
                t_near = tn;
                axis = a;
                face = fnear;
            }
            t_far = t_far.min(tf);
        }
        if t_near > t_far || t_near <= 0.0 {
            return None;
        }
        Some((t_near, axis, face))
    }
}

/// Surface area of a box with the given edge lengths.
pub fn surface_area(lengths: [f64; 3]) -> Result<f64> {
    Ok(BoundingBox::new(Point3::default(), lengths)?.surface_area())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectClass {
    Car,
    Truck,
    Pedestrian,
    Cyclist,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 4] = [
        ObjectClass::Car,
        ObjectClass::Truck,
        ObjectClass::Pedestrian,
        ObjectClass::Cyclist,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ObjectClass::Car => "car",
            ObjectClass::Truck => "truck",
            ObjectClass::Pedestrian => "pedestrian",
            ObjectClass::Cyclist => "cyclist",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub id: usize,
    pub class: ObjectClass,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CavSpec {
    pub id: usize,
    pub sensor_origin: Point3,
    pub body: BoundingBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidarConfig {
    pub azimuth_steps: usize,
    /// Beam elevations in radians (negative points down).
    pub elevation_angles: Vec<f64>,
    pub max_range: f64,
}

impl Default for LidarConfig {
    /// 0.25 degree azimuth grid, 32 beams spread over -20..+4 degrees, 80 m range.
    fn default() -> Self {
        let beams = 32;
        let (lo, hi) = (-20.0_f64, 4.0_f64);
        let elevation_angles = (0..beams)
            .map(|i| (lo + (hi - lo) * i as f64 / (beams - 1) as f64).to_radians())
            .collect();
        Self {
            azimuth_steps: 1440,
            elevation_angles,
            max_range: 80.0,
        }
    }
}

impl LidarConfig {
    pub fn validate(&self) -> Result<()> {
        if self.azimuth_steps < 4 {
            return Err(Error::param("lidar.azimuth_steps", "must be at least 4"));
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(Error::param("lidar.max_range", "must be positive"));
        }
        if self.elevation_angles.iter().any(|e| !e.is_finite()) {
            return Err(Error::param("lidar.elevation_angles", "must be finite"));
        }
        Ok(())
    }
}

/// A perception-task scene: vehicles (index 0 is the ego), objects, RSU, RoI.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub cavs: Vec<CavSpec>,
    pub objects: Vec<ObjectSpec>,
    pub rsu_position: Point3,
    pub roi: BoundingBox,
    pub ground_z: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.cavs.is_empty() {
            return Err(Error::InvalidScenario("at least one CAV required".into()));
        }
        if self.objects.is_empty() {
            return Err(Error::InvalidScenario("at least one object required".into()));
        }
        for (i, c) in self.cavs.iter().enumerate() {
            if c.id != i {
                return Err(Error::InvalidScenario(format!(
                    "CAV ids must be 0..N in order; position {i} has id {}",
                    c.id
                )));
            }
            if c.sensor_origin.z <= c.body.max_corner().z {
                return Err(Error::InvalidScenario(format!(
                    "CAV {i}: sensor origin must be above the body top face"
                )));
            }
        }
        let mut seen = HashSet::new();
        for (i, o) in self.objects.iter().enumerate() {
            if o.id != i || !seen.insert(o.id) {
                return Err(Error::InvalidScenario(format!(
                    "object ids must be 0..M in order; position {i} has id {}",
                    o.id
                )));
            }
            if !o.bbox.intersects(&self.roi) {
                return Err(Error::InvalidScenario(format!(
                    "object {i} does not intersect the region of interest"
                )));
            }
        }
        Ok(())
    }

    pub fn n_cavs(&self) -> usize {
        self.cavs.len()
    }

    pub fn n_objects(&self) -> usize {
        self.objects.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Ray-casts one scan from `cav_index`. Obstacles are every object box and
/// every other vehicle body; the scanning vehicle's own body is ignored.
pub fn simulate_lidar(scenario: &Scenario, cav_index: usize, cfg: &LidarConfig) -> PointCloud {
    let cav = &scenario.cavs[cav_index];
    let origin = cav.sensor_origin;
    let obstacles: Vec<&BoundingBox> = scenario
        .objects
        .iter()
        .map(|o| &o.bbox)
        .chain(
            scenario
                .cavs
                .iter()
                .filter(|c| c.id != cav.id)
                .map(|c| &c.body),
        )
        .collect();

    let mut points = Vec::new();
    for step in 0..cfg.azimuth_steps {
        let az = 2.0 * PI * step as f64 / cfg.azimuth_steps as f64;
        let (sa, ca) = az.sin_cos();
        for &el in &cfg.elevation_angles {
            let (se, ce) = el.sin_cos();
            let dir = [ce * ca, ce * sa, se];

            let mut best_t = cfg.max_range;
            let mut best: Option<Point3> = None;
            for b in &obstacles {
                if let Some((t, axis, face)) = b.ray_entry(&origin, &dir) {
                    let closer = if best.is_none() { t <= best_t } else { t < best_t };
                    if closer {
                        best_t = t;
                        best = Some(snap_to_face(b, &origin, &dir, t, axis, face));
                    }
                }
            }
            if dir[2] < 0.0 {
                let t = (scenario.ground_z - origin.z) / dir[2];
                let closer = if best.is_none() { t <= best_t } else { t < best_t };
                if t > 0.0 && closer {
                    best = Some(Point3::new(
                        origin.x + t * dir[0],
                        origin.y + t * dir[1],
                        scenario.ground_z,
                    ));
                }
            }
            points.extend(best);
        }
    }
    PointCloud { points }
}

// The hit coordinate on the entered axis is set to the exact face value and the
// others are clamped into the face, so containment tests stay exact.
fn snap_to_face(
    b: &BoundingBox,
    origin: &Point3,
    dir: &[f64; 3],
    t: f64,
    axis: usize,
    face: f64,
) -> Point3 {
    let lo = b.min_corner();
    let hi = b.max_corner();
    let mut p = Point3::new(
        origin.x + t * dir[0],
        origin.y + t * dir[1],
        origin.z + t * dir[2],
    );
    for a in 0..3 {
        if a == axis {
            p.set_coord(a, face);
        } else {
            p.set_coord(a, p.coord(a).clamp(lo.coord(a), hi.coord(a)));
        }
    }
    p
}

/// Points of `cloud` inside `bbox` (closed intervals on every face).
pub fn extract_object_points(cloud: &PointCloud, bbox: &BoundingBox) -> PointCloud {
    PointCloud {
        points: cloud
            .points
            .iter()
            .copied()
            .filter(|p| bbox.contains(p))
            .collect(),
    }
}

/// Splits a cloud into per-object point sets. A point on a face shared by
/// several boxes goes to the lowest-indexed object; points in no box are dropped.
pub fn partition_by_objects(cloud: &PointCloud, objects: &[ObjectSpec]) -> Vec<PointCloud> {
    let mut out = vec![PointCloud::default(); objects.len()];
    for p in &cloud.points {
        if let Some(i) = objects.iter().position(|o| o.bbox.contains(p)) {
            out[i].points.push(*p);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// JSON scenario document

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CavDoc {
    pub id: usize,
    pub sensor_origin: [f64; 3],
    pub body_center: [f64; 3],
    pub body_lengths: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectDoc {
    pub id: usize,
    pub class: ObjectClass,
    pub center: [f64; 3],
    pub lengths: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxDoc {
    pub center: [f64; 3],
    pub lengths: [f64; 3],
}

/// On-disk scenario file. `params` is an optional system-parameter block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioDoc {
    pub cavs: Vec<CavDoc>,
    pub objects: Vec<ObjectDoc>,
    pub rsu_position: [f64; 3],
    pub roi: BoxDoc,
    pub ground_z: f64,
    pub lidar: LidarConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<crate::netmodel::SystemParams>,
}

impl ScenarioDoc {
    pub fn from_scenario(
        s: &Scenario,
        lidar: &LidarConfig,
        params: Option<crate::netmodel::SystemParams>,
    ) -> Self {
        Self {
            cavs: s
                .cavs
                .iter()
                .map(|c| CavDoc {
                    id: c.id,
                    sensor_origin: c.sensor_origin.into(),
                    body_center: c.body.center().into(),
                    body_lengths: c.body.lengths(),
                })
                .collect(),
            objects: s
                .objects
                .iter()
                .map(|o| ObjectDoc {
                    id: o.id,
                    class: o.class,
                    center: o.bbox.center().into(),
                    lengths: o.bbox.lengths(),
                })
                .collect(),
            rsu_position: s.rsu_position.into(),
            roi: BoxDoc {
                center: s.roi.center().into(),
                lengths: s.roi.lengths(),
            },
            ground_z: s.ground_z,
            lidar: lidar.clone(),
            params,
        }
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        let cavs = self
            .cavs
            .iter()
            .map(|c| {
                Ok(CavSpec {
                    id: c.id,
                    sensor_origin: c.sensor_origin.into(),
                    body: BoundingBox::new(c.body_center.into(), c.body_lengths)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let objects = self
            .objects
            .iter()
            .map(|o| {
                Ok(ObjectSpec {
                    id: o.id,
                    class: o.class,
                    bbox: BoundingBox::new(o.center.into(), o.lengths)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let s = Scenario {
            cavs,
            objects,
            rsu_position: self.rsu_position.into(),
            roi: BoundingBox::new(self.roi.center.into(), self.roi.lengths)?,
            ground_z: self.ground_z,
        };
        s.validate()?;
        self.lidar.validate()?;
        Ok(s)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
