//! Everything the optimizers need about one perception task, precomputed once:
//! per-vehicle point counts and indicators, distances, and the estimated
//! accuracy of every subset of views for every object.

use rayon::prelude::*;

use crate::accuracy::{oracle_from_indicator, AccuracyEstimator, OracleParams};
use crate::error::{Error, Result};
use crate::netmodel::{
    computing_demands, computing_time, link_load, transmission_rate, transmission_time,
    validate_topology, Assignment, SystemParams,
};
use crate::quality::{compute_indicator, fuse_indicators, PartitionResolution, QualityIndicator};
use crate::resalloc::{build_problem, solve_p2, ActiveProblem, Allocation, AllocationResult};
use crate::scene::{partition_by_objects, simulate_lidar, BoundingBox, LidarConfig, Scenario};

/// Subset tables hold `2^N` entries per object.
pub const MAX_CAVS: usize = 16;

/// Tabulated inputs for a task, for building a context without a scene.
#[derive(Debug, Clone)]
pub struct TaskTables {
    pub params: SystemParams,
    /// `point_counts[n][m]`.
    pub point_counts: Vec<Vec<u64>>,
    /// `distances[n][n']` for vehicle n and node n' (vehicles then RSU).
    pub distances: Vec<Vec<f64>>,
    /// Sensor-to-object-center distance, `object_distances[n][m]`.
    pub object_distances: Vec<Vec<f64>>,
    pub boxes: Vec<BoundingBox>,
    /// `estimated[m][mask]` for every subset mask of vehicles.
    pub estimated: Vec<Vec<f64>>,
    /// Optional ground-truth accuracy with the same layout.
    pub oracle: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
pub struct TaskContext {
    pub params: SystemParams,
    n_cavs: usize,
    point_counts: Vec<Vec<u64>>,
    distances: Vec<Vec<f64>>,
    object_distances: Vec<Vec<f64>>,
    boxes: Vec<BoundingBox>,
    estimated: Vec<Vec<f64>>,
    oracle: Option<Vec<Vec<f64>>>,
    /// Vehicles with a non-empty view of each object.
    visible: Vec<u32>,
}

/// Absolute slack allowed when re-checking an emitted solution.
pub const VERIFY_TOL: f64 = 1e-8;

/// Why a candidate `(s, e)` was rejected, or its allocation.
#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Feasible(Allocation),
    Accuracy,
    Topology,
    Delay,
}

impl Verdict {
    pub fn cost(&self) -> Option<f64> {
        match self {
            Verdict::Feasible(a) => Some(a.cost),
            _ => None,
        }
    }
}

/// Per-vehicle views of each object, at the estimator's and the oracle's resolutions.
#[derive(Debug, Clone)]
pub struct SceneViews {
    /// `indicators[n][m]` at the estimator's resolution.
    pub indicators: Vec<Vec<QualityIndicator>>,
    /// `oracle_indicators[n][m]` at the oracle's resolution.
    pub oracle_indicators: Vec<Vec<QualityIndicator>>,
    pub point_counts: Vec<Vec<u64>>,
}

/// Scans the scene from every vehicle and bins each object's points.
pub fn observe(
    scenario: &Scenario,
    lidar: &LidarConfig,
    k: PartitionResolution,
    oracle: &OracleParams,
) -> Result<SceneViews> {
    let per_cav: Vec<(Vec<QualityIndicator>, Vec<QualityIndicator>, Vec<u64>)> = (0..scenario
        .n_cavs())
        .into_par_iter()
        .map(|n| {
            let cloud = simulate_lidar(scenario, n, lidar);
            let parts = partition_by_objects(&cloud, &scenario.objects);
            let mut ind = Vec::new();
            let mut ora = Vec::new();
            let mut cnt = Vec::new();
            for (obj, pts) in scenario.objects.iter().zip(&parts) {
                ind.push(compute_indicator(pts, &obj.bbox, k)?);
                ora.push(compute_indicator(pts, &obj.bbox, oracle.k_oracle)?);
                cnt.push(pts.len() as u64);
            }
            Ok((ind, ora, cnt))
        })
        .collect::<Result<_>>()?;
    let mut views = SceneViews {
        indicators: Vec::new(),
        oracle_indicators: Vec::new(),
        point_counts: Vec::new(),
    };
    for (i, o, c) in per_cav {
        views.indicators.push(i);
        views.oracle_indicators.push(o);
        views.point_counts.push(c);
    }
    Ok(views)
}

fn subset_table<F>(n_cavs: usize, n_objects: usize, per_cav: &[Vec<QualityIndicator>], f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(usize, &QualityIndicator) -> Result<f64> + Sync,
{
    (0..n_objects)
        .map(|m| {
            let views: Vec<QualityIndicator> = per_cav.iter().map(|row| row[m].clone()).collect();
            (0..1u32 << n_cavs)
                .into_par_iter()
                .map(|mask| {
                    let sel: Vec<bool> = (0..n_cavs).map(|n| mask & (1 << n) != 0).collect();
                    f(m, &fuse_indicators(&sel, &views)?)
                })
                .collect()
        })
        .collect()
}

impl TaskContext {
    /// Scans the scene and tabulates estimated and oracle accuracy for every
    /// subset of views.
    pub fn from_scenario(
        scenario: &Scenario,
        lidar: &LidarConfig,
        params: SystemParams,
        estimator: &dyn AccuracyEstimator,
        k: PartitionResolution,
        oracle: &OracleParams,
    ) -> Result<Self> {
        scenario.validate()?;
        let views = observe(scenario, lidar, k, oracle)?;
        Self::from_views(scenario, &views, params, estimator, oracle)
    }

    pub fn from_views(
        scenario: &Scenario,
        views: &SceneViews,
        params: SystemParams,
        estimator: &dyn AccuracyEstimator,
        oracle: &OracleParams,
    ) -> Result<Self> {
        let n = scenario.n_cavs();
        let m = scenario.n_objects();
        if n > MAX_CAVS {
            return Err(Error::InvalidScenario(format!(
                "at most {MAX_CAVS} vehicles supported, got {n}"
            )));
        }
        let boxes: Vec<BoundingBox> = scenario.objects.iter().map(|o| o.bbox).collect();
        let estimated = subset_table(n, m, &views.indicators, |obj, z| {
            estimator.estimate(z, &boxes[obj])
        })?;
        let oracle_table = subset_table(n, m, &views.oracle_indicators, |obj, z| {
            oracle_from_indicator(z, &boxes[obj], oracle)
        })?;
        let positions: Vec<_> = scenario
            .cavs
            .iter()
            .map(|c| c.sensor_origin)
            .chain(std::iter::once(scenario.rsu_position))
            .collect();
        let distances = scenario
            .cavs
            .iter()
            .map(|c| positions.iter().map(|p| c.sensor_origin.distance(p)).collect())
            .collect();
        let object_distances = scenario
            .cavs
            .iter()
            .map(|c| {
                scenario
                    .objects
                    .iter()
                    .map(|o| c.sensor_origin.distance(&o.bbox.center()))
                    .collect()
            })
            .collect();
        Self::from_tables(TaskTables {
            params,
            point_counts: views.point_counts.clone(),
            distances,
            object_distances,
            boxes,
            estimated,
            oracle: Some(oracle_table),
        })
    }

    pub fn from_tables(t: TaskTables) -> Result<Self> {
        t.params.validate()?;
        let n = t.point_counts.len();
        let m = t.boxes.len();
        if n == 0 || m == 0 {
            return Err(Error::InvalidScenario("need at least one vehicle and one object".into()));
        }
        if n > MAX_CAVS {
            return Err(Error::InvalidScenario(format!(
                "at most {MAX_CAVS} vehicles supported, got {n}"
            )));
        }
        let shape_ok = t.point_counts.iter().all(|r| r.len() == m)
            && t.distances.len() == n
            && t.distances.iter().all(|r| r.len() == n + 1)
            && t.object_distances.len() == n
            && t.object_distances.iter().all(|r| r.len() == m)
            && t.estimated.len() == m
            && t.estimated.iter().all(|r| r.len() == 1 << n)
            && t.oracle
                .as_ref()
                .is_none_or(|o| o.len() == m && o.iter().all(|r| r.len() == 1 << n));
        if !shape_ok {
            return Err(Error::InvalidScenario("task tables have inconsistent shapes".into()));
        }
        for (i, row) in t.distances.iter().enumerate() {
            for (j, d) in row.iter().enumerate() {
                if i != j && !(*d > 0.0) {
                    return Err(Error::param(
                        "distances",
                        format!("distance from vehicle {i} to node {j} must be positive"),
                    ));
                }
            }
        }
        let visible = (0..m)
            .map(|obj| {
                (0..n)
                    .filter(|&c| t.point_counts[c][obj] > 0)
                    .fold(0u32, |acc, c| acc | (1 << c))
            })
            .collect();
        Ok(Self {
            params: t.params,
            n_cavs: n,
            point_counts: t.point_counts,
            distances: t.distances,
            object_distances: t.object_distances,
            boxes: t.boxes,
            estimated: t.estimated,
            oracle: t.oracle,
            visible,
        })
    }

    /// Same task with different system parameters.
    pub fn with_params(&self, params: SystemParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            ..self.clone()
        })
    }

    pub fn n_cavs(&self) -> usize {
        self.n_cavs
    }

    pub fn n_objects(&self) -> usize {
        self.boxes.len()
    }

    pub fn rsu(&self) -> usize {
        self.n_cavs
    }

    pub fn point_counts(&self) -> &[Vec<u64>] {
        &self.point_counts
    }

    pub fn distances(&self) -> &[Vec<f64>] {
        &self.distances
    }

    pub fn boxes(&self) -> &[BoundingBox] {
        &self.boxes
    }

    /// Bitmask of vehicles that see object `m`.
    pub fn visible(&self, m: usize) -> u32 {
        self.visible[m]
    }

    pub fn estimated_accuracy(&self, m: usize, mask: u32) -> f64 {
        self.estimated[m][mask as usize]
    }

    pub fn oracle_accuracy(&self, m: usize, mask: u32) -> Option<f64> {
        self.oracle.as_ref().map(|o| o[m][mask as usize])
    }

    /// Vehicle whose sensor is closest to the object's center (lowest index on ties).
    pub fn nearest_cav(&self, m: usize) -> usize {
        (0..self.n_cavs)
            .min_by(|&a, &b| {
                self.object_distances[a][m]
                    .total_cmp(&self.object_distances[b][m])
                    .then(a.cmp(&b))
            })
            .expect("at least one vehicle")
    }

    pub fn accuracy_ok(&self, assignment: &Assignment) -> bool {
        (0..self.n_objects()).all(|m| {
            self.estimated_accuracy(m, assignment.selection_mask(m)) >= self.params.accuracy_req
        })
    }

    pub fn problem(&self, assignment: &Assignment) -> ActiveProblem {
        build_problem(assignment, &self.point_counts, &self.distances, &self.params)
    }

    pub fn allocate(&self, assignment: &Assignment) -> AllocationResult {
        solve_p2(&self.problem(assignment))
    }

    /// Accuracy, then topology, then the inner allocation problem.
    pub fn evaluate(&self, assignment: &Assignment) -> Verdict {
        if !self.accuracy_ok(assignment) {
            return Verdict::Accuracy;
        }
        if !validate_topology(assignment).is_empty() {
            return Verdict::Topology;
        }
        match self.allocate(assignment) {
            AllocationResult::Feasible(a) => Verdict::Feasible(a),
            AllocationResult::Infeasible => Verdict::Delay,
        }
    }
}

impl TaskContext {
    /// Re-checks an emitted solution from first principles: single placement,
    /// the bandwidth budget, accuracy (optional), every delay, link activation
    /// and the half-duplex rule.
    pub fn verify(
        &self,
        assignment: &Assignment,
        allocation: &Allocation,
        enforce_accuracy: bool,
    ) -> Result<()> {
        let fail = |msg: String| Err(Error::ConstraintViolation(msg));
        let p = &self.params;
        let n_cavs = self.n_cavs;
        if let Some(v) = validate_topology(assignment).first() {
            return fail(format!("{v:?}"));
        }
        let beta_sum: f64 = allocation.beta.values().sum();
        if beta_sum > 1.0 + VERIFY_TOL {
            return fail(format!("total bandwidth fraction {beta_sum}"));
        }
        for (&node, &a) in &allocation.alpha {
            if !(-VERIFY_TOL..=1.0 + VERIFY_TOL).contains(&a) {
                return fail(format!("compute fraction {a} at node {node}"));
            }
        }
        if enforce_accuracy {
            for m in 0..self.n_objects() {
                let a = self.estimated_accuracy(m, assignment.selection_mask(m));
                if a < p.accuracy_req - VERIFY_TOL {
                    return fail(format!("object {m} accuracy {a} below {}", p.accuracy_req));
                }
            }
        }
        let (_, mu) = computing_demands(assignment, &self.point_counts, p);
        let compute_time = |node: usize| -> Result<f64> {
            let alpha = allocation.alpha.get(&node).copied().unwrap_or(0.0).clamp(0.0, 1.0);
            computing_time(mu[node], alpha, p.capacity(node, n_cavs))
        };
        for node in 0..=n_cavs {
            let t = compute_time(node)?;
            if t > p.deadline + VERIFY_TOL {
                return fail(format!("node {node} computes for {t} s"));
            }
        }
        let chi = assignment.chi();
        for from in 0..n_cavs {
            for to in 0..=n_cavs {
                let rho = link_load(assignment, &self.point_counts, p, from, to);
                let beta = allocation.beta.get(&(from, to)).copied();
                if chi[from][to] != beta.is_some() {
                    return fail(format!("link ({from}, {to}) activation mismatch"));
                }
                if rho == 0.0 {
                    continue;
                }
                let beta = beta.unwrap_or(0.0).clamp(0.0, 1.0);
                let rate = transmission_rate(beta, p, self.distances[from][to])?;
                let t = transmission_time(rho, rate)? + compute_time(to)?;
                if t > p.deadline + VERIFY_TOL {
                    return fail(format!("link ({from}, {to}) finishes after {t} s"));
                }
            }
        }
        Ok(())
    }
}
