//! System parameters and the computing / communication / topology model.
//!
//! Node indices: vehicles are `0..N` (0 is the ego), the RSU is `N`.

use serde::{Deserialize, Serialize};

use crate::accuracy::AccuracyEstimator;
use crate::error::{Error, Result};
use crate::quality::{fuse_indicators, QualityIndicator};
use crate::scene::BoundingBox;

/// All units SI. Serialized field names follow the usual symbols
/// (`B`, `sigma2`, `P_n`, `gamma`, `h2`, `phi`, `epsilon`, `omega`, `T`, `A`);
/// computing capacity is split into `f_cav` (every vehicle) and `f_rsu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    /// Total bandwidth shared by all links, Hz.
    #[serde(rename = "B")]
    pub bandwidth: f64,
    /// Received noise power, W.
    pub sigma2: f64,
    /// Vehicle transmit power, W.
    #[serde(rename = "P_n")]
    pub tx_power: f64,
    /// Path-loss exponent.
    pub gamma: f64,
    /// Channel fading magnitude squared.
    pub h2: f64,
    /// Computing capacity of each vehicle, cycles/s.
    pub f_cav: f64,
    /// Computing capacity of the RSU edge server, cycles/s.
    pub f_rsu: f64,
    /// Bits per observation point.
    pub phi: f64,
    /// CPU cycles per observation point.
    pub epsilon: f64,
    /// Weight on bandwidth versus compute fractions.
    pub omega: f64,
    /// Delay bound, s.
    #[serde(rename = "T")]
    pub deadline: f64,
    /// Required accuracy per subtask.
    #[serde(rename = "A")]
    pub accuracy_req: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            bandwidth: 2.0e7,
            sigma2: 1e-13,
            tx_power: 1.0,
            gamma: 3.4,
            h2: 1.0,
            f_cav: 1e10,
            f_rsu: 2e11,
            phi: 192.0,
            epsilon: 30000.0,
            omega: 0.5,
            deadline: 0.02,
            accuracy_req: 0.9,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("B", self.bandwidth),
            ("sigma2", self.sigma2),
            ("P_n", self.tx_power),
            ("gamma", self.gamma),
            ("h2", self.h2),
            ("f_cav", self.f_cav),
            ("f_rsu", self.f_rsu),
            ("phi", self.phi),
            ("epsilon", self.epsilon),
            ("T", self.deadline),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.omega > 0.0 && self.omega < 1.0) {
            return Err(Error::param("omega", "must lie in (0, 1)"));
        }
        if !(self.accuracy_req >= 0.0 && self.accuracy_req < 1.0) {
            return Err(Error::param("A", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Capacity of node `node` when there are `n_cavs` vehicles.
    pub fn capacity(&self, node: usize, n_cavs: usize) -> f64 {
        if node == n_cavs {
            self.f_rsu
        } else {
            self.f_cav
        }
    }

    /// `sum_n f_n` over vehicles and RSU.
    pub fn total_capacity(&self, n_cavs: usize) -> f64 {
        self.f_cav * n_cavs as f64 + self.f_rsu
    }

    /// Overwrites the fields present in a JSON object.
    pub fn with_overrides(&self, overrides: &serde_json::Value) -> Result<Self> {
        let mut base = serde_json::to_value(self).expect("params serialize");
        if let (Some(b), Some(o)) = (base.as_object_mut(), overrides.as_object()) {
            for (k, v) in o {
                b.insert(k.clone(), v.clone());
            }
        } else if !overrides.is_null() {
            return Err(Error::param("params", "overrides must be a JSON object"));
        }
        let p: Self = serde_json::from_value(base).map_err(|e| Error::param("params", e.to_string()))?;
        p.validate()?;
        Ok(p)
    }
}

/// Data selection `s` (`N x M`) and placement `e` (`(N+1) x M`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    /// `selection[n][m]`: vehicle n's data used for subtask m.
    pub selection: Vec<Vec<bool>>,
    /// `placement[n][m]`: subtask m runs on node n.
    pub placement: Vec<Vec<bool>>,
}

impl Assignment {
    pub fn empty(n_cavs: usize, n_objects: usize) -> Self {
        Self {
            selection: vec![vec![false; n_objects]; n_cavs],
            placement: vec![vec![false; n_objects]; n_cavs + 1],
        }
    }

    /// Builds from per-subtask selection bitmasks and placement node indices.
    pub fn from_masks(n_cavs: usize, masks: &[u32], nodes: &[usize]) -> Self {
        let mut a = Self::empty(n_cavs, masks.len());
        for (m, (&mask, &node)) in masks.iter().zip(nodes).enumerate() {
            for n in 0..n_cavs {
                a.selection[n][m] = mask & (1 << n) != 0;
            }
            a.placement[node][m] = true;
        }
        a
    }

    pub fn n_cavs(&self) -> usize {
        self.selection.len()
    }

    pub fn n_objects(&self) -> usize {
        self.placement.first().map_or(0, Vec::len)
    }

    pub fn rsu(&self) -> usize {
        self.n_cavs()
    }

    /// The node running subtask `m`, if exactly one is set.
    pub fn node_of(&self, m: usize) -> Option<usize> {
        let mut it = (0..self.placement.len()).filter(|&n| self.placement[n][m]);
        match (it.next(), it.next()) {
            (Some(n), None) => Some(n),
            _ => None,
        }
    }

    pub fn selection_mask(&self, m: usize) -> u32 {
        (0..self.n_cavs())
            .filter(|&n| self.selection[n][m])
            .fold(0, |acc, n| acc | (1 << n))
    }

    pub fn chi(&self) -> Vec<Vec<bool>> {
        derive_chi(&self.selection, &self.placement)
    }
}

/// Per-subtask demand `mu^(m) = eps * sum_n s_n^(m) |D_n^(m)|` and per-node
/// demand `mu_n = sum_m e_n^(m) mu^(m)`, in cycles.
pub fn computing_demands(
    assignment: &Assignment,
    point_counts: &[Vec<u64>],
    params: &SystemParams,
) -> (Vec<f64>, Vec<f64>) {
    let n_objects = assignment.n_objects();
    let per_subtask: Vec<f64> = (0..n_objects)
        .map(|m| {
            let pts: u64 = (0..assignment.n_cavs())
                .filter(|&n| assignment.selection[n][m])
                .map(|n| point_counts[n][m])
                .sum();
            params.epsilon * pts as f64
        })
        .collect();
    let per_node = assignment
        .placement
        .iter()
        .map(|row| {
            row.iter()
                .zip(&per_subtask)
                .filter(|(e, _)| **e)
                .map(|(_, mu)| mu)
                .sum()
        })
        .collect();
    (per_subtask, per_node)
}

/// `mu / (alpha f)`, or 0 when `alpha = 0` and there is no demand.
pub fn computing_time(mu: f64, alpha: f64, capacity: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param("alpha", format!("must lie in [0, 1], got {alpha}")));
    }
    if alpha > 0.0 {
        Ok(mu / (alpha * capacity))
    } else if mu > 0.0 {
        Err(Error::InvalidCombination(format!(
            "computing demand {mu} cycles with zero compute fraction"
        )))
    } else {
        Ok(0.0)
    }
}

/// Bits sent from vehicle `from` to node `to`: `phi * sum_m s_from^(m) e_to^(m) |D_from^(m)|`.
pub fn link_load(
    assignment: &Assignment,
    point_counts: &[Vec<u64>],
    params: &SystemParams,
    from: usize,
    to: usize,
) -> f64 {
    if from == to {
        return 0.0;
    }
    let pts: u64 = (0..assignment.n_objects())
        .filter(|&m| assignment.selection[from][m] && assignment.placement[to][m])
        .map(|m| point_counts[from][m])
        .sum();
    params.phi * pts as f64
}

/// Received SNR at distance `d`: `P h^2 d^-gamma / sigma^2`.
pub fn snr(params: &SystemParams, distance: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::param("distance", format!("must be positive, got {distance}")));
    }
    Ok(params.tx_power * params.h2 * distance.powf(-params.gamma) / params.sigma2)
}

/// Link rate with bandwidth fraction `beta`: `beta B log2(1 + SNR)`.
pub fn transmission_rate(beta: f64, params: &SystemParams, distance: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::param("beta", format!("must lie in [0, 1], got {beta}")));
    }
    Ok(beta * params.bandwidth * (1.0 + snr(params, distance)?).log2())
}

/// `rho / rate`, or 0 when there is nothing to send.
pub fn transmission_time(rho: f64, rate: f64) -> Result<f64> {
    if rho < 0.0 {
        return Err(Error::param("rho", "must be non-negative"));
    }
    if rate > 0.0 {
        Ok(rho / rate)
    } else if rho > 0.0 {
        Err(Error::InvalidCombination(format!(
            "{rho} bits to send with zero bandwidth"
        )))
    } else {
        Ok(0.0)
    }
}

/// Link activation: `chi[n][n'] = 1` iff vehicle n sends data for at least one
/// subtask placed at a different node n'.
pub fn derive_chi(selection: &[Vec<bool>], placement: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n_cavs = selection.len();
    (0..n_cavs)
        .map(|n| {
            (0..=n_cavs)
                .map(|to| {
                    to != n
                        && selection[n]
                            .iter()
                            .zip(&placement[to])
                            .any(|(s, e)| *s && *e)
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopologyViolation {
    /// Subtask not placed on exactly one node.
    Placement { object: usize, nodes: usize },
    /// Vehicle with more than one active link (sending plus receiving).
    HalfDuplex { cav: usize, links: usize },
}

/// Checks single placement per subtask and the one-link-per-vehicle rule.
/// The RSU may terminate any number of links.
pub fn validate_topology(assignment: &Assignment) -> Vec<TopologyViolation> {
    let mut out = Vec::new();
    let n_cavs = assignment.n_cavs();
    for m in 0..assignment.n_objects() {
        let nodes = assignment.placement.iter().filter(|row| row[m]).count();
        if nodes != 1 {
            out.push(TopologyViolation::Placement { object: m, nodes });
        }
    }
    let chi = assignment.chi();
    for n in 0..n_cavs {
        let sending = chi[n].iter().filter(|&&c| c).count();
        let receiving = (0..n_cavs).filter(|&o| o != n && chi[o][n]).count();
        if sending + receiving > 1 {
            out.push(TopologyViolation::HalfDuplex {
                cav: n,
                links: sending + receiving,
            });
        }
    }
    out
}

/// Estimated accuracy of every subtask's fused data and whether it meets `required`.
pub fn check_accuracy(
    assignment: &Assignment,
    indicators: &[Vec<QualityIndicator>],
    boxes: &[BoundingBox],
    estimator: &dyn AccuracyEstimator,
    required: f64,
) -> Result<Vec<(f64, bool)>> {
    (0..assignment.n_objects())
        .map(|m| {
            let sel: Vec<bool> = (0..assignment.n_cavs())
                .map(|n| assignment.selection[n][m])
                .collect();
            let per_cav: Vec<QualityIndicator> =
                indicators.iter().map(|row| row[m].clone()).collect();
            let fused = fuse_indicators(&sel, &per_cav)?;
            let a = estimator.estimate(&fused, &boxes[m])?;
            Ok((a, a >= required))
        })
        .collect()
}

/// `omega * sum(beta) + (1 - omega) * sum(alpha_n f_n) / sum(f_n)`, with
/// `alpha` indexed by node (vehicles then RSU).
pub fn total_cost(alpha: &[f64], beta: impl IntoIterator<Item = f64>, params: &SystemParams) -> f64 {
    let n_cavs = alpha.len().saturating_sub(1);
    let beta_sum: f64 = beta.into_iter().sum();
    let used: f64 = alpha
        .iter()
        .enumerate()
        .map(|(n, a)| a * params.capacity(n, n_cavs))
        .sum();
    params.omega * beta_sum + (1.0 - params.omega) * used / params.total_capacity(n_cavs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts_1000() -> Vec<Vec<u64>> {
        vec![vec![1000, 500], vec![300, 200]]
    }

    #[test]
    fn demands() {
        let p = SystemParams::default();
        let a = Assignment::from_masks(2, &[0b01, 0b01], &[2, 2]);
        let (mu, per_node) = computing_demands(&a, &counts_1000(), &p);
        assert_eq!(mu[0], 3.0e7);
        assert_eq!(mu[1], 1.5e7);
        assert_eq!(per_node, vec![0.0, 0.0, 4.5e7]);

        let none = Assignment::from_masks(2, &[0, 0], &[0, 0]);
        let (mu, _) = computing_demands(&none, &counts_1000(), &p);
        assert_eq!(mu, vec![0.0, 0.0]);

        let counts = vec![vec![1000, 1000]];
        let a = Assignment::from_masks(1, &[1, 1], &[0, 0]);
        let (_, per_node) = computing_demands(&a, &counts, &p);
        assert_eq!(per_node[0], 6.0e7);
    }

    #[test]
    fn compute_times() {
        assert!((computing_time(3e7, 1.0, 1e10).unwrap() - 3e-3).abs() < 1e-15);
        assert_eq!(computing_time(0.0, 0.0, 1e10).unwrap(), 0.0);
        assert!((computing_time(3e7, 0.5, 1e10).unwrap() - 6e-3).abs() < 1e-15);
        assert!(computing_time(3e7, 0.0, 1e10).is_err());
    }

    #[test]
    fn loads() {
        let p = SystemParams::default();
        let a = Assignment::from_masks(2, &[0b01, 0b00], &[2, 0]);
        assert_eq!(link_load(&a, &counts_1000(), &p, 0, 2), 192000.0);
        let local = Assignment::from_masks(2, &[0b01, 0b01], &[0, 0]);
        for to in 0..3 {
            assert_eq!(link_load(&local, &counts_1000(), &p, 0, to), 0.0);
        }
        let both = Assignment::from_masks(2, &[0b01, 0b01], &[2, 2]);
        assert_eq!(link_load(&both, &counts_1000(), &p, 0, 2), 288000.0);
    }

    #[test]
    fn rates() {
        let p = SystemParams::default();
        let s = snr(&p, 10.0).unwrap();
        assert!((s / 3.981e9 - 1.0).abs() < 1e-3, "{s}");
        let r = transmission_rate(1.0, &p, 10.0).unwrap();
        assert!((r / 6.38e8 - 1.0).abs() < 2e-3, "{r}");
        assert_eq!(transmission_rate(0.0, &p, 10.0).unwrap(), 0.0);
        let half = transmission_rate(0.5, &p, 10.0).unwrap();
        assert!((2.0 * half - r).abs() < 1e-6);
        assert!(transmission_rate(1.0, &p, 0.0).is_err());

        let t = transmission_time(192000.0, r).unwrap();
        assert!((t - 0.301e-3).abs() < 1e-6, "{t}");
        assert_eq!(transmission_time(0.0, 0.0).unwrap(), 0.0);
        assert!((transmission_time(192000.0, half).unwrap() - 2.0 * t).abs() < 1e-15);
        assert!(transmission_time(1.0, 0.0).is_err());
    }

    #[test]
    fn chi_examples() {
        // vehicle 1 sends object 0 to node 4 (RSU of a 4-vehicle scene)
        let a = Assignment::from_masks(4, &[0b0010], &[4]);
        let chi = a.chi();
        assert!(chi[1][4]);
        assert_eq!(chi.iter().flatten().filter(|c| **c).count(), 1);

        let local = Assignment::from_masks(4, &[0b0010], &[1]);
        assert!(local.chi()[1].iter().all(|c| !c));

        let none = Assignment::from_masks(4, &[0, 0], &[4, 2]);
        assert!(none.chi().iter().flatten().all(|c| !c));
    }

    #[test]
    fn topology_examples() {
        // 1 -> 2 and 3 -> 1: vehicle 1 both sends and receives
        let a = Assignment::from_masks(4, &[0b0010, 0b1000], &[2, 1]);
        let v = validate_topology(&a);
        assert_eq!(v, vec![TopologyViolation::HalfDuplex { cav: 1, links: 2 }]);

        // two uplinks into the RSU are fine
        let a = Assignment::from_masks(4, &[0b0010, 0b0100], &[4, 4]);
        assert!(validate_topology(&a).is_empty());

        let mut a = Assignment::from_masks(4, &[0b0010], &[4]);
        a.placement[4][0] = false;
        assert_eq!(
            validate_topology(&a),
            vec![TopologyViolation::Placement { object: 0, nodes: 0 }]
        );
    }

    #[test]
    fn cost_examples() {
        let p = SystemParams::default();
        let mut alpha = vec![0.0; 5];
        alpha[1] = 1.0;
        let c = total_cost(&alpha, [0.3125], &p);
        assert!((c - 0.177083333).abs() < 1e-8, "{c}");
        assert_eq!(total_cost(&[0.0; 5], [0.0], &p), 0.0);
        let p1 = SystemParams { omega: 1.0, ..p };
        assert_eq!(total_cost(&alpha, [0.25, 0.125], &p1), 0.375);
    }

    #[test]
    fn overrides_merge() {
        let p = SystemParams::default()
            .with_overrides(&serde_json::json!({"epsilon": 10000.0, "A": 0.7}))
            .unwrap();
        assert_eq!(p.epsilon, 10000.0);
        assert_eq!(p.accuracy_req, 0.7);
        assert_eq!(p.bandwidth, 2e7);
        assert!(SystemParams::default()
            .with_overrides(&serde_json::json!({"omega": 1.5}))
            .is_err());
        assert!(SystemParams::default()
            .with_overrides(&serde_json::json!({"nope": 1}))
            .is_err());
    }
}
