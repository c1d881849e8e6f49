//! Bandwidth and compute fractions for a fixed selection and placement.
//!
//! For every active link `(n, n')` the delay constraint reads
//! `C_link / beta + C_node[n'] / alpha_n' <= T`, with `sum(beta) <= 1`.
//! Nodes that only run local subtasks need `alpha >= C_node / T`.
//!
//! The objective grows in every fraction, so at the optimum each link
//! constraint is tight: `beta = C_link / (T - C_node / alpha)`. Substituting
//! leaves one convex scalar problem per receiving node, coupled only through
//! the bandwidth budget. A multiplier `lambda >= 0` on the budget decouples
//! them; for a node with summed link time `S`, compute time `c` and weight
//! `w = (1 - omega) f / F`, the stationary point of
//! `w alpha + (omega + lambda) S / (T - c / alpha)` is
//! `alpha = (c + sqrt((omega + lambda) S c / w)) / T`, clipped to 1. Bisection
//! on `lambda` finds the smallest multiplier whose allocation fits the budget.
//!
//! The same problem can be posed as a conic program with two rotated
//! second-order cones per link (`beta * u >= C_link`, `alpha * v >= C_node`,
//! `u + v <= T`); the dual-bisection route gives the same optimum.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::netmodel::{computing_demands, link_load, Assignment, SystemParams};

/// Slack used for open lower bounds on `alpha`.
pub const OPEN_BOUND_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveLink {
    pub from: usize,
    pub to: usize,
    /// Transmission time with the whole bandwidth, s.
    pub c_link: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComputeNode {
    pub node: usize,
    /// Computing time with the whole node, s.
    pub c_node: f64,
    /// Cycles per second.
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveProblem {
    pub links: Vec<ActiveLink>,
    /// Every node with computing demand or an incoming active link.
    pub nodes: Vec<ComputeNode>,
    pub omega: f64,
    pub deadline: f64,
    /// Sum of the capacities of all nodes.
    pub total_capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    /// Compute fraction per node.
    pub alpha: BTreeMap<usize, f64>,
    /// Bandwidth fraction per active link `(from, to)`.
    pub beta: BTreeMap<(usize, usize), f64>,
    pub cost: f64,
    /// `sum(beta)`.
    pub bandwidth_fraction: f64,
    /// `sum(alpha f) / sum(f)`.
    pub compute_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AllocationResult {
    Infeasible,
    Feasible(Allocation),
}

impl AllocationResult {
    pub fn tau(&self) -> bool {
        matches!(self, AllocationResult::Feasible(_))
    }

    pub fn cost(&self) -> Option<f64> {
        self.allocation().map(|a| a.cost)
    }

    pub fn allocation(&self) -> Option<&Allocation> {
        match self {
            AllocationResult::Feasible(a) => Some(a),
            AllocationResult::Infeasible => None,
        }
    }

    pub fn into_allocation(self) -> Option<Allocation> {
        match self {
            AllocationResult::Feasible(a) => Some(a),
            AllocationResult::Infeasible => None,
        }
    }
}

impl ActiveProblem {
    pub fn is_empty(&self) -> bool {
        self.links.is_empty() && self.nodes.is_empty()
    }

    fn weight(&self, node: &ComputeNode) -> f64 {
        (1.0 - self.omega) * node.capacity / self.total_capacity
    }

    /// Per node: `(node, summed link time into it)`.
    fn grouped(&self) -> Vec<(&ComputeNode, f64)> {
        self.nodes
            .iter()
            .map(|n| {
                let s = self.links.iter().filter(|l| l.to == n.node).map(|l| l.c_link).sum();
                (n, s)
            })
            .collect()
    }

    /// Assembles an allocation from per-node compute fractions, setting each
    /// link's bandwidth to the tight value.
    pub fn allocation_from_alpha(&self, alpha: &BTreeMap<usize, f64>) -> Allocation {
        let t = self.deadline;
        let mut beta = BTreeMap::new();
        for l in &self.links {
            let node = self.nodes.iter().find(|n| n.node == l.to);
            let compute = match node {
                Some(n) if n.c_node > 0.0 => n.c_node / alpha[&n.node],
                _ => 0.0,
            };
            beta.insert((l.from, l.to), l.c_link / (t - compute));
        }
        // `+ 0.0` turns the empty sum's -0.0 into 0.0
        let bandwidth_fraction: f64 = beta.values().sum::<f64>() + 0.0;
        let compute_fraction: f64 = self
            .nodes
            .iter()
            .map(|n| alpha[&n.node] * n.capacity)
            .sum::<f64>()
            / self.total_capacity
            + 0.0;
        Allocation {
            alpha: alpha.clone(),
            beta,
            cost: self.omega * bandwidth_fraction + (1.0 - self.omega) * compute_fraction,
            bandwidth_fraction,
            compute_fraction,
        }
    }
}

/// Derives link and node constants from an assignment. `distances[n][n']` is
/// the vehicle-to-node distance in meters.
pub fn build_problem(
    assignment: &Assignment,
    point_counts: &[Vec<u64>],
    distances: &[Vec<f64>],
    params: &SystemParams,
) -> ActiveProblem {
    let n_cavs = assignment.n_cavs();
    let (_, per_node) = computing_demands(assignment, point_counts, params);
    let chi = assignment.chi();
    let mut links = Vec::new();
    for (from, row) in chi.iter().enumerate() {
        for (to, &active) in row.iter().enumerate() {
            if !active {
                continue;
            }
            let rho = link_load(assignment, point_counts, params, from, to);
            let snr = params.tx_power * params.h2 * distances[from][to].powf(-params.gamma)
                / params.sigma2;
            let full_rate = params.bandwidth * (1.0 + snr).log2();
            links.push(ActiveLink {
                from,
                to,
                c_link: rho / full_rate,
            });
        }
    }
    let nodes = (0..=n_cavs)
        .filter(|&n| per_node[n] > 0.0 || links.iter().any(|l| l.to == n))
        .map(|n| {
            let capacity = params.capacity(n, n_cavs);
            ComputeNode {
                node: n,
                c_node: per_node[n] / capacity,
                capacity,
            }
        })
        .collect();
    ActiveProblem {
        links,
        nodes,
        omega: params.omega,
        deadline: params.deadline,
        total_capacity: params.total_capacity(n_cavs),
    }
}

/// Whether any allocation meets every delay and the bandwidth budget. The
/// smallest possible total bandwidth is reached with every `alpha = 1`.
pub fn feasibility(problem: &ActiveProblem) -> bool {
    let t = problem.deadline;
    let mut min_bandwidth = 0.0;
    for (node, s) in problem.grouped() {
        if s > 0.0 {
            if node.c_node >= t {
                return false;
            }
            min_bandwidth += s / (t - node.c_node);
        } else if node.c_node > t {
            return false;
        }
    }
    min_bandwidth <= 1.0
}

struct NodeTerm {
    node: usize,
    c: f64,
    s: f64,
    w: f64,
}

impl NodeTerm {
    fn alpha(&self, price: f64, t: f64) -> f64 {
        if self.c == 0.0 {
            return 0.0;
        }
        if self.s == 0.0 {
            return self.c / t;
        }
        if self.w <= 0.0 {
            return 1.0;
        }
        let a = (self.c + (price * self.s * self.c / self.w).sqrt()) / t;
        a.clamp(self.c / t + OPEN_BOUND_EPS, 1.0)
    }

    fn bandwidth(&self, alpha: f64, t: f64) -> f64 {
        if self.s == 0.0 {
            0.0
        } else if self.c == 0.0 {
            self.s / t
        } else {
            self.s / (t - self.c / alpha)
        }
    }
}

pub fn solve_p2(problem: &ActiveProblem) -> AllocationResult {
    if !feasibility(problem) {
        return AllocationResult::Infeasible;
    }
    let t = problem.deadline;
    let terms: Vec<NodeTerm> = problem
        .grouped()
        .into_iter()
        .map(|(n, s)| NodeTerm {
            node: n.node,
            c: n.c_node,
            s,
            w: problem.weight(n),
        })
        .collect();
    let omega = problem.omega;
    let usage = |lambda: f64| -> f64 {
        terms
            .iter()
            .map(|term| term.bandwidth(term.alpha(omega + lambda, t), t))
            .sum()
    };

    let lambda = if usage(0.0) <= 1.0 {
        0.0
    } else {
        let mut hi = 1.0;
        let mut doublings = 0;
        while usage(hi) > 1.0 && doublings < 2000 {
            hi *= 2.0;
            doublings += 1;
        }
        if usage(hi) > 1.0 {
            f64::INFINITY
        } else {
            let mut lo = 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if usage(mid) > 1.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-14 * hi {
                    break;
                }
            }
            hi
        }
    };

    let alpha: BTreeMap<usize, f64> = terms
        .iter()
        .map(|term| {
            let a = if lambda.is_infinite() {
                if term.c > 0.0 && term.s > 0.0 {
                    1.0
                } else {
                    term.alpha(omega, t)
                }
            } else {
                term.alpha(omega + lambda, t)
            };
            (term.node, a)
        })
        .collect();
    AllocationResult::Feasible(problem.allocation_from_alpha(&alpha))
}

/// Grid search over the compute fraction of every node with incoming links
/// (`grid_steps` points in `(C_node/T, 1]`, always including 1), with tight
/// bandwidth per link, followed by a few zoom-in rounds around the best feasible
/// point. Local-only nodes sit at `alpha = C_node / T`. Intended for checking
/// [`solve_p2`] on small problems.
pub fn brute_force_oracle(problem: &ActiveProblem, grid_steps: usize) -> AllocationResult {
    const MAX_POINTS_PER_ROUND: f64 = 1e5;
    const ZOOM_ROUNDS: usize = 12;

    let t = problem.deadline;
    let grouped = problem.grouped();
    for (node, s) in &grouped {
        if node.c_node > t || (*s > 0.0 && node.c_node >= t) {
            return AllocationResult::Infeasible;
        }
    }
    let free: Vec<(usize, f64, f64)> = grouped
        .iter()
        .filter(|(n, s)| *s > 0.0 && n.c_node > 0.0)
        .map(|(n, s)| (n.node, n.c_node, *s))
        .collect();
    let mut alpha: BTreeMap<usize, f64> = grouped
        .iter()
        .map(|(n, _)| (n.node, if n.c_node > 0.0 { n.c_node / t } else { 0.0 }))
        .collect();

    let dims = free.len();
    let eval = |point: &[f64], alpha: &mut BTreeMap<usize, f64>| -> Option<f64> {
        for (&a, (node, _, _)) in point.iter().zip(&free) {
            alpha.insert(*node, a);
        }
        let alloc = problem.allocation_from_alpha(alpha);
        (alloc.bandwidth_fraction <= 1.0 && alloc.beta.values().all(|b| *b > 0.0))
            .then_some(alloc.cost)
    };

    let steps = if dims == 0 {
        1
    } else {
        (grid_steps.max(2) as f64)
            .min(MAX_POINTS_PER_ROUND.powf(1.0 / dims as f64).floor())
            .max(2.0) as usize
    };
    // per dimension: current window (lo exclusive unless zoomed, hi inclusive)
    let mut windows: Vec<(f64, f64)> = free.iter().map(|(_, c, _)| (c / t, 1.0)).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let rounds = if dims == 0 { 1 } else { ZOOM_ROUNDS };
    let mut idx = vec![0usize; dims];
    for _ in 0..rounds {
        let axes: Vec<Vec<f64>> = windows
            .iter()
            .map(|&(lo, hi)| {
                (1..=steps)
                    .map(|i| lo + (hi - lo) * i as f64 / steps as f64)
                    .collect()
            })
            .collect();
        idx.iter_mut().for_each(|i| *i = 0);
        loop {
            let point: Vec<f64> = idx.iter().zip(&axes).map(|(&i, ax)| ax[i]).collect();
            if let Some(c) = eval(&point, &mut alpha) {
                if best.as_ref().is_none_or(|(bc, _)| c < *bc) {
                    best = Some((c, point));
                }
            }
            // odometer increment
            let mut d = 0;
            loop {
                if d == dims {
                    break;
                }
                idx[d] += 1;
                if idx[d] < steps {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == dims {
                break;
            }
        }
        let Some((_, ref centre)) = best else {
            break;
        };
        windows = windows
            .iter()
            .zip(centre)
            .zip(&free)
            .map(|((&(lo, hi), &c), (_, cn, _))| {
                let h = (hi - lo) / steps as f64;
                let floor = cn / t;
                ((c - 2.0 * h).max(floor), (c + 2.0 * h).min(1.0))
            })
            .collect();
    }
    match best {
        Some((_, point)) => {
            for (&a, (node, _, _)) in point.iter().zip(&free) {
                alpha.insert(*node, a);
            }
            AllocationResult::Feasible(problem.allocation_from_alpha(&alpha))
        }
        None => AllocationResult::Infeasible,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const F_CAV: f64 = 1e10;
    const F_TOTAL: f64 = 2.4e11;

    fn single_link(c_link: f64, c_node: f64) -> ActiveProblem {
        ActiveProblem {
            links: vec![ActiveLink {
                from: 0,
                to: 1,
                c_link,
            }],
            nodes: vec![ComputeNode {
                node: 1,
                c_node,
                capacity: F_CAV,
            }],
            omega: 0.5,
            deadline: 0.02,
            total_capacity: F_TOTAL,
        }
    }

    #[test]
    fn hand_computed_single_link() {
        let p = single_link(5e-3, 4e-3);
        let a = solve_p2(&p).into_allocation().unwrap();
        assert!((a.alpha[&1] - 1.0).abs() < 1e-12);
        assert!((a.beta[&(0, 1)] - 0.3125).abs() < 1e-12);
        assert!((a.cost - 0.177083333).abs() < 1e-8, "{}", a.cost);
    }

    #[test]
    fn local_only_node() {
        let p = ActiveProblem {
            links: vec![],
            nodes: vec![ComputeNode {
                node: 0,
                c_node: 0.01,
                capacity: F_CAV,
            }],
            omega: 0.5,
            deadline: 0.02,
            total_capacity: F_TOTAL,
        };
        let a = solve_p2(&p).into_allocation().unwrap();
        assert!((a.alpha[&0] - 0.5).abs() < 1e-12);
        assert!(a.beta.is_empty());
        assert!((a.cost - 0.5 * 0.5 * F_CAV / F_TOTAL).abs() < 1e-12);
    }

    #[test]
    fn empty_problem_costs_nothing() {
        let p = ActiveProblem {
            links: vec![],
            nodes: vec![],
            omega: 0.5,
            deadline: 0.02,
            total_capacity: F_TOTAL,
        };
        assert!(feasibility(&p));
        assert_eq!(solve_p2(&p).cost(), Some(0.0));
        assert_eq!(brute_force_oracle(&p, 10).cost(), Some(0.0));
    }

    #[test]
    fn feasibility_examples() {
        let mut p = single_link(5e-3, 25e-3);
        assert!(!feasibility(&p));
        p.links.clear();
        assert!(!feasibility(&p));

        assert!(feasibility(&single_link(5e-3, 4e-3)));

        let two = ActiveProblem {
            links: vec![
                ActiveLink { from: 0, to: 2, c_link: 0.01 },
                ActiveLink { from: 1, to: 2, c_link: 0.01 },
            ],
            nodes: vec![ComputeNode { node: 2, c_node: 0.01, capacity: F_CAV }],
            omega: 0.5,
            deadline: 0.02,
            total_capacity: F_TOTAL,
        };
        assert!(!feasibility(&two));
        assert!(!solve_p2(&two).tau());
        assert!(!brute_force_oracle(&two, 50).tau());
    }

    #[test]
    fn oracle_matches_single_link() {
        let p = single_link(5e-3, 4e-3);
        let exact = solve_p2(&p).cost().unwrap();
        let grid = brute_force_oracle(&p, 2000).cost().unwrap();
        assert!((exact - grid).abs() < 1e-4);
        assert!(grid >= exact - 1e-12);
    }

    #[test]
    fn interior_optimum_is_stationary() {
        // small link, heavy node: optimum strictly inside (c/T, 1)
        let p = single_link(1e-4, 5e-3);
        let a = solve_p2(&p).into_allocation().unwrap();
        let alpha = a.alpha[&1];
        assert!(alpha > 0.25 && alpha < 1.0);
        let grid = brute_force_oracle(&p, 2000).cost().unwrap();
        assert!(a.cost <= grid + 1e-12);
        assert!((a.cost - grid).abs() < 1e-6);
    }

    #[test]
    fn separable_links_add_up() {
        let a = single_link(2e-3, 6e-3);
        let mut b = single_link(3e-3, 3e-3);
        b.links[0].from = 2;
        b.links[0].to = 3;
        b.nodes[0].node = 3;
        let mut both = a.clone();
        both.links.extend(b.links.clone());
        both.nodes.extend(b.nodes.clone());
        let sum = brute_force_oracle(&a, 2000).cost().unwrap() + brute_force_oracle(&b, 2000).cost().unwrap();
        let joint = brute_force_oracle(&both, 2000).cost().unwrap();
        assert!((sum - joint).abs() < 1e-5, "{sum} vs {joint}");
    }
}
