//! Baseline schemes and the proposed scheme, evaluated side by side.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::context::{TaskContext, Verdict};
use crate::error::{Error, Result};
use crate::ga::{
    exhaustive_solve, GaConfig, Gene, GeneSpace, GeneticSearch,
    PlacementRule, EXHAUSTIVE_LIMIT,
};
use crate::netmodel::{validate_topology, Assignment};
use crate::resalloc::Allocation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    All,
    Unified,
    Nearest,
    Centralized,
    Proposed,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::All,
        Scheme::Unified,
        Scheme::Nearest,
        Scheme::Centralized,
        Scheme::Proposed,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::All => "all",
            Scheme::Unified => "unified",
            Scheme::Nearest => "nearest",
            Scheme::Centralized => "centralized",
            Scheme::Proposed => "proposed",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::param("scheme", format!("unknown scheme `{s}`")))
    }
}

/// How centralized and proposed search the selection/placement space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    /// Exhaustive when the space has at most `EXHAUSTIVE_LIMIT` tuples, else genetic.
    #[default]
    Auto,
    Genetic,
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub scheme: Scheme,
    /// Absent when the scheme found no candidate at all.
    pub assignment: Option<Assignment>,
    pub allocation: Option<Allocation>,
    pub feasible: bool,
    /// Every subtask meets the accuracy requirement per the estimator.
    pub accuracy_met: bool,
    pub accuracy_est: Vec<f64>,
    pub accuracy_oracle: Option<Vec<f64>>,
    /// Elite cost per generation when a genetic search ran.
    pub history: Option<Vec<f64>>,
    pub note: Option<String>,
    /// Wall-clock time spent on this scheme.
    pub elapsed_ms: f64,
}

impl SchemeResult {
    pub fn cost(&self) -> Option<f64> {
        self.allocation.as_ref().filter(|_| self.feasible).map(|a| a.cost)
    }

    fn infeasible(scheme: Scheme, note: impl Into<String>) -> Self {
        Self {
            scheme,
            assignment: None,
            allocation: None,
            feasible: false,
            accuracy_met: false,
            accuracy_est: Vec::new(),
            accuracy_oracle: None,
            history: None,
            note: Some(note.into()),
            elapsed_ms: 0.0,
        }
    }

    fn from_assignment(ctx: &TaskContext, scheme: Scheme, assignment: Assignment) -> Self {
        let accuracy_est: Vec<f64> = (0..ctx.n_objects())
            .map(|m| ctx.estimated_accuracy(m, assignment.selection_mask(m)))
            .collect();
        let accuracy_oracle: Option<Vec<f64>> = (0..ctx.n_objects())
            .map(|m| ctx.oracle_accuracy(m, assignment.selection_mask(m)))
            .collect();
        let accuracy_met = ctx.accuracy_ok(&assignment);
        let topology_ok = validate_topology(&assignment).is_empty();
        let allocation = if topology_ok {
            ctx.allocate(&assignment).into_allocation()
        } else {
            None
        };
        let enforce = scheme != Scheme::Nearest;
        let feasible = allocation.is_some() && (accuracy_met || !enforce);
        let note = if !topology_ok {
            Some("half-duplex violation".to_string())
        } else if allocation.is_none() {
            Some("delay bound cannot be met".to_string())
        } else if !accuracy_met {
            Some("accuracy requirement not met".to_string())
        } else {
            None
        };
        Self {
            scheme,
            assignment: Some(assignment),
            allocation,
            feasible,
            accuracy_met,
            accuracy_est,
            accuracy_oracle,
            history: None,
            note,
            elapsed_ms: 0.0,
        }
    }

    /// Genes of the stored assignment, for warm-starting a search.
    pub fn genes(&self) -> Option<Vec<Gene>> {
        let a = self.assignment.as_ref()?;
        (0..a.n_objects())
            .map(|m| {
                Some(Gene {
                    mask: a.selection_mask(m),
                    node: a.node_of(m)?,
                })
            })
            .collect()
    }
}

/// Every non-empty view of every object, all processed at the RSU.
pub fn scheme_all(ctx: &TaskContext) -> SchemeResult {
    let masks: Vec<u32> = (0..ctx.n_objects()).map(|m| ctx.visible(m)).collect();
    let nodes = vec![ctx.rsu(); masks.len()];
    SchemeResult::from_assignment(ctx, Scheme::All, Assignment::from_masks(ctx.n_cavs(), &masks, &nodes))
}

/// The cheapest vehicle subset whose full data satisfies every subtask at the RSU.
pub fn scheme_unified(ctx: &TaskContext) -> SchemeResult {
    let n = ctx.n_cavs();
    let mut best: Option<(f64, Assignment)> = None;
    for subset in 1..(1u32 << n) {
        let masks: Vec<u32> = (0..ctx.n_objects()).map(|m| ctx.visible(m) & subset).collect();
        let a = Assignment::from_masks(n, &masks, &vec![ctx.rsu(); masks.len()]);
        if let Verdict::Feasible(alloc) = ctx.evaluate(&a) {
            if best.as_ref().is_none_or(|(c, _)| alloc.cost < *c) {
                best = Some((alloc.cost, a));
            }
        }
    }
    match best {
        Some((_, a)) => SchemeResult::from_assignment(ctx, Scheme::Unified, a),
        None => SchemeResult::infeasible(Scheme::Unified, "no vehicle subset is feasible"),
    }
}

/// Each object's nearest vehicle supplies its data and processes it locally
/// while its cumulative demand fits within the deadline; the rest go to the
/// RSU. Accuracy is reported, not enforced.
pub fn scheme_nearest(ctx: &TaskContext) -> SchemeResult {
    let n = ctx.n_cavs();
    let p = &ctx.params;
    let mut local_cycles = vec![0.0; n];
    let mut masks = Vec::new();
    let mut nodes = Vec::new();
    for m in 0..ctx.n_objects() {
        let cav = ctx.nearest_cav(m);
        let cycles = p.epsilon * ctx.point_counts()[cav][m] as f64;
        masks.push(1u32 << cav);
        if local_cycles[cav] + cycles <= p.f_cav * p.deadline {
            local_cycles[cav] += cycles;
            nodes.push(cav);
        } else {
            nodes.push(ctx.rsu());
        }
    }
    SchemeResult::from_assignment(ctx, Scheme::Nearest, Assignment::from_masks(n, &masks, &nodes))
}

/// Per object, the smallest single view meeting the requirement, processed by
/// the vehicle that holds it while its compute budget lasts, otherwise the
/// greedy best-accuracy selection at the RSU. A cheap starting point for the
/// searched schemes.
pub fn local_heuristic(ctx: &TaskContext) -> Vec<Gene> {
    let p = &ctx.params;
    let mut local_cycles = vec![0.0; ctx.n_cavs()];
    (0..ctx.n_objects())
        .map(|m| {
            let vis = ctx.visible(m);
            let viewers: Vec<usize> = (0..ctx.n_cavs()).filter(|&n| vis & (1 << n) != 0).collect();
            let single = viewers
                .iter()
                .copied()
                .filter(|&n| ctx.estimated_accuracy(m, 1 << n) >= p.accuracy_req)
                .min_by_key(|&n| (ctx.point_counts()[n][m], n));
            if let Some(n) = single {
                let cycles = p.epsilon * ctx.point_counts()[n][m] as f64;
                if local_cycles[n] + cycles <= p.f_cav * p.deadline {
                    local_cycles[n] += cycles;
                    return Gene { mask: 1 << n, node: n };
                }
                return Gene { mask: 1 << n, node: ctx.rsu() };
            }
            let mut mask = 0u32;
            while mask != vis && ctx.estimated_accuracy(m, mask) < p.accuracy_req {
                let next = viewers
                    .iter()
                    .copied()
                    .filter(|&n| mask & (1 << n) == 0)
                    .max_by(|&a, &b| {
                        ctx.estimated_accuracy(m, mask | 1 << a)
                            .total_cmp(&ctx.estimated_accuracy(m, mask | 1 << b))
                            .then(b.cmp(&a))
                    })
                    .expect("an unselected viewer remains");
                mask |= 1 << next;
            }
            Gene { mask, node: ctx.rsu() }
        })
        .collect()
}

fn rehomed(genes: &[Gene], node: usize) -> Vec<Gene> {
    genes.iter().map(|g| Gene { mask: g.mask, node }).collect()
}

fn searched(
    ctx: &TaskContext,
    scheme: Scheme,
    rule: PlacementRule,
    ga: &GaConfig,
    mode: SearchMode,
    seeds: Vec<Vec<Gene>>,
) -> Result<SchemeResult> {
    let space = GeneSpace::new(ctx, rule)?;
    let exhaustive = match mode {
        SearchMode::Auto => space.size() <= EXHAUSTIVE_LIMIT,
        SearchMode::Genetic => false,
        SearchMode::Exhaustive => true,
    };
    if exhaustive {
        return Ok(match exhaustive_solve(ctx, rule)? {
            Some(out) => SchemeResult::from_assignment(ctx, scheme, out.assignment),
            None => SchemeResult::infeasible(scheme, "no feasible selection and placement"),
        });
    }
    let search = GeneticSearch::new(ctx, ga.clone(), rule)?.with_seeds(seeds);
    match search.run() {
        Ok(out) => {
            let mut r = SchemeResult::from_assignment(ctx, scheme, out.assignment);
            r.history = Some(out.history);
            Ok(r)
        }
        Err(e @ Error::InitExhausted { .. }) => Ok(SchemeResult::infeasible(scheme, e.to_string())),
        Err(e) => Err(e),
    }
}

/// Optimized selection with every subtask at the RSU.
pub fn scheme_centralized(
    ctx: &TaskContext,
    ga: &GaConfig,
    mode: SearchMode,
    seeds: Vec<Vec<Gene>>,
) -> Result<SchemeResult> {
    searched(ctx, Scheme::Centralized, PlacementRule::Fixed(ctx.rsu()), ga, mode, seeds)
}

/// Optimized selection and placement.
pub fn scheme_proposed(
    ctx: &TaskContext,
    ga: &GaConfig,
    mode: SearchMode,
    seeds: Vec<Vec<Gene>>,
) -> Result<SchemeResult> {
    searched(ctx, Scheme::Proposed, PlacementRule::Free, ga, mode, seeds)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub ga: GaConfig,
    pub mode: SearchMode,
    /// Seed the searched schemes with the solutions of the more restricted
    /// ones (unified into centralized, both into proposed) and with
    /// [`local_heuristic`].
    pub warm_start: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            ga: GaConfig::default(),
            mode: SearchMode::Auto,
            warm_start: true,
        }
    }
}

/// Runs the requested schemes on one task, in the canonical scheme order.
pub fn compare_schemes(
    ctx: &TaskContext,
    schemes: &[Scheme],
    cfg: &BenchConfig,
) -> Result<Vec<SchemeResult>> {
    let wants = |s| schemes.contains(&s);
    let all = wants(Scheme::All).then(|| timed(|| Ok(scheme_all(ctx)))).transpose()?;
    let nearest = wants(Scheme::Nearest)
        .then(|| timed(|| Ok(scheme_nearest(ctx))))
        .transpose()?;
    let need_unified = wants(Scheme::Unified)
        || (cfg.warm_start && (wants(Scheme::Centralized) || wants(Scheme::Proposed)));
    let unified = need_unified
        .then(|| timed(|| Ok(scheme_unified(ctx))))
        .transpose()?;
    let seed_of = |r: &Option<SchemeResult>| {
        r.as_ref()
            .filter(|r| cfg.warm_start && r.feasible)
            .and_then(SchemeResult::genes)
    };
    let need_centralized =
        wants(Scheme::Centralized) || (cfg.warm_start && wants(Scheme::Proposed));
    let centralized = need_centralized
        .then(|| {
            let mut seeds: Vec<Vec<Gene>> = seed_of(&unified).into_iter().collect();
            if cfg.warm_start {
                seeds.push(rehomed(&local_heuristic(ctx), ctx.rsu()));
            }
            timed(|| scheme_centralized(ctx, &cfg.ga, cfg.mode, seeds))
        })
        .transpose()?;
    let proposed = wants(Scheme::Proposed)
        .then(|| {
            let mut seeds: Vec<Vec<Gene>> =
                seed_of(&centralized).into_iter().chain(seed_of(&unified)).collect();
            if cfg.warm_start {
                seeds.push(local_heuristic(ctx));
            }
            timed(|| scheme_proposed(ctx, &cfg.ga, cfg.mode, seeds))
        })
        .transpose()?;
    let mut out = Vec::new();
    for (scheme, r) in [
        (Scheme::All, all),
        (Scheme::Unified, unified),
        (Scheme::Nearest, nearest),
        (Scheme::Centralized, centralized),
        (Scheme::Proposed, proposed),
    ] {
        if wants(scheme) {
            out.push(r.expect("computed when requested"));
        }
    }
    Ok(out)
}

fn timed(f: impl FnOnce() -> Result<SchemeResult>) -> Result<SchemeResult> {
    let start = Instant::now();
    let mut r = f()?;
    r.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(r)
}

/// Outcome of checking `proposed <= centralized <= unified <= all`.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainVerdict {
    Holds,
    /// Some scheme in the chain is infeasible or was not run.
    NotApplicable,
    Violated(String),
}

pub fn dominance_chain(results: &[SchemeResult]) -> ChainVerdict {
    let chain = [Scheme::Proposed, Scheme::Centralized, Scheme::Unified, Scheme::All];
    let costs: Option<Vec<f64>> = chain
        .iter()
        .map(|s| results.iter().find(|r| r.scheme == *s).and_then(SchemeResult::cost))
        .collect();
    let Some(costs) = costs else {
        return ChainVerdict::NotApplicable;
    };
    for i in 0..3 {
        if costs[i] > costs[i + 1] + 1e-12 {
            return ChainVerdict::Violated(format!(
                "{} {} > {} {}",
                chain[i],
                costs[i],
                chain[i + 1],
                costs[i + 1]
            ));
        }
    }
    ChainVerdict::Holds
}
