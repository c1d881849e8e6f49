//! Genetic search over data selection and subtask placement, with the inner
//! allocation problem solved for every candidate, plus exhaustive enumeration
//! for small instances.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::context::{TaskContext, Verdict};
use crate::error::{Error, Result};
use crate::netmodel::{validate_topology, Assignment, TopologyViolation};
use crate::resalloc::Allocation;

/// Largest gene-tuple space `exhaustive_solve` will enumerate.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

/// Selection bitmask over vehicles and the node running the subtask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Gene {
    pub mask: u32,
    pub node: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Individual {
    pub genes: Vec<Gene>,
    pub cost: f64,
}

impl Individual {
    pub fn assignment(&self, n_cavs: usize) -> Assignment {
        genes_to_assignment(n_cavs, &self.genes)
    }
}

pub fn genes_to_assignment(n_cavs: usize, genes: &[Gene]) -> Assignment {
    let masks: Vec<u32> = genes.iter().map(|g| g.mask).collect();
    let nodes: Vec<usize> = genes.iter().map(|g| g.node).collect();
    Assignment::from_masks(n_cavs, &masks, &nodes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    #[serde(rename = "J")]
    pub population: usize,
    #[serde(rename = "Gamma")]
    pub generations: usize,
    #[serde(rename = "p_C")]
    pub p_crossover: f64,
    #[serde(rename = "p_M")]
    pub p_mutation: f64,
    pub seed: u64,
    pub max_init_attempts: usize,
    /// Draw separate numbers for the crossover and mutation decisions.
    pub two_draw: bool,
    /// Evaluate candidates on the rayon pool. Results do not depend on it.
    pub parallel: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 30,
            generations: 50,
            p_crossover: 0.9,
            p_mutation: 0.1,
            seed: 1,
            max_init_attempts: 10_000,
            two_draw: false,
            parallel: true,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::PopulationTooSmall(self.population));
        }
        if self.generations < 1 {
            return Err(Error::param("Gamma", "must be at least 1"));
        }
        for (name, p) in [("p_C", self.p_crossover), ("p_M", self.p_mutation)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(name, "must lie in [0, 1]"));
            }
        }
        if self.max_init_attempts == 0 {
            return Err(Error::param("max_init_attempts", "must be at least 1"));
        }
        Ok(())
    }
}

/// Which nodes a subtask may be placed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlacementRule {
    #[default]
    Free,
    Fixed(usize),
}

/// Valid genes per subtask: selections among vehicles that see the object,
/// and the allowed nodes.
#[derive(Debug, Clone)]
pub struct GeneSpace {
    masks: Vec<Vec<u32>>,
    nodes: Vec<usize>,
}

impl GeneSpace {
    pub fn new(ctx: &TaskContext, rule: PlacementRule) -> Result<Self> {
        let n_cavs = ctx.n_cavs();
        let nodes = match rule {
            PlacementRule::Free => (0..=n_cavs).collect(),
            PlacementRule::Fixed(n) if n <= n_cavs => vec![n],
            PlacementRule::Fixed(n) => {
                return Err(Error::param("placement", format!("node {n} does not exist")))
            }
        };
        let masks = (0..ctx.n_objects())
            .map(|m| {
                let vis = ctx.visible(m);
                if vis == 0 {
                    // nobody sees it: the only choice is the empty selection
                    return vec![0];
                }
                (1..=vis).filter(|s| s & !vis == 0).collect()
            })
            .collect();
        Ok(Self { masks, nodes })
    }

    pub fn n_objects(&self) -> usize {
        self.masks.len()
    }

    pub fn masks(&self, m: usize) -> &[u32] {
        &self.masks[m]
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn contains(&self, m: usize, gene: Gene) -> bool {
        self.masks[m].contains(&gene.mask) && self.nodes.contains(&gene.node)
    }

    /// Number of gene tuples.
    pub fn size(&self) -> u128 {
        self.masks
            .iter()
            .map(|ms| (ms.len() * self.nodes.len()) as u128)
            .try_fold(1u128, |acc, k| acc.checked_mul(k))
            .unwrap_or(u128::MAX)
    }

    /// Uniform draw over all valid genes of subtask `m`.
    pub fn random_gene(&self, m: usize, rng: &mut impl Rng) -> Gene {
        let ms = &self.masks[m];
        Gene {
            mask: ms[rng.gen_range(0..ms.len())],
            node: self.nodes[rng.gen_range(0..self.nodes.len())],
        }
    }

    fn tuple(&self, mut index: u128) -> Vec<Gene> {
        let k = self.nodes.len() as u128;
        self.masks
            .iter()
            .map(|ms| {
                let radix = ms.len() as u128 * k;
                let digit = index % radix;
                index /= radix;
                Gene {
                    mask: ms[(digit / k) as usize],
                    node: self.nodes[(digit % k) as usize],
                }
            })
            .collect()
    }
}

/// `p_j = (1 - o_j / sum(o)) / (J - 1)`, uniform when every cost is zero.
pub fn selection_probabilities(costs: &[f64]) -> Result<Vec<f64>> {
    let j = costs.len();
    if j < 2 {
        return Err(Error::PopulationTooSmall(j));
    }
    let total: f64 = costs.iter().sum();
    if total <= 0.0 {
        return Ok(vec![1.0 / j as f64; j]);
    }
    Ok(costs
        .iter()
        .map(|o| (1.0 - o / total) / (j - 1) as f64)
        .collect())
}

/// Two independent parent draws, as population indices.
pub fn select_parents(costs: &[f64], rng: &mut impl Rng) -> Result<(usize, usize)> {
    let p = selection_probabilities(costs)?;
    let dist = match WeightedIndex::new(&p) {
        Ok(d) => d,
        // a single individual carries all the cost mass and J = 2
        Err(_) => WeightedIndex::new(vec![1.0; costs.len()]).expect("non-empty"),
    };
    Ok((dist.sample(rng), dist.sample(rng)))
}

/// Genes `0..cut` from `v1`, the rest from `v2`.
pub fn crossover(v1: &[Gene], v2: &[Gene], cut: usize) -> Vec<Gene> {
    v1[..cut].iter().chain(&v2[cut..]).copied().collect()
}

pub fn mutate(v: &[Gene], position: usize, gene: Gene) -> Vec<Gene> {
    let mut out = v.to_vec();
    out[position] = gene;
    out
}

/// Why initialization attempts were rejected.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RejectionCounts {
    pub accuracy: usize,
    pub topology: usize,
    pub delay: usize,
}

impl RejectionCounts {
    fn dominant(&self) -> &'static str {
        if self.accuracy >= self.topology && self.accuracy >= self.delay {
            "accuracy"
        } else if self.topology >= self.delay {
            "topology"
        } else {
            "delay"
        }
    }
}

#[derive(Debug, Clone)]
pub struct GaOutcome {
    pub best: Individual,
    pub assignment: Assignment,
    pub allocation: Allocation,
    /// Elite cost of the initial population followed by one entry per generation.
    pub history: Vec<f64>,
}

/// A configured search over one task.
pub struct GeneticSearch<'a> {
    ctx: &'a TaskContext,
    cfg: GaConfig,
    space: GeneSpace,
    seeds: Vec<Vec<Gene>>,
    cache: Mutex<HashMap<Vec<Gene>, Option<f64>>>,
}

impl<'a> GeneticSearch<'a> {
    pub fn new(ctx: &'a TaskContext, cfg: GaConfig, rule: PlacementRule) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            ctx,
            space: GeneSpace::new(ctx, rule)?,
            cfg,
            seeds: Vec::new(),
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Individuals placed into the initial population ahead of random ones.
    /// Seeds outside the gene space or infeasible are skipped.
    pub fn with_seeds(mut self, seeds: Vec<Vec<Gene>>) -> Self {
        self.seeds = seeds;
        self
    }

    pub fn space(&self) -> &GeneSpace {
        &self.space
    }

    fn verdict(&self, genes: &[Gene]) -> Verdict {
        self.ctx
            .evaluate(&genes_to_assignment(self.ctx.n_cavs(), genes))
    }

    /// Optimal inner cost, or `None` if any constraint fails. Memoized.
    pub fn cost(&self, genes: &[Gene]) -> Option<f64> {
        if let Some(c) = self.cache.lock().expect("cache lock").get(genes) {
            return *c;
        }
        let c = self.verdict(genes).cost();
        self.cache
            .lock()
            .expect("cache lock")
            .insert(genes.to_vec(), c);
        c
    }

    fn costs(&self, candidates: &[Vec<Gene>]) -> Vec<Option<f64>> {
        if self.cfg.parallel {
            candidates.par_iter().map(|g| self.cost(g)).collect()
        } else {
            candidates.iter().map(|g| self.cost(g)).collect()
        }
    }

    /// Random selection repaired greedily towards the accuracy requirement,
    /// then placements drawn among nodes that keep the half-duplex rule.
    fn random_candidate(&self, rng: &mut ChaCha8Rng) -> Option<Vec<Gene>> {
        let ctx = self.ctx;
        let m_count = self.space.n_objects();
        let mut masks = Vec::with_capacity(m_count);
        for m in 0..m_count {
            // start from one random viewer and add views until accurate enough
            let vis = ctx.visible(m);
            let viewers: Vec<usize> = (0..ctx.n_cavs()).filter(|&n| vis & (1 << n) != 0).collect();
            let mut mask = if viewers.is_empty() {
                0
            } else {
                1 << viewers[rng.gen_range(0..viewers.len())]
            };
            while ctx.estimated_accuracy(m, mask) < ctx.params.accuracy_req && mask != vis {
                let best = (0..ctx.n_cavs())
                    .filter(|&n| vis & !mask & (1 << n) != 0)
                    .max_by(|&a, &b| {
                        ctx.estimated_accuracy(m, mask | 1 << a)
                            .total_cmp(&ctx.estimated_accuracy(m, mask | 1 << b))
                            .then(b.cmp(&a))
                    })
                    .expect("an unselected visible vehicle remains");
                mask |= 1 << best;
            }
            masks.push(mask);
        }
        let mut order: Vec<usize> = (0..m_count).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), rng);
        let mut genes: Vec<Option<Gene>> = vec![None; m_count];
        for m in order {
            let options: Vec<usize> = self
                .space
                .nodes()
                .iter()
                .copied()
                .filter(|&node| {
                    let mut trial = genes.clone();
                    trial[m] = Some(Gene { mask: masks[m], node });
                    half_duplex_ok(ctx.n_cavs(), &trial)
                })
                .collect();
            if options.is_empty() {
                return None;
            }
            genes[m] = Some(Gene {
                mask: masks[m],
                node: options[rng.gen_range(0..options.len())],
            });
        }
        genes.into_iter().collect()
    }

    pub fn init_population(&self, rng: &mut ChaCha8Rng) -> Result<Vec<Individual>> {
        let j = self.cfg.population;
        let mut pop = Vec::with_capacity(j);
        for seed in &self.seeds {
            if pop.len() == j {
                break;
            }
            let in_space = seed.len() == self.space.n_objects()
                && seed.iter().enumerate().all(|(m, g)| self.space.contains(m, *g));
            if let (true, Some(cost)) = (in_space, in_space.then(|| self.cost(seed)).flatten()) {
                pop.push(Individual { genes: seed.clone(), cost });
            }
        }
        let mut rejected = RejectionCounts::default();
        let mut attempts = 0;
        while pop.len() < j {
            if attempts == self.cfg.max_init_attempts {
                return Err(Error::InitExhausted {
                    attempts,
                    accuracy: rejected.accuracy,
                    topology: rejected.topology,
                    delay: rejected.delay,
                    dominant: rejected.dominant(),
                });
            }
            attempts += 1;
            let Some(genes) = self.random_candidate(rng) else {
                rejected.topology += 1;
                continue;
            };
            match self.verdict(&genes) {
                Verdict::Feasible(a) => {
                    self.cache
                        .lock()
                        .expect("cache lock")
                        .insert(genes.clone(), Some(a.cost));
                    pop.push(Individual { genes, cost: a.cost });
                }
                Verdict::Accuracy => rejected.accuracy += 1,
                Verdict::Topology => rejected.topology += 1,
                Verdict::Delay => rejected.delay += 1,
            }
        }
        Ok(pop)
    }

    /// One reproduction round. Slot 0 keeps the elite; every other slot gets
    /// a feasible offspring or, failing that, its first parent.
    pub fn evolve_generation(
        &self,
        population: &[Individual],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<Individual>> {
        let costs: Vec<f64> = population.iter().map(|i| i.cost).collect();
        let m_count = self.space.n_objects();
        let mut plans = Vec::with_capacity(population.len() - 1);
        for _ in 1..population.len() {
            let (a, b) = select_parents(&costs, rng)?;
            let xi: f64 = rng.gen();
            let xi_m = if self.cfg.two_draw { rng.gen() } else { xi };
            let v1 = &population[a].genes;
            let mut child = v1.clone();
            if xi <= self.cfg.p_crossover {
                child = crossover(v1, &population[b].genes, rng.gen_range(0..=m_count));
            }
            if xi_m <= self.cfg.p_mutation {
                let pos = rng.gen_range(0..m_count);
                child = mutate(&child, pos, self.space.random_gene(pos, rng));
            }
            plans.push((a, child));
        }
        let candidates: Vec<Vec<Gene>> = plans.iter().map(|(_, c)| c.clone()).collect();
        let evaluated = self.costs(&candidates);
        let mut next = vec![elite(population).clone()];
        for ((a, child), cost) in plans.into_iter().zip(evaluated) {
            next.push(match cost {
                Some(cost) => Individual { genes: child, cost },
                None => population[a].clone(),
            });
        }
        Ok(next)
    }

    pub fn run(&self) -> Result<GaOutcome> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let mut pop = self.init_population(&mut rng)?;
        let mut history = vec![elite(&pop).cost];
        for _ in 0..self.cfg.generations {
            pop = self.evolve_generation(&pop, &mut rng)?;
            history.push(elite(&pop).cost);
        }
        let best = elite(&pop).clone();
        let assignment = best.assignment(self.ctx.n_cavs());
        let allocation = match self.ctx.evaluate(&assignment) {
            Verdict::Feasible(a) => a,
            _ => unreachable!("population members are feasible"),
        };
        Ok(GaOutcome {
            best,
            assignment,
            allocation,
            history,
        })
    }
}

/// Lowest cost, earliest index on ties.
pub fn elite(population: &[Individual]) -> &Individual {
    population
        .iter()
        .reduce(|best, i| if i.cost < best.cost { i } else { best })
        .expect("non-empty population")
}

fn half_duplex_ok(n_cavs: usize, genes: &[Option<Gene>]) -> bool {
    let placed: Vec<Gene> = genes.iter().flatten().copied().collect();
    let a = genes_to_assignment(n_cavs, &placed);
    !validate_topology(&a)
        .iter()
        .any(|v| matches!(v, TopologyViolation::HalfDuplex { .. }))
}

/// Runs the search with free placement.
pub fn run(ctx: &TaskContext, cfg: &GaConfig) -> Result<GaOutcome> {
    GeneticSearch::new(ctx, cfg.clone(), PlacementRule::Free)?.run()
}

#[derive(Debug, Clone)]
pub struct ExhaustiveOutcome {
    pub best: Individual,
    pub assignment: Assignment,
    pub allocation: Allocation,
    pub enumerated: u128,
}

/// Enumerates every gene tuple. `Ok(None)` means no tuple is feasible.
pub fn exhaustive_solve(ctx: &TaskContext, rule: PlacementRule) -> Result<Option<ExhaustiveOutcome>> {
    let space = GeneSpace::new(ctx, rule)?;
    let total = space.size();
    if total > EXHAUSTIVE_LIMIT {
        return Err(Error::SearchSpaceTooLarge(total));
    }
    let best = (0..total as u64)
        .into_par_iter()
        .filter_map(|i| {
            let genes = space.tuple(i as u128);
            let a = ctx.evaluate(&genes_to_assignment(ctx.n_cavs(), &genes));
            a.cost().map(|c| (c, i, genes))
        })
        .reduce_with(|x, y| if (y.0, y.1) < (x.0, x.1) { y } else { x });
    Ok(best.map(|(cost, _, genes)| {
        let assignment = genes_to_assignment(ctx.n_cavs(), &genes);
        let allocation = match ctx.evaluate(&assignment) {
            Verdict::Feasible(a) => a,
            _ => unreachable!("filtered to feasible"),
        };
        ExhaustiveOutcome {
            best: Individual { genes, cost },
            assignment,
            allocation,
            enumerated: total,
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::testing::synthetic;
    use crate::netmodel::SystemParams;

    fn tiny(a_req: f64) -> TaskContext {
        let params = SystemParams {
            accuracy_req: a_req,
            ..SystemParams::default()
        };
        synthetic(
            params,
            vec![vec![300, 50], vec![200, 400]],
            &[[0.0, 0.0], [20.0, 3.5]],
            [10.0, 12.0],
            150.0,
        )
    }

    fn individuals(costs: &[f64]) -> Vec<Individual> {
        costs
            .iter()
            .map(|&cost| Individual {
                genes: vec![Gene { mask: 1, node: 0 }],
                cost,
            })
            .collect()
    }

    #[test]
    fn selection_probability_examples() {
        let p = selection_probabilities(&[0.2, 0.6]).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-12 && (p[1] - 0.25).abs() < 1e-12);
        assert_eq!(selection_probabilities(&[0.3; 4]).unwrap(), vec![0.25; 4]);
        assert_eq!(selection_probabilities(&[0.0; 3]).unwrap(), vec![1.0 / 3.0; 3]);
        assert!(matches!(
            selection_probabilities(&[0.1]),
            Err(Error::PopulationTooSmall(1))
        ));
    }

    #[test]
    fn crossover_and_mutation_examples() {
        let g = |mask, node| Gene { mask, node };
        let v1 = vec![g(1, 0), g(1, 1)];
        let v2 = vec![g(2, 2), g(3, 2)];
        assert_eq!(crossover(&v1, &v2, 0), v2);
        assert_eq!(crossover(&v1, &v2, 2), v1);
        assert_eq!(crossover(&v1, &v2, 1), vec![g(1, 0), g(3, 2)]);
        assert_eq!(mutate(&v1, 1, g(1, 1)), v1);
        let m = mutate(&v1, 0, g(3, 2));
        assert_eq!(m.iter().zip(&v1).filter(|(a, b)| a != b).count(), 1);
    }

    #[test]
    fn gene_space_counts() {
        let ctx = tiny(0.5);
        let space = GeneSpace::new(&ctx, PlacementRule::Free).unwrap();
        assert_eq!(space.masks(0), &[1, 2, 3]);
        assert_eq!(space.size(), 9 * 9);
        let fixed = GeneSpace::new(&ctx, PlacementRule::Fixed(2)).unwrap();
        assert_eq!(fixed.size(), 9);
    }

    #[test]
    fn random_genes_cover_space() {
        let ctx = synthetic(
            SystemParams::default(),
            vec![vec![10], vec![10]],
            &[[0.0, 0.0], [5.0, 0.0]],
            [0.0, 10.0],
            1.0,
        );
        let space = GeneSpace::new(&ctx, PlacementRule::Free).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..10_000 {
            seen.insert(space.random_gene(0, &mut rng));
        }
        assert_eq!(seen.len(), 9);
    }

    #[test]
    fn zero_probabilities_copy_first_parent() {
        let ctx = tiny(0.5);
        let cfg = GaConfig {
            p_crossover: 0.0,
            p_mutation: 0.0,
            population: 8,
            ..GaConfig::default()
        };
        let search = GeneticSearch::new(&ctx, cfg, PlacementRule::Free).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pop = search.init_population(&mut rng).unwrap();
        let next = search.evolve_generation(&pop, &mut rng).unwrap();
        assert!(next.iter().all(|i| pop.contains(i)));
    }

    #[test]
    fn exhaustive_matches_ga_on_tiny() {
        let ctx = tiny(0.8);
        let ex = exhaustive_solve(&ctx, PlacementRule::Free).unwrap().unwrap();
        assert_eq!(ex.enumerated, 81);
        let out = run(&ctx, &GaConfig::default()).unwrap();
        assert!((out.best.cost - ex.best.cost).abs() < 1e-6);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(out.history.len(), 51);
    }

    #[test]
    fn infeasible_instances() {
        let ctx = tiny(0.9999);
        assert!(exhaustive_solve(&ctx, PlacementRule::Free).unwrap().is_none());
        match run(&ctx, &GaConfig { max_init_attempts: 50, ..GaConfig::default() }) {
            Err(Error::InitExhausted { dominant, attempts, .. }) => {
                assert_eq!(dominant, "accuracy");
                assert_eq!(attempts, 50);
            }
            other => panic!("expected init failure, got {other:?}"),
        }
    }

    #[test]
    fn deterministic_across_parallelism() {
        let ctx = tiny(0.5);
        let par = run(&ctx, &GaConfig::default()).unwrap();
        let seq = run(&ctx, &GaConfig { parallel: false, ..GaConfig::default() }).unwrap();
        assert_eq!(par.history, seq.history);
        assert_eq!(par.best, seq.best);
    }

    #[test]
    fn elite_survives() {
        let pop = individuals(&[0.5, 0.2, 0.2, 0.9]);
        assert_eq!(elite(&pop).cost, 0.2);
        assert!(std::ptr::eq(elite(&pop), &pop[1]));
    }

    #[test]
    fn too_large_space_rejected() {
        let n = 4;
        let ctx = synthetic(
            SystemParams::default(),
            vec![vec![10; 6]; n],
            &[[0.0, 0.0], [5.0, 0.0], [10.0, 0.0], [15.0, 0.0]],
            [0.0, 10.0],
            1.0,
        );
        assert!(matches!(
            exhaustive_solve(&ctx, PlacementRule::Free),
            Err(Error::SearchSpaceTooLarge(_))
        ));
    }
}
