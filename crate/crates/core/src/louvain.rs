//! Unit-based two-phase Louvain maximization of block modularity.
//!
//! Each level starts with every unit in its own community and repeatedly
//! moves units to the neighboring community with the largest positive gain.
//! The communities are then collapsed: nodes of the same type inside one
//! community become one weighted super-node, and the super-nodes of one
//! community form the next level's unit. Levels repeat until no unit moves.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{type_pairs, BuildMode, HetGraph, NodeRef};
use crate::modularity::{
    modularity, CommunityState, ModularityError, NeighborWeights, Partition, Unit, UnitProfile,
};

/// Gains closer than this are treated as equal.
const GAIN_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum LouvainError {
    #[error("restart count must be at least 1")]
    NoRestarts,
    #[error("target community count must be at least 1")]
    ZeroTarget,
    #[error("target community count {target} exceeds the {nodes} nodes of the graph")]
    TargetTooLarge { target: usize, nodes: usize },
    #[error(transparent)]
    Modularity(#[from] ModularityError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LouvainConfig {
    /// Independent runs with different random unit orders; the best wins.
    pub restarts: usize,
    /// Restart `r` is seeded with `seed + r`.
    pub seed: u64,
    /// Stop (or keep merging) once this many communities remain.
    pub target_k: Option<usize>,
    /// Cap on sweeps over the units within one level.
    pub max_sweeps: usize,
    /// Run restarts on the rayon pool. The result does not depend on this.
    pub parallel: bool,
}

impl Default for LouvainConfig {
    fn default() -> Self {
        Self {
            restarts: 100,
            seed: 0,
            target_k: None,
            max_sweeps: 1000,
            parallel: true,
        }
    }
}

impl LouvainConfig {
    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_target(mut self, k: Option<usize>) -> Self {
        self.target_k = k;
        self
    }

    pub fn validate(&self, g: &HetGraph) -> Result<(), LouvainError> {
        if self.restarts == 0 {
            return Err(LouvainError::NoRestarts);
        }
        if let Some(k) = self.target_k {
            if k == 0 {
                return Err(LouvainError::ZeroTarget);
            }
            if k > g.total_nodes() {
                return Err(LouvainError::TargetTooLarge {
                    target: k,
                    nodes: g.total_nodes(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LouvainResult {
    pub partition: Partition,
    pub modularity: f64,
    pub num_communities: usize,
    /// Final modularity of every restart, in restart order.
    pub restart_trace: Vec<f64>,
    pub best_restart: usize,
    /// Levels (move phase + aggregation rounds) of the winning restart.
    pub levels: usize,
}

/// Result of one move phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOutcome {
    /// Community of every node of the graph the phase ran on.
    pub partition: Partition,
    pub improved: bool,
    pub moves: usize,
    pub modularity_before: f64,
    pub modularity_after: f64,
}

struct PhaseStats {
    moves: usize,
    reached_target: bool,
}

/// Labels putting every unit in its own community (community id = unit id).
fn unit_labels(g: &HetGraph, units: &[Unit]) -> Vec<Vec<usize>> {
    let mut labels: Vec<Vec<usize>> = g.type_sizes().iter().map(|&n| vec![usize::MAX; n]).collect();
    for (u, unit) in units.iter().enumerate() {
        for m in unit.members() {
            labels[m.node_type][m.index] = u;
        }
    }
    debug_assert!(labels.iter().flatten().all(|&c| c != usize::MAX));
    labels
}

/// Runs the local-move phase from "every unit alone", visiting units in
/// `order` on every sweep.
pub fn local_move_phase<R: Rng>(
    g: &HetGraph,
    units: &[Unit],
    order: &[usize],
    rng: &mut R,
    max_sweeps: usize,
) -> PhaseOutcome {
    let labels = unit_labels(g, units);
    let mut state = CommunityState::new(g, &labels, units.len());
    let before = state.quality();
    let stats = move_units(&mut state, units, order, rng, max_sweeps, None);
    let after = state.quality();
    PhaseOutcome {
        partition: state.to_partition(),
        improved: stats.moves > 0,
        moves: stats.moves,
        modularity_before: before,
        modularity_after: after,
    }
}

fn move_units<R: Rng>(
    state: &mut CommunityState<'_>,
    units: &[Unit],
    order: &[usize],
    rng: &mut R,
    max_sweeps: usize,
    target: Option<usize>,
) -> PhaseStats {
    let g = state.graph();
    let profiles: Vec<UnitProfile> = units.iter().map(|u| UnitProfile::new(g, u)).collect();
    let mut weights = NeighborWeights::new(g.num_types(), g.num_pairs(), state.capacity());
    let mut candidates: Vec<(usize, f64)> = Vec::new();
    let mut ties: Vec<usize> = Vec::new();
    let mut moves = 0;

    if target.is_some_and(|k| state.num_nonempty() <= k) {
        return PhaseStats {
            moves,
            reached_target: true,
        };
    }

    for _ in 0..max_sweeps {
        let mut moved = false;
        for &u in order {
            let unit = &units[u];
            let profile = &profiles[u];
            let from = state.community_of(unit.members()[0]);
            state.gather(unit, &mut weights);
            let stay = state.gain(profile, &weights, from, true);

            candidates.clear();
            for &c in &weights.communities {
                if c != from {
                    candidates.push((c, state.gain(profile, &weights, c, false)));
                }
            }
            let best = candidates
                .iter()
                .map(|&(_, x)| x)
                .fold(f64::NEG_INFINITY, f64::max);
            if best - stay <= GAIN_EPS {
                continue;
            }
            ties.clear();
            ties.extend(
                candidates
                    .iter()
                    .filter(|&&(_, x)| best - x <= GAIN_EPS)
                    .map(|&(c, _)| c),
            );
            let to = if ties.len() == 1 {
                ties[0]
            } else {
                ties[rng.gen_range(0..ties.len())]
            };
            state.apply_move(unit, profile, &weights, from, to);
            moves += 1;
            moved = true;
            if target.is_some_and(|k| state.num_nonempty() <= k) {
                return PhaseStats {
                    moves,
                    reached_target: true,
                };
            }
        }
        if !moved {
            break;
        }
    }
    PhaseStats {
        moves,
        reached_target: false,
    }
}

/// A collapsed graph and how fine nodes map onto it.
#[derive(Debug, Clone)]
pub struct Aggregation {
    pub graph: HetGraph,
    /// One unit per community: its super-nodes, at most one per type.
    pub units: Vec<Unit>,
    /// `[l][i]`: super-node (within type `l`) holding fine node `i`.
    pub node_map: Vec<Vec<usize>>,
}

/// Collapses every community's type-`l` nodes into one type-`l` super-node.
/// Weights between super-nodes are sums of fine weights; same-type weight
/// inside a community becomes a self-loop, which keeps modularity exact.
pub fn aggregate(g: &HetGraph, partition: &Partition) -> Aggregation {
    let k = partition.num_communities();
    let nt = g.num_types();
    let mut super_of = vec![vec![usize::MAX; k]; nt];
    let mut sizes = vec![0usize; nt];
    for l in 0..nt {
        let mut present = vec![false; k];
        for &c in partition.labels(l) {
            present[c] = true;
        }
        for c in (0..k).filter(|&c| present[c]) {
            super_of[l][c] = sizes[l];
            sizes[l] += 1;
        }
    }
    let node_map: Vec<Vec<usize>> = (0..nt)
        .map(|l| partition.labels(l).iter().map(|&c| super_of[l][c]).collect())
        .collect();

    let mut edges = Vec::new();
    for l in 0..nt {
        for i in 0..g.type_size(l) {
            let s = NodeRef::new(l, node_map[l][i]);
            let w = g.self_loop(l, i);
            if w > 0.0 {
                edges.push((s, s, w));
            }
            for &(j, w) in g.homo_neighbors(l, i).iter().filter(|&&(j, _)| j > i) {
                edges.push((s, NodeRef::new(l, node_map[l][j]), w));
            }
        }
    }
    for (lo, hi) in type_pairs(nt) {
        for i in 0..g.type_size(lo) {
            let s = NodeRef::new(lo, node_map[lo][i]);
            for &(j, w) in g.cross_neighbors(lo, hi, i) {
                edges.push((s, NodeRef::new(hi, node_map[hi][j]), w));
            }
        }
    }
    let graph = HetGraph::build(&sizes, &edges, BuildMode::Weighted)
        .expect("aggregated edges are in range with non-negative weights");

    let units = (0..k)
        .map(|c| {
            let members = (0..nt)
                .filter(|&l| super_of[l][c] != usize::MAX)
                .map(|l| NodeRef::new(l, super_of[l][c]))
                .collect();
            Unit::new(members).expect("one super-node per type per community")
        })
        .collect();

    Aggregation {
        graph,
        units,
        node_map,
    }
}

struct RestartOutcome {
    partition: Partition,
    modularity: f64,
    levels: usize,
}

fn singleton_units(g: &HetGraph) -> Vec<Unit> {
    g.nodes().map(Unit::single).collect()
}

fn run_restart(g: &HetGraph, cfg: &LouvainConfig, seed: u64) -> RestartOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coarse: Option<HetGraph> = None;
    let mut units = singleton_units(g);
    let mut fine_map: Vec<Vec<usize>> = g.type_sizes().iter().map(|&n| (0..n).collect()).collect();
    let mut levels = 0;
    let mut previous_q = f64::NEG_INFINITY;

    let final_labels = loop {
        let current = coarse.as_ref().unwrap_or(g);
        let labels = unit_labels(current, &units);
        let mut state = CommunityState::new(current, &labels, units.len());
        let start_q = state.quality();
        debug_assert!(start_q >= previous_q - 1e-9, "aggregation lost modularity");

        let mut order: Vec<usize> = (0..units.len()).collect();
        order.shuffle(&mut rng);
        let stats = move_units(&mut state, &units, &order, &mut rng, cfg.max_sweeps, cfg.target_k);
        levels += 1;
        let end_q = state.quality();
        debug_assert!(end_q >= start_q - 1e-9, "move phase decreased modularity");

        let partition = state.to_partition();
        let done = stats.moves == 0 || stats.reached_target;
        let needs_merging = cfg
            .target_k
            .is_some_and(|k| stats.moves == 0 && partition.num_communities() > k);
        if done && !needs_merging {
            break compose(&fine_map, partition.all_labels());
        }
        let agg = aggregate(current, &partition);
        drop(state);
        fine_map = compose(&fine_map, &agg.node_map);
        units = agg.units;
        coarse = Some(agg.graph);
        previous_q = end_q;
        if needs_merging {
            let target = cfg.target_k.unwrap_or(1);
            let merged = merge_to_target(coarse.take().unwrap(), units, target, &mut rng);
            break compose(&fine_map, &merged);
        }
    };

    let partition = Partition::from_raw(&final_labels);
    let q = modularity(g, &partition).expect("partition built for this graph");
    RestartOutcome {
        partition,
        modularity: q,
        levels,
    }
}

/// `out[l][i] = inner[l][outer[l][i]]`
fn compose(outer: &[Vec<usize>], inner: &[Vec<usize>]) -> Vec<Vec<usize>> {
    outer
        .iter()
        .zip(inner)
        .map(|(o, inn)| o.iter().map(|&x| inn[x]).collect())
        .collect()
}

/// Greedily merges whole communities (each one unit of `g`) with the smallest
/// modularity loss until `target` remain. Returns labels on `g`'s nodes.
fn merge_to_target<R: Rng>(
    mut g: HetGraph,
    mut units: Vec<Unit>,
    target: usize,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    let mut map: Vec<Vec<usize>> = g.type_sizes().iter().map(|&n| (0..n).collect()).collect();
    while units.len() > target {
        let labels = unit_labels(&g, &units);
        let state = CommunityState::new(&g, &labels, units.len());
        let choice = best_merge(&state, &units, false)
            .or_else(|| best_merge(&state, &units, true))
            .expect("at least two communities remain");
        let (u, to) = pick(&choice, rng);
        let mut state = state;
        state
            .move_unit(&units[u], u, to)
            .expect("unit sits in its own community");
        let partition = state.to_partition();
        let agg = aggregate(&g, &partition);
        map = compose(&map, &agg.node_map);
        units = agg.units;
        g = agg.graph;
    }
    let labels = unit_labels(&g, &units);
    compose(&map, &labels)
}

/// All `(unit, target community)` moves attaining the best gain. With
/// `all_pairs`, non-adjacent communities are candidates too.
fn best_merge(state: &CommunityState<'_>, units: &[Unit], all_pairs: bool) -> Option<Vec<(usize, usize)>> {
    let g = state.graph();
    let mut weights = NeighborWeights::new(g.num_types(), g.num_pairs(), units.len());
    let mut best = f64::NEG_INFINITY;
    let mut ties = Vec::new();
    for (u, unit) in units.iter().enumerate() {
        let profile = UnitProfile::new(g, unit);
        state.gather(unit, &mut weights);
        let stay = state.gain(&profile, &weights, u, true);
        let targets: Vec<usize> = if all_pairs {
            (0..units.len()).filter(|&c| c != u).collect()
        } else {
            weights.communities.iter().copied().filter(|&c| c != u).collect()
        };
        for c in targets {
            let delta = state.gain(&profile, &weights, c, false) - stay;
            if delta > best + GAIN_EPS {
                best = delta;
                ties.clear();
                ties.push((u, c));
            } else if (delta - best).abs() <= GAIN_EPS {
                ties.push((u, c));
            }
        }
    }
    (!ties.is_empty()).then_some(ties)
}

fn pick<R: Rng>(ties: &[(usize, usize)], rng: &mut R) -> (usize, usize) {
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.gen_range(0..ties.len())]
    }
}

/// Best of `cfg.restarts` independent runs. Selection is by modularity, then
/// lowest restart index, so the output is the same whether or not restarts
/// run in parallel.
pub fn run(g: &HetGraph, cfg: &LouvainConfig) -> Result<LouvainResult, LouvainError> {
    cfg.validate(g)?;
    let seeds: Vec<u64> = (0..cfg.restarts as u64)
        .map(|r| cfg.seed.wrapping_add(r))
        .collect();
    let outcomes: Vec<RestartOutcome> = if cfg.parallel {
        seeds.par_iter().map(|&s| run_restart(g, cfg, s)).collect()
    } else {
        seeds.iter().map(|&s| run_restart(g, cfg, s)).collect()
    };

    let mut best = 0;
    for (r, o) in outcomes.iter().enumerate() {
        if o.modularity > outcomes[best].modularity {
            best = r;
        }
    }
    let restart_trace = outcomes.iter().map(|o| o.modularity).collect();
    let winner = outcomes.into_iter().nth(best).expect("at least one restart");
    Ok(LouvainResult {
        num_communities: winner.partition.num_communities(),
        modularity: winner.modularity,
        partition: winner.partition,
        restart_trace,
        best_restart: best,
        levels: winner.levels,
    })
}
