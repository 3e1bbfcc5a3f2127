//! Null-model expectations and the block modularity function.
//!
//! For a partition into communities, each block contributes the observed
//! minus expected intra-community weight, normalized by its own edge weight:
//! `1/(2 m[l])` for the block inside type `l` and `1/m[l1,l2]` for every
//! ordered pair of distinct types (so each cross block counts twice). The sum
//! is divided by `L^2`. Expected weights use the degree-product forms
//! `d_i d_j / 2m` (same type) and `d[l1,l2]_i d[l2,l1]_j / m` (cross type).
//! Blocks without edges contribute nothing.
//!
//! All values are computed from per-community totals, never from a dense
//! expectation matrix.

use thiserror::Error;

use crate::graph::{pair_index, type_pairs, HetGraph, NodeRef};

#[derive(Debug, Error, PartialEq)]
pub enum ModularityError {
    #[error("partition has {got} types, graph has {expected}")]
    TypeCountMismatch { expected: usize, got: usize },
    #[error("partition has {got} labels for type {node_type}, graph has {expected} nodes")]
    SizeMismatch {
        node_type: usize,
        expected: usize,
        got: usize,
    },
    #[error("label {label} out of range for {k} communities")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("community {0} has no members")]
    EmptyCommunity(usize),
    #[error("block of {0} has no edges; its expectation is undefined")]
    ZeroEdgeBlock(NodeRef),
    #[error("unit member {0} is not in community {1}")]
    NotInCommunity(NodeRef, usize),
    #[error("unit has two members of type {0}")]
    DuplicateUnitType(usize),
    #[error("unit is empty")]
    EmptyUnit,
}

/// Community label for every node, grouped by type. Labels are compact:
/// every id in `0..K` is used by at least one node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<Vec<usize>>,
    num_communities: usize,
}

impl Partition {
    /// Wraps labels that are already compact.
    pub fn new(labels: Vec<Vec<usize>>, num_communities: usize) -> Result<Self, ModularityError> {
        let mut used = vec![false; num_communities];
        for &c in labels.iter().flatten() {
            if c >= num_communities {
                return Err(ModularityError::LabelOutOfRange {
                    label: c,
                    k: num_communities,
                });
            }
            used[c] = true;
        }
        if let Some(c) = used.iter().position(|&u| !u) {
            return Err(ModularityError::EmptyCommunity(c));
        }
        Ok(Self {
            labels,
            num_communities,
        })
    }

    /// Relabels arbitrary ids to `0..K` in order of first appearance
    /// (types in order, nodes in index order).
    pub fn from_raw(raw: &[Vec<usize>]) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&c| {
                        let next = map.len();
                        *map.entry(c).or_insert(next)
                    })
                    .collect()
            })
            .collect();
        Self {
            labels,
            num_communities: map.len(),
        }
    }

    /// Every node in community 0.
    pub fn single(g: &HetGraph) -> Self {
        let labels: Vec<Vec<usize>> = g.type_sizes().iter().map(|&n| vec![0; n]).collect();
        let k = usize::from(g.total_nodes() > 0);
        Self {
            labels,
            num_communities: k,
        }
    }

    /// Every node in its own community.
    pub fn singletons(g: &HetGraph) -> Self {
        let mut next = 0;
        let labels = g
            .type_sizes()
            .iter()
            .map(|&n| {
                let row = (next..next + n).collect();
                next += n;
                row
            })
            .collect();
        Self {
            labels,
            num_communities: next,
        }
    }

    pub fn num_communities(&self) -> usize {
        self.num_communities
    }

    pub fn num_types(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, node: NodeRef) -> usize {
        self.labels[node.node_type][node.index]
    }

    pub fn labels(&self, l: usize) -> &[usize] {
        &self.labels[l]
    }

    pub fn all_labels(&self) -> &[Vec<usize>] {
        &self.labels
    }

    /// Labels of all nodes, types concatenated in order.
    pub fn flat_labels(&self) -> Vec<usize> {
        self.labels.iter().flatten().copied().collect()
    }

    /// The 0-1 assignment matrix, one row per node (types concatenated).
    pub fn assignment_matrix(&self) -> Vec<Vec<u8>> {
        self.labels
            .iter()
            .flatten()
            .map(|&c| {
                let mut row = vec![0; self.num_communities];
                row[c] = 1;
                row
            })
            .collect()
    }

    pub fn check_dims(&self, g: &HetGraph) -> Result<(), ModularityError> {
        if self.labels.len() != g.num_types() {
            return Err(ModularityError::TypeCountMismatch {
                expected: g.num_types(),
                got: self.labels.len(),
            });
        }
        for (l, row) in self.labels.iter().enumerate() {
            if row.len() != g.type_size(l) {
                return Err(ModularityError::SizeMismatch {
                    node_type: l,
                    expected: g.type_size(l),
                    got: row.len(),
                });
            }
        }
        Ok(())
    }
}

/// Leading-order null expectation of the adjacency entry at `(u, v)`.
pub fn expected_weight(g: &HetGraph, u: NodeRef, v: NodeRef) -> Result<f64, ModularityError> {
    if u.node_type == v.node_type {
        let l = u.node_type;
        let m = g.homo_edge_count(l);
        if m <= 0.0 {
            return Err(ModularityError::ZeroEdgeBlock(u));
        }
        Ok(g.homo_degree(l, u.index) * g.homo_degree(l, v.index) / (2.0 * m))
    } else {
        let m = g.cross_edge_count(u.node_type, v.node_type);
        if m <= 0.0 {
            return Err(ModularityError::ZeroEdgeBlock(u));
        }
        Ok(g.cross_degree(u.node_type, v.node_type, u.index)
            * g.cross_degree(v.node_type, u.node_type, v.index)
            / m)
    }
}

/// Modularity of `p` on `g`.
pub fn modularity(g: &HetGraph, p: &Partition) -> Result<f64, ModularityError> {
    p.check_dims(g)?;
    Ok(CommunityState::new(g, p.all_labels(), p.num_communities()).quality())
}

/// Per-block normalizers; zero for blocks without edges.
#[derive(Debug, Clone)]
pub(crate) struct Norms {
    pub num_types: usize,
    pub num_pairs: usize,
    /// `1 / (2 m[l])`
    pub homo: Vec<f64>,
    /// `1 / m[l1,l2]` per unordered pair.
    pub cross: Vec<f64>,
    /// `(lo, hi)` per unordered pair.
    pub pairs: Vec<(usize, usize)>,
    pub scale: f64,
}

impl Norms {
    pub fn new(g: &HetGraph) -> Self {
        let num_types = g.num_types();
        let inv = |x: f64| if x > 0.0 { 1.0 / x } else { 0.0 };
        let homo = (0..num_types)
            .map(|l| inv(2.0 * g.homo_edge_count(l)))
            .collect();
        let pairs: Vec<(usize, usize)> = type_pairs(num_types).collect();
        let cross = pairs
            .iter()
            .map(|&(a, b)| inv(g.cross_edge_count(a, b)))
            .collect();
        Self {
            num_types,
            num_pairs: pairs.len(),
            homo,
            cross,
            pairs,
            scale: 1.0 / (num_types * num_types) as f64,
        }
    }
}

/// A group of nodes moved together: at most one node per type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unit {
    members: Vec<NodeRef>,
}

impl Unit {
    pub fn new(mut members: Vec<NodeRef>) -> Result<Self, ModularityError> {
        if members.is_empty() {
            return Err(ModularityError::EmptyUnit);
        }
        members.sort_unstable();
        if let Some(w) = members.windows(2).find(|w| w[0].node_type == w[1].node_type) {
            return Err(ModularityError::DuplicateUnitType(w[0].node_type));
        }
        Ok(Self { members })
    }

    pub fn single(node: NodeRef) -> Self {
        Self {
            members: vec![node],
        }
    }

    pub fn members(&self) -> &[NodeRef] {
        &self.members
    }

    fn member_of_type(&self, l: usize) -> Option<usize> {
        self.members
            .iter()
            .find(|m| m.node_type == l)
            .map(|m| m.index)
    }
}

/// Degree totals of a unit and the weight among its own members.
#[derive(Debug, Clone)]
pub(crate) struct UnitProfile {
    /// `[l]`: homo degree of the type-`l` member.
    homo_deg: Vec<f64>,
    /// `[l]`: matrix diagonal `A_ii` of the type-`l` member.
    homo_self: Vec<f64>,
    /// `[l1 * L + l2]`: cross degree of the type-`l1` member toward `l2`.
    cross_deg: Vec<f64>,
    /// `[pair]`: weight between the unit's own members of that pair.
    cross_self: Vec<f64>,
}

impl UnitProfile {
    pub fn new(g: &HetGraph, unit: &Unit) -> Self {
        let nt = g.num_types();
        let mut p = Self {
            homo_deg: vec![0.0; nt],
            homo_self: vec![0.0; nt],
            cross_deg: vec![0.0; nt * nt],
            cross_self: vec![0.0; g.num_pairs()],
        };
        for &m in unit.members() {
            let l = m.node_type;
            p.homo_deg[l] = g.homo_degree(l, m.index);
            p.homo_self[l] = 2.0 * g.self_loop(l, m.index);
            for l2 in (0..nt).filter(|&l2| l2 != l) {
                p.cross_deg[l * nt + l2] = g.cross_degree(l, l2, m.index);
            }
        }
        for (a, &u) in unit.members().iter().enumerate() {
            for &v in &unit.members()[a + 1..] {
                p.cross_self[pair_index(nt, u.node_type, v.node_type)] = g.weight(u, v);
            }
        }
        p
    }
}

/// Scratch buffers holding a unit's edge weight into each neighboring
/// community, per block.
#[derive(Debug, Clone, Default)]
pub(crate) struct NeighborWeights {
    slot_of: Vec<usize>,
    pub communities: Vec<usize>,
    homo: Vec<f64>,
    cross: Vec<f64>,
    nt: usize,
    np: usize,
}

impl NeighborWeights {
    pub fn new(num_types: usize, num_pairs: usize, capacity: usize) -> Self {
        Self {
            slot_of: vec![usize::MAX; capacity],
            communities: Vec::new(),
            homo: Vec::new(),
            cross: Vec::new(),
            nt: num_types,
            np: num_pairs,
        }
    }

    fn slot(&mut self, c: usize) -> usize {
        if c >= self.slot_of.len() {
            self.slot_of.resize(c + 1, usize::MAX);
        }
        let s = self.slot_of[c];
        if s != usize::MAX {
            return s;
        }
        let s = self.communities.len();
        self.slot_of[c] = s;
        self.communities.push(c);
        self.homo.extend(std::iter::repeat_n(0.0, self.nt));
        self.cross.extend(std::iter::repeat_n(0.0, self.np));
        s
    }

    pub fn clear(&mut self) {
        for &c in &self.communities {
            self.slot_of[c] = usize::MAX;
        }
        self.communities.clear();
        self.homo.clear();
        self.cross.clear();
    }

    fn homo_of(&self, c: usize) -> Option<&[f64]> {
        let s = *self.slot_of.get(c)?;
        (s != usize::MAX).then(|| &self.homo[s * self.nt..(s + 1) * self.nt])
    }

    fn cross_of(&self, c: usize) -> Option<&[f64]> {
        let s = *self.slot_of.get(c)?;
        (s != usize::MAX).then(|| &self.cross[s * self.np..(s + 1) * self.np])
    }
}

/// Community assignment of every node plus per-community sufficient
/// statistics, so that `Q` and move gains never touch expectation matrices.
#[derive(Debug, Clone)]
pub struct CommunityState<'g> {
    graph: &'g HetGraph,
    pub(crate) norms: Norms,
    node_comm: Vec<Vec<usize>>,
    capacity: usize,
    /// `[c * L + l]`: total homo degree of type-`l` members.
    homo_deg: Vec<f64>,
    /// `[c * L + l]`: sum of `A[l]_ij` over ordered member pairs, diagonal included.
    homo_in: Vec<f64>,
    /// `[c * L^2 + l1 * L + l2]`: total cross degree of type-`l1` members toward `l2`.
    cross_deg: Vec<f64>,
    /// `[c * P + pair]`: sum of `A[lo,hi]_ij` over members `i` of `lo` and `j` of `hi`.
    cross_in: Vec<f64>,
    sizes: Vec<usize>,
    nonempty: usize,
}

impl<'g> CommunityState<'g> {
    /// Builds statistics for `labels` (each in `0..capacity`).
    pub fn new(graph: &'g HetGraph, labels: &[Vec<usize>], capacity: usize) -> Self {
        let norms = Norms::new(graph);
        let nt = norms.num_types;
        let np = norms.num_pairs;
        let mut s = Self {
            graph,
            node_comm: labels.to_vec(),
            capacity,
            homo_deg: vec![0.0; capacity * nt],
            homo_in: vec![0.0; capacity * nt],
            cross_deg: vec![0.0; capacity * nt * nt],
            cross_in: vec![0.0; capacity * np],
            sizes: vec![0; capacity],
            nonempty: 0,
            norms,
        };
        for l in 0..nt {
            for i in 0..graph.type_size(l) {
                let c = s.node_comm[l][i];
                s.sizes[c] += 1;
                s.homo_deg[c * nt + l] += graph.homo_degree(l, i);
                s.homo_in[c * nt + l] += 2.0 * graph.self_loop(l, i);
                for &(j, w) in graph.homo_neighbors(l, i) {
                    if s.node_comm[l][j] == c {
                        s.homo_in[c * nt + l] += w;
                    }
                }
                for l2 in (0..nt).filter(|&l2| l2 != l) {
                    s.cross_deg[c * nt * nt + l * nt + l2] += graph.cross_degree(l, l2, i);
                }
            }
        }
        for (p, &(lo, hi)) in s.norms.pairs.clone().iter().enumerate() {
            for i in 0..graph.type_size(lo) {
                let c = s.node_comm[lo][i];
                for &(j, w) in graph.cross_neighbors(lo, hi, i) {
                    if s.node_comm[hi][j] == c {
                        s.cross_in[c * np + p] += w;
                    }
                }
            }
        }
        s.nonempty = s.sizes.iter().filter(|&&n| n > 0).count();
        s
    }

    pub fn graph(&self) -> &'g HetGraph {
        self.graph
    }

    pub fn community_of(&self, node: NodeRef) -> usize {
        self.node_comm[node.node_type][node.index]
    }

    pub fn labels(&self) -> &[Vec<usize>] {
        &self.node_comm
    }

    pub fn num_nonempty(&self) -> usize {
        self.nonempty
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn community_size(&self, c: usize) -> usize {
        self.sizes[c]
    }

    /// Contribution of community `c`, without the `1/L^2` factor.
    fn community_term(&self, c: usize) -> f64 {
        let nt = self.norms.num_types;
        let np = self.norms.num_pairs;
        let mut total = 0.0;
        for l in 0..nt {
            let k = self.norms.homo[l];
            if k > 0.0 {
                let d = self.homo_deg[c * nt + l];
                total += k * (self.homo_in[c * nt + l] - d * d * k);
            }
        }
        for (p, &(lo, hi)) in self.norms.pairs.iter().enumerate() {
            let k = self.norms.cross[p];
            if k > 0.0 {
                let base = c * nt * nt;
                let d_fwd = self.cross_deg[base + lo * nt + hi];
                let d_bwd = self.cross_deg[base + hi * nt + lo];
                total += 2.0 * k * (self.cross_in[c * np + p] - d_fwd * d_bwd * k);
            }
        }
        total
    }

    /// Modularity of the current assignment.
    pub fn quality(&self) -> f64 {
        let sum: f64 = (0..self.capacity)
            .filter(|&c| self.sizes[c] > 0)
            .map(|c| self.community_term(c))
            .sum();
        sum * self.norms.scale
    }

    /// Accumulates the unit's weight into each neighboring community,
    /// skipping edges among the unit's own members.
    pub(crate) fn gather(&self, unit: &Unit, out: &mut NeighborWeights) {
        out.clear();
        let g = self.graph;
        let nt = self.norms.num_types;
        for &m in unit.members() {
            let l = m.node_type;
            for &(j, w) in g.homo_neighbors(l, m.index) {
                let c = self.node_comm[l][j];
                let s = out.slot(c);
                out.homo[s * nt + l] += w;
            }
            for l2 in (0..nt).filter(|&l2| l2 != l) {
                let own = unit.member_of_type(l2);
                let p = pair_index(nt, l, l2);
                for &(j, w) in g.cross_neighbors(l, l2, m.index) {
                    if own == Some(j) {
                        continue;
                    }
                    let c = self.node_comm[l2][j];
                    let s = out.slot(c);
                    out.cross[s * out.np + p] += w;
                }
            }
        }
    }

    /// Change in the (unscaled) objective from adding the unit to community
    /// `c`. With `excluding_unit`, `c`'s totals are taken without the unit,
    /// i.e. `c` is the unit's current community.
    pub(crate) fn gain(
        &self,
        profile: &UnitProfile,
        weights: &NeighborWeights,
        c: usize,
        excluding_unit: bool,
    ) -> f64 {
        let nt = self.norms.num_types;
        let sign = if excluding_unit { 1.0 } else { 0.0 };
        let wh = weights.homo_of(c);
        let wx = weights.cross_of(c);
        let mut total = 0.0;
        for l in 0..nt {
            let k = self.norms.homo[l];
            if k == 0.0 {
                continue;
            }
            let d = profile.homo_deg[l];
            let big_d = self.homo_deg[c * nt + l] - sign * d;
            let w = wh.map_or(0.0, |v| v[l]);
            total += k * (2.0 * w + profile.homo_self[l] - (2.0 * big_d * d + d * d) * k);
        }
        for (p, &(lo, hi)) in self.norms.pairs.iter().enumerate() {
            let k = self.norms.cross[p];
            if k == 0.0 {
                continue;
            }
            let base = c * nt * nt;
            let d_fwd = profile.cross_deg[lo * nt + hi];
            let d_bwd = profile.cross_deg[hi * nt + lo];
            let big_fwd = self.cross_deg[base + lo * nt + hi] - sign * d_fwd;
            let big_bwd = self.cross_deg[base + hi * nt + lo] - sign * d_bwd;
            let w = wx.map_or(0.0, |v| v[p]);
            let cross_products = big_fwd * d_bwd + d_fwd * big_bwd + d_fwd * d_bwd;
            total += 2.0 * k * (w + profile.cross_self[p] - cross_products * k);
        }
        total
    }

    /// Moves a unit whose members are all in `from` into `to`, updating the
    /// statistics. `weights` must come from [`Self::gather`] for this unit.
    pub(crate) fn apply_move(
        &mut self,
        unit: &Unit,
        profile: &UnitProfile,
        weights: &NeighborWeights,
        from: usize,
        to: usize,
    ) {
        if from == to {
            return;
        }
        if to >= self.capacity {
            self.grow(to + 1);
        }
        let nt = self.norms.num_types;
        let np = self.norms.num_pairs;
        for (c, sign) in [(from, -1.0), (to, 1.0)] {
            let wh = weights.homo_of(c);
            let wx = weights.cross_of(c);
            for l in 0..nt {
                self.homo_deg[c * nt + l] += sign * profile.homo_deg[l];
                let w = wh.map_or(0.0, |v| v[l]);
                self.homo_in[c * nt + l] += sign * (2.0 * w + profile.homo_self[l]);
            }
            for x in 0..nt * nt {
                self.cross_deg[c * nt * nt + x] += sign * profile.cross_deg[x];
            }
            for p in 0..np {
                let w = wx.map_or(0.0, |v| v[p]);
                self.cross_in[c * np + p] += sign * (w + profile.cross_self[p]);
            }
        }
        let count = unit.members().len();
        self.sizes[from] -= count;
        if self.sizes[from] == 0 {
            self.nonempty -= 1;
            // Clear rounding residue so an emptied community is exactly zero.
            self.zero_community(from);
        }
        if self.sizes[to] == 0 {
            self.nonempty += 1;
        }
        self.sizes[to] += count;
        for &m in unit.members() {
            self.node_comm[m.node_type][m.index] = to;
        }
    }

    fn zero_community(&mut self, c: usize) {
        let nt = self.norms.num_types;
        let np = self.norms.num_pairs;
        self.homo_deg[c * nt..(c + 1) * nt].fill(0.0);
        self.homo_in[c * nt..(c + 1) * nt].fill(0.0);
        self.cross_deg[c * nt * nt..(c + 1) * nt * nt].fill(0.0);
        self.cross_in[c * np..(c + 1) * np].fill(0.0);
    }

    fn grow(&mut self, capacity: usize) {
        let nt = self.norms.num_types;
        let np = self.norms.num_pairs;
        self.homo_deg.resize(capacity * nt, 0.0);
        self.homo_in.resize(capacity * nt, 0.0);
        self.cross_deg.resize(capacity * nt * nt, 0.0);
        self.cross_in.resize(capacity * np, 0.0);
        self.sizes.resize(capacity, 0);
        self.capacity = capacity;
    }

    fn check_unit(&self, unit: &Unit, from: usize) -> Result<(), ModularityError> {
        for &m in unit.members() {
            if self.community_of(m) != from {
                return Err(ModularityError::NotInCommunity(m, from));
            }
        }
        Ok(())
    }

    /// `Q(after) - Q(before)` for moving `unit` from `from` to `to`, in time
    /// proportional to the unit's degree.
    pub fn delta_modularity(&self, unit: &Unit, from: usize, to: usize) -> Result<f64, ModularityError> {
        self.check_unit(unit, from)?;
        if from == to {
            return Ok(0.0);
        }
        let profile = UnitProfile::new(self.graph, unit);
        let mut weights =
            NeighborWeights::new(self.norms.num_types, self.norms.num_pairs, self.capacity);
        self.gather(unit, &mut weights);
        let to_gain = if to < self.capacity {
            self.gain(&profile, &weights, to, false)
        } else {
            self.gain_into_empty(&profile)
        };
        let from_gain = self.gain(&profile, &weights, from, true);
        Ok((to_gain - from_gain) * self.norms.scale)
    }

    /// Moves `unit` from `from` to `to` (which may be a fresh id).
    pub fn move_unit(&mut self, unit: &Unit, from: usize, to: usize) -> Result<(), ModularityError> {
        self.check_unit(unit, from)?;
        let profile = UnitProfile::new(self.graph, unit);
        let mut weights =
            NeighborWeights::new(self.norms.num_types, self.norms.num_pairs, self.capacity);
        self.gather(unit, &mut weights);
        self.apply_move(unit, &profile, &weights, from, to);
        Ok(())
    }

    pub(crate) fn gain_into_empty(&self, profile: &UnitProfile) -> f64 {
        let nt = self.norms.num_types;
        let mut total = 0.0;
        for l in 0..nt {
            let k = self.norms.homo[l];
            let d = profile.homo_deg[l];
            total += k * (profile.homo_self[l] - d * d * k);
        }
        for (p, &(lo, hi)) in self.norms.pairs.iter().enumerate() {
            let k = self.norms.cross[p];
            let prod = profile.cross_deg[lo * nt + hi] * profile.cross_deg[hi * nt + lo];
            total += 2.0 * k * (profile.cross_self[p] - prod * k);
        }
        total
    }

    /// Compact partition of the current assignment.
    pub fn to_partition(&self) -> Partition {
        Partition::from_raw(&self.node_comm)
    }
}

/// `Q` change for moving `unit` from `from` to `to` under `state`.
pub fn delta_modularity(
    state: &CommunityState<'_>,
    unit: &Unit,
    from: usize,
    to: usize,
) -> Result<f64, ModularityError> {
    state.delta_modularity(unit, from, to)
}
