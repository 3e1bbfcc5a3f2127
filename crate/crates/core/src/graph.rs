//! Typed sparse storage for heterogeneous networks.
//!
//! A [`HetGraph`] holds one symmetric adjacency block per node type and one
//! bi-adjacency block per unordered pair of types. Cross blocks are stored
//! once, oriented from the lower type id to the higher one; the reverse
//! orientation is an index over the same edges, so `A[l2,l1]` is always the
//! transpose of `A[l1,l2]`.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Address of a node: its type (0-based) and its index within that type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeRef {
    pub node_type: usize,
    pub index: usize,
}

impl NodeRef {
    pub fn new(node_type: usize, index: usize) -> Self {
        Self { node_type, index }
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]{}", self.node_type + 1, self.index)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("graph must have at least one node type")]
    NoTypes,
    #[error("expected {expected} type sizes, got {got}")]
    TypeCountMismatch { expected: usize, got: usize },
    #[error("node {node} out of range")]
    NodeOutOfRange { node: NodeRef },
    #[error("self-loop on {node} is not allowed for simple graphs")]
    SelfLoop { node: NodeRef },
    #[error("duplicate edge {u} -- {v}")]
    DuplicateEdge { u: NodeRef, v: NodeRef },
    #[error("edge {u} -- {v} has weight {weight}; simple graphs require weight 1")]
    NonUnitWeight { u: NodeRef, v: NodeRef, weight: f64 },
    #[error("edge {u} -- {v} has invalid weight {weight}")]
    InvalidWeight { u: NodeRef, v: NodeRef, weight: f64 },
}

/// Validation applied to edges while building a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BuildMode {
    /// Unit weights, no self-loops, no repeated undirected edges.
    #[default]
    Simple,
    /// Non-negative weights; repeated edges are summed and self-loops kept.
    Weighted,
}

/// Neighbor list entry: (index within the neighbor's type, weight).
pub type Neighbor = (usize, f64);

#[derive(Debug, Clone, PartialEq)]
struct HomoBlock {
    /// Off-diagonal adjacency, sorted by neighbor index.
    adj: Vec<Vec<Neighbor>>,
    /// Self-loop edge weight per node. A loop of weight `w` is the matrix
    /// entry `A_ii = 2w` and adds `2w` to the node's degree.
    loops: Vec<f64>,
    degrees: Vec<f64>,
    edge_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct CrossBlock {
    /// Rows of `A[lo,hi]`, one per node of the lower type.
    forward: Vec<Vec<Neighbor>>,
    /// Rows of the transpose, one per node of the higher type.
    backward: Vec<Vec<Neighbor>>,
    forward_degrees: Vec<f64>,
    backward_degrees: Vec<f64>,
    edge_weight: f64,
}

/// Immutable heterogeneous network.
#[derive(Debug, Clone, PartialEq)]
pub struct HetGraph {
    type_sizes: Vec<usize>,
    type_names: Vec<String>,
    node_names: Vec<Vec<String>>,
    homo: Vec<HomoBlock>,
    cross: Vec<CrossBlock>,
}

/// Index of the unordered type pair `{a, b}` (a != b) among the
/// `L(L-1)/2` cross blocks, in row-major order of the upper triangle.
pub fn pair_index(num_types: usize, a: usize, b: usize) -> usize {
    debug_assert!(a != b && a < num_types && b < num_types);
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    lo * (2 * num_types - lo - 1) / 2 + (hi - lo - 1)
}

/// All unordered type pairs `(lo, hi)` in [`pair_index`] order.
pub fn type_pairs(num_types: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..num_types).flat_map(move |a| (a + 1..num_types).map(move |b| (a, b)))
}

impl HetGraph {
    /// Builds a graph from an edge list. Node names default to their indices
    /// and type names to `1..=L`.
    pub fn build(
        type_sizes: &[usize],
        edges: &[(NodeRef, NodeRef, f64)],
        mode: BuildMode,
    ) -> Result<Self, GraphError> {
        let type_names = (1..=type_sizes.len()).map(|l| l.to_string()).collect();
        let node_names = type_sizes
            .iter()
            .map(|&n| (0..n).map(|i| i.to_string()).collect())
            .collect();
        Self::build_named(type_sizes, type_names, node_names, edges, mode)
    }

    pub fn build_named(
        type_sizes: &[usize],
        type_names: Vec<String>,
        node_names: Vec<Vec<String>>,
        edges: &[(NodeRef, NodeRef, f64)],
        mode: BuildMode,
    ) -> Result<Self, GraphError> {
        let num_types = type_sizes.len();
        if num_types == 0 {
            return Err(GraphError::NoTypes);
        }
        if type_names.len() != num_types || node_names.len() != num_types {
            return Err(GraphError::TypeCountMismatch {
                expected: num_types,
                got: type_names.len().min(node_names.len()),
            });
        }
        let num_pairs = num_types * (num_types - 1) / 2;

        let mut homo_maps: Vec<Vec<HashMap<usize, f64>>> = type_sizes
            .iter()
            .map(|&n| vec![HashMap::new(); n])
            .collect();
        let mut loops: Vec<Vec<f64>> = type_sizes.iter().map(|&n| vec![0.0; n]).collect();
        let mut cross_maps: Vec<Vec<HashMap<usize, f64>>> = Vec::with_capacity(num_pairs);
        for (lo, _) in type_pairs(num_types) {
            cross_maps.push(vec![HashMap::new(); type_sizes[lo]]);
        }

        for &(u, v, w) in edges {
            for node in [u, v] {
                if node.node_type >= num_types || node.index >= type_sizes[node.node_type] {
                    return Err(GraphError::NodeOutOfRange { node });
                }
            }
            if !w.is_finite() || w < 0.0 {
                return Err(GraphError::InvalidWeight { u, v, weight: w });
            }
            if mode == BuildMode::Simple {
                if w != 1.0 {
                    return Err(GraphError::NonUnitWeight { u, v, weight: w });
                }
                if u == v {
                    return Err(GraphError::SelfLoop { node: u });
                }
            }
            if u == v {
                loops[u.node_type][u.index] += w;
                continue;
            }
            let duplicate = if u.node_type == v.node_type {
                let rows = &mut homo_maps[u.node_type];
                let dup = rows[u.index].contains_key(&v.index);
                *rows[u.index].entry(v.index).or_insert(0.0) += w;
                *rows[v.index].entry(u.index).or_insert(0.0) += w;
                dup
            } else {
                let (a, b) = if u.node_type < v.node_type { (u, v) } else { (v, u) };
                let p = pair_index(num_types, a.node_type, b.node_type);
                let row = &mut cross_maps[p][a.index];
                let dup = row.contains_key(&b.index);
                *row.entry(b.index).or_insert(0.0) += w;
                dup
            };
            if duplicate && mode == BuildMode::Simple {
                return Err(GraphError::DuplicateEdge { u, v });
            }
        }

        let homo = homo_maps
            .into_iter()
            .zip(loops)
            .map(|(rows, loops)| {
                let adj: Vec<Vec<Neighbor>> = rows.into_iter().map(sorted_row).collect();
                let degrees: Vec<f64> = adj
                    .iter()
                    .zip(&loops)
                    .map(|(row, &w)| row.iter().map(|&(_, x)| x).sum::<f64>() + 2.0 * w)
                    .collect();
                let edge_weight = degrees.iter().sum::<f64>() / 2.0;
                HomoBlock {
                    adj,
                    loops,
                    degrees,
                    edge_weight,
                }
            })
            .collect();

        let cross = cross_maps
            .into_iter()
            .zip(type_pairs(num_types))
            .map(|(rows, (_, hi))| {
                let forward: Vec<Vec<Neighbor>> = rows.into_iter().map(sorted_row).collect();
                let mut backward: Vec<Vec<Neighbor>> = vec![Vec::new(); type_sizes[hi]];
                for (i, row) in forward.iter().enumerate() {
                    for &(j, w) in row {
                        backward[j].push((i, w));
                    }
                }
                let forward_degrees: Vec<f64> = forward.iter().map(|r| row_sum(r)).collect();
                let backward_degrees: Vec<f64> = backward.iter().map(|r| row_sum(r)).collect();
                let edge_weight = forward_degrees.iter().sum();
                CrossBlock {
                    forward,
                    backward,
                    forward_degrees,
                    backward_degrees,
                    edge_weight,
                }
            })
            .collect();

        Ok(Self {
            type_sizes: type_sizes.to_vec(),
            type_names,
            node_names,
            homo,
            cross,
        })
    }

    pub fn num_types(&self) -> usize {
        self.type_sizes.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.cross.len()
    }

    pub fn type_size(&self, l: usize) -> usize {
        self.type_sizes[l]
    }

    pub fn type_sizes(&self) -> &[usize] {
        &self.type_sizes
    }

    pub fn total_nodes(&self) -> usize {
        self.type_sizes.iter().sum()
    }

    pub fn type_name(&self, l: usize) -> &str {
        &self.type_names[l]
    }

    pub fn type_names(&self) -> &[String] {
        &self.type_names
    }

    pub fn node_name(&self, node: NodeRef) -> &str {
        &self.node_names[node.node_type][node.index]
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeRef> + '_ {
        self.type_sizes
            .iter()
            .enumerate()
            .flat_map(|(l, &n)| (0..n).map(move |i| NodeRef::new(l, i)))
    }

    /// `d[l]_i`, including twice any self-loop weight.
    pub fn homo_degree(&self, l: usize, i: usize) -> f64 {
        self.homo[l].degrees[i]
    }

    pub fn homo_degrees(&self, l: usize) -> &[f64] {
        &self.homo[l].degrees
    }

    /// `m[l]`: total edge weight inside type `l`.
    pub fn homo_edge_count(&self, l: usize) -> f64 {
        self.homo[l].edge_weight
    }

    /// Off-diagonal neighbors of node `i` within its own type.
    pub fn homo_neighbors(&self, l: usize, i: usize) -> &[Neighbor] {
        &self.homo[l].adj[i]
    }

    /// Self-loop edge weight `w` of node `i` (matrix entry `A_ii = 2w`).
    pub fn self_loop(&self, l: usize, i: usize) -> f64 {
        self.homo[l].loops[i]
    }

    /// `d[from,to]_i`: weight from node `i` of type `from` into type `to`.
    pub fn cross_degree(&self, from: usize, to: usize, i: usize) -> f64 {
        let block = &self.cross[pair_index(self.num_types(), from, to)];
        if from < to {
            block.forward_degrees[i]
        } else {
            block.backward_degrees[i]
        }
    }

    pub fn cross_degrees(&self, from: usize, to: usize) -> &[f64] {
        let block = &self.cross[pair_index(self.num_types(), from, to)];
        if from < to {
            &block.forward_degrees
        } else {
            &block.backward_degrees
        }
    }

    /// `m[l1,l2]`: total edge weight between two distinct types.
    pub fn cross_edge_count(&self, a: usize, b: usize) -> f64 {
        self.cross[pair_index(self.num_types(), a, b)].edge_weight
    }

    /// Neighbors in type `to` of node `i` of type `from`.
    pub fn cross_neighbors(&self, from: usize, to: usize, i: usize) -> &[Neighbor] {
        let block = &self.cross[pair_index(self.num_types(), from, to)];
        if from < to {
            &block.forward[i]
        } else {
            &block.backward[i]
        }
    }

    /// Matrix entry of the full adjacency at `(u, v)`; symmetric.
    pub fn weight(&self, u: NodeRef, v: NodeRef) -> f64 {
        if u == v {
            return 2.0 * self.self_loop(u.node_type, u.index);
        }
        let row = if u.node_type == v.node_type {
            self.homo_neighbors(u.node_type, u.index)
        } else {
            self.cross_neighbors(u.node_type, v.node_type, u.index)
        };
        row.binary_search_by_key(&v.index, |&(j, _)| j)
            .map(|pos| row[pos].1)
            .unwrap_or(0.0)
    }

    /// Every edge once as `(u, v, weight)`: homo edges with `u.index <= v.index`
    /// (self-loops carry their edge weight), cross edges oriented from the
    /// lower type id.
    pub fn edges(&self) -> Vec<(NodeRef, NodeRef, f64)> {
        let mut out = Vec::new();
        for (l, block) in self.homo.iter().enumerate() {
            for (i, row) in block.adj.iter().enumerate() {
                if block.loops[i] > 0.0 {
                    out.push((NodeRef::new(l, i), NodeRef::new(l, i), block.loops[i]));
                }
                for &(j, w) in row.iter().filter(|&&(j, _)| j > i) {
                    out.push((NodeRef::new(l, i), NodeRef::new(l, j), w));
                }
            }
        }
        for ((lo, hi), block) in type_pairs(self.num_types()).zip(&self.cross) {
            for (i, row) in block.forward.iter().enumerate() {
                for &(j, w) in row {
                    out.push((NodeRef::new(lo, i), NodeRef::new(hi, j), w));
                }
            }
        }
        out
    }

    pub fn num_edges(&self) -> usize {
        let homo: usize = self
            .homo
            .iter()
            .map(|b| {
                b.adj.iter().map(Vec::len).sum::<usize>() / 2
                    + b.loops.iter().filter(|&&w| w > 0.0).count()
            })
            .sum();
        let cross: usize = self
            .cross
            .iter()
            .map(|b| b.forward.iter().map(Vec::len).sum::<usize>())
            .sum();
        homo + cross
    }

    /// Total edge weight over all blocks.
    pub fn total_weight(&self) -> f64 {
        self.homo.iter().map(|b| b.edge_weight).sum::<f64>()
            + self.cross.iter().map(|b| b.edge_weight).sum::<f64>()
    }
}

fn sorted_row(map: HashMap<usize, f64>) -> Vec<Neighbor> {
    let mut row: Vec<Neighbor> = map.into_iter().collect();
    row.sort_unstable_by_key(|&(j, _)| j);
    row
}

fn row_sum(row: &[Neighbor]) -> f64 {
    row.iter().map(|&(_, w)| w).sum()
}

/// Which block a summary row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockId {
    Homo(usize),
    /// Ordered pair `(from, to)`; the degree column is `d[from,to]`.
    Cross(usize, usize),
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockId::Homo(l) => write!(f, "[{}]", l + 1),
            BlockId::Cross(a, b) => write!(f, "[{}{}]", a + 1, b + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockSummary {
    pub block: BlockId,
    pub max_degree: f64,
    pub edge_count: f64,
    /// Whether the sparsity/density conditions under which the degree-product
    /// null expectations are asymptotically exact hold for this block. The
    /// free constant in those conditions is fixed at `eta = 1`.
    pub density_conditions_hold: bool,
}

/// Per-block max degree and edge weight, with a diagnostic on whether the
/// null-model approximation conditions hold. Detection ignores the flag.
pub fn degree_summary(g: &HetGraph) -> Vec<BlockSummary> {
    const ETA: f64 = 1.0;
    let num_types = g.num_types();
    let mut sizes: Vec<usize> = g.type_sizes().to_vec();
    sizes.sort_unstable();
    let n_min = sizes.first().copied().unwrap_or(0) as f64;
    let n_max = sizes.last().copied().unwrap_or(0) as f64;
    let degree_cap = |n: f64| if n > 1.0 { n.ln().cbrt() } else { 0.0 };

    let max_of = |xs: &[f64]| xs.iter().copied().fold(0.0_f64, f64::max);
    let mut out = Vec::new();
    for l in 0..num_types {
        let max_degree = max_of(g.homo_degrees(l));
        let m = g.homo_edge_count(l);
        let n_l = g.type_size(l) as f64;
        let ok = max_degree <= degree_cap(n_l)
            && m >= (ETA * max_degree).max((1.0 + ETA) * n_l)
            && m > 0.0;
        out.push(BlockSummary {
            block: BlockId::Homo(l),
            max_degree,
            edge_count: m,
            density_conditions_hold: ok,
        });
    }
    for a in 0..num_types {
        for b in 0..num_types {
            if a == b {
                continue;
            }
            let max_degree = max_of(g.cross_degrees(a, b));
            let max_reverse = max_of(g.cross_degrees(b, a));
            let m = g.cross_edge_count(a, b);
            let ok = max_degree <= degree_cap(n_min)
                && max_reverse <= degree_cap(n_min)
                && m >= ((2.0 + ETA) * n_max)
                    .max(ETA * max_degree)
                    .max(ETA * max_reverse)
                && m > 0.0;
            out.push(BlockSummary {
                block: BlockId::Cross(a, b),
                max_degree,
                edge_count: m,
                density_conditions_hold: ok,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(a: (usize, usize), b: (usize, usize)) -> (NodeRef, NodeRef, f64) {
        (NodeRef::new(a.0, a.1), NodeRef::new(b.0, b.1), 1.0)
    }

    #[test]
    fn two_type_counts() {
        let g = HetGraph::build(&[2, 1], &[e((0, 0), (0, 1)), e((0, 0), (1, 0))], BuildMode::Simple)
            .unwrap();
        assert_eq!(g.homo_edge_count(0), 1.0);
        assert_eq!(g.cross_edge_count(0, 1), 1.0);
        assert_eq!(g.homo_degrees(0), &[1.0, 1.0]);
        assert_eq!(g.cross_degrees(0, 1), &[1.0, 0.0]);
        assert_eq!(g.cross_degrees(1, 0), &[1.0]);
        assert_eq!(g.homo_edge_count(1), 0.0);
    }

    #[test]
    fn triangle() {
        let g = HetGraph::build(
            &[3],
            &[e((0, 0), (0, 1)), e((0, 1), (0, 2)), e((0, 2), (0, 0))],
            BuildMode::Simple,
        )
        .unwrap();
        assert_eq!(g.homo_degrees(0), &[2.0, 2.0, 2.0]);
        assert_eq!(g.homo_edge_count(0), 3.0);
    }

    #[test]
    fn three_types_cross_only() {
        let g = HetGraph::build(
            &[2, 2, 2],
            &[e((0, 0), (1, 0)), e((0, 1), (2, 1)), e((2, 0), (1, 1))],
            BuildMode::Simple,
        )
        .unwrap();
        for (a, b) in type_pairs(3) {
            assert_eq!(g.cross_edge_count(a, b), 1.0);
            assert_eq!(g.cross_edge_count(b, a), 1.0);
        }
        for l in 0..3 {
            assert_eq!(g.homo_edge_count(l), 0.0);
        }
    }

    #[test]
    fn pair_index_is_dense() {
        for l in 1..6 {
            let idx: Vec<usize> = type_pairs(l).map(|(a, b)| pair_index(l, a, b)).collect();
            assert_eq!(idx, (0..l * (l - 1) / 2).collect::<Vec<_>>());
            for (a, b) in type_pairs(l) {
                assert_eq!(pair_index(l, a, b), pair_index(l, b, a));
            }
        }
    }

    #[test]
    fn simple_mode_rejections() {
        let loop_err = HetGraph::build(&[2], &[e((0, 1), (0, 1))], BuildMode::Simple);
        assert!(matches!(loop_err, Err(GraphError::SelfLoop { .. })));
        let dup = HetGraph::build(&[2], &[e((0, 0), (0, 1)), e((0, 1), (0, 0))], BuildMode::Simple);
        assert!(matches!(dup, Err(GraphError::DuplicateEdge { .. })));
        let dup_cross =
            HetGraph::build(&[1, 1], &[e((0, 0), (1, 0)), e((1, 0), (0, 0))], BuildMode::Simple);
        assert!(matches!(dup_cross, Err(GraphError::DuplicateEdge { .. })));
        let oob = HetGraph::build(&[2], &[e((0, 0), (0, 2))], BuildMode::Simple);
        assert!(matches!(oob, Err(GraphError::NodeOutOfRange { .. })));
        let bad_type = HetGraph::build(&[2], &[e((0, 0), (1, 0))], BuildMode::Simple);
        assert!(matches!(bad_type, Err(GraphError::NodeOutOfRange { .. })));
        let neg = HetGraph::build(
            &[2],
            &[(NodeRef::new(0, 0), NodeRef::new(0, 1), -1.0)],
            BuildMode::Weighted,
        );
        assert!(matches!(neg, Err(GraphError::InvalidWeight { .. })));
        let heavy = HetGraph::build(
            &[2],
            &[(NodeRef::new(0, 0), NodeRef::new(0, 1), 2.0)],
            BuildMode::Simple,
        );
        assert!(matches!(heavy, Err(GraphError::NonUnitWeight { .. })));
    }

    #[test]
    fn weighted_mode_sums_and_loops() {
        let a = NodeRef::new(0, 0);
        let b = NodeRef::new(0, 1);
        let g = HetGraph::build(&[2], &[(a, b, 1.5), (b, a, 0.5), (a, a, 3.0)], BuildMode::Weighted)
            .unwrap();
        assert_eq!(g.weight(a, b), 2.0);
        assert_eq!(g.weight(b, a), 2.0);
        assert_eq!(g.weight(a, a), 6.0);
        assert_eq!(g.homo_degrees(0), &[8.0, 2.0]);
        assert_eq!(g.homo_edge_count(0), 5.0);
    }

    #[test]
    fn summary_of_empty_graph() {
        let g = HetGraph::build(&[3, 2], &[], BuildMode::Simple).unwrap();
        for row in degree_summary(&g) {
            assert_eq!(row.edge_count, 0.0);
            assert_eq!(row.max_degree, 0.0);
            assert!(!row.density_conditions_hold);
        }
    }

    #[test]
    fn summary_of_star() {
        let edges: Vec<_> = (1..5).map(|j| e((0, 0), (0, j))).collect();
        let g = HetGraph::build(&[5], &edges, BuildMode::Simple).unwrap();
        let s = degree_summary(&g);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].block, BlockId::Homo(0));
        assert_eq!(s[0].max_degree, 4.0);
        assert_eq!(s[0].edge_count, 4.0);
    }
}
