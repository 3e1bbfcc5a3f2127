//! Homogeneous comparison methods built on the same Louvain engine.
//!
//! * [`method1`] flattens the network into one single-type graph, ignoring
//!   node and edge types.
//! * [`method2`] keeps only the within-type edges and clusters each type on
//!   its own.
//!
//! Both reduce to a one-type [`HetGraph`], on which block modularity is the
//! classic Newman-Girvan modularity, and hand it to [`louvain::run`].

use thiserror::Error;

use crate::graph::{BuildMode, HetGraph, NodeRef};
use crate::louvain::{self, LouvainConfig, LouvainError};
use crate::modularity::Partition;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("graph has no edges")]
    EmptyGraph,
    #[error(transparent)]
    Louvain(#[from] LouvainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMethod {
    /// Treat the whole network as one homogeneous graph.
    Flatten,
    /// Cluster each type's homogeneous graph separately.
    PerType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub method: BaselineMethod,
    /// `[l]`: labels of type-`l` nodes. For [`BaselineMethod::Flatten`] the
    /// ids are shared across types (one global partition).
    pub labels: Vec<Vec<usize>>,
    /// One value for `Flatten`, one per type for `PerType`.
    pub modularity: Vec<f64>,
    pub num_communities: Vec<usize>,
    /// `[l]`: the type had no within-type edges, so no structure could be
    /// recovered; its labels are singletons and scoring treats it as NMI 0.
    pub degenerate: Vec<bool>,
}

impl BaselineResult {
    /// The global partition for `Flatten`.
    pub fn partition(&self) -> Partition {
        Partition::from_raw(&self.labels)
    }
}

/// The single-type graph on all nodes, type blocks laid out consecutively.
pub fn flatten(g: &HetGraph) -> HetGraph {
    let offsets: Vec<usize> = g
        .type_sizes()
        .iter()
        .scan(0, |acc, &n| {
            let start = *acc;
            *acc += n;
            Some(start)
        })
        .collect();
    let edges: Vec<(NodeRef, NodeRef, f64)> = g
        .edges()
        .into_iter()
        .map(|(u, v, w)| {
            (
                NodeRef::new(0, offsets[u.node_type] + u.index),
                NodeRef::new(0, offsets[v.node_type] + v.index),
                w,
            )
        })
        .collect();
    HetGraph::build(&[g.total_nodes()], &edges, BuildMode::Weighted)
        .expect("flattened edges stay in range")
}

/// The within-type graph of type `l` on its own.
pub fn type_subgraph(g: &HetGraph, l: usize) -> HetGraph {
    let edges: Vec<(NodeRef, NodeRef, f64)> = g
        .edges()
        .into_iter()
        .filter(|(u, v, _)| u.node_type == l && v.node_type == l)
        .map(|(u, v, w)| (NodeRef::new(0, u.index), NodeRef::new(0, v.index), w))
        .collect();
    HetGraph::build(&[g.type_size(l)], &edges, BuildMode::Weighted)
        .expect("subgraph edges stay in range")
}

pub fn method1(g: &HetGraph, cfg: &LouvainConfig) -> Result<BaselineResult, BaselineError> {
    if g.num_edges() == 0 {
        return Err(BaselineError::EmptyGraph);
    }
    let flat = flatten(g);
    let res = louvain::run(&flat, cfg)?;
    let all = res.partition.labels(0);
    let mut labels = Vec::with_capacity(g.num_types());
    let mut start = 0;
    for &n in g.type_sizes() {
        labels.push(all[start..start + n].to_vec());
        start += n;
    }
    Ok(BaselineResult {
        method: BaselineMethod::Flatten,
        labels,
        modularity: vec![res.modularity],
        num_communities: vec![res.num_communities],
        degenerate: vec![false; g.num_types()],
    })
}

pub fn method2(g: &HetGraph, cfg: &LouvainConfig) -> Result<BaselineResult, BaselineError> {
    let mut out = BaselineResult {
        method: BaselineMethod::PerType,
        labels: Vec::new(),
        modularity: Vec::new(),
        num_communities: Vec::new(),
        degenerate: Vec::new(),
    };
    for l in 0..g.num_types() {
        let n = g.type_size(l);
        if g.homo_edge_count(l) == 0.0 {
            out.labels.push((0..n).collect());
            out.modularity.push(0.0);
            out.num_communities.push(n);
            out.degenerate.push(true);
            continue;
        }
        let sub = type_subgraph(g, l);
        let res = louvain::run(&sub, cfg)?;
        out.labels.push(res.partition.labels(0).to_vec());
        out.modularity.push(res.modularity);
        out.num_communities.push(res.num_communities);
        out.degenerate.push(false);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modularity::modularity;

    fn e(a: (usize, usize), b: (usize, usize)) -> (NodeRef, NodeRef, f64) {
        (NodeRef::new(a.0, a.1), NodeRef::new(b.0, b.1), 1.0)
    }

    #[test]
    fn flatten_single_type_is_identity() {
        let g = HetGraph::build(&[4], &[e((0, 0), (0, 1)), e((0, 2), (0, 3))], BuildMode::Simple)
            .unwrap();
        let f = flatten(&g);
        assert_eq!(f.edges(), g.edges());
        let p = Partition::new(vec![vec![0, 0, 1, 1]], 2).unwrap();
        assert_eq!(modularity(&f, &p).unwrap(), modularity(&g, &p).unwrap());
    }

    #[test]
    fn two_flattened_components() {
        let g = HetGraph::build(
            &[2, 2],
            &[e((0, 0), (1, 0)), e((0, 1), (1, 1))],
            BuildMode::Simple,
        )
        .unwrap();
        let r = method1(&g, &LouvainConfig::default().with_restarts(5)).unwrap();
        assert_eq!(r.num_communities, vec![2]);
        assert_eq!(r.labels[0][0], r.labels[1][0]);
        assert_eq!(r.labels[0][1], r.labels[1][1]);
        assert_ne!(r.labels[0][0], r.labels[0][1]);
    }

    #[test]
    fn empty_graph_errors_for_method1() {
        let g = HetGraph::build(&[2, 2], &[], BuildMode::Simple).unwrap();
        assert_eq!(method1(&g, &LouvainConfig::default()), Err(BaselineError::EmptyGraph));
    }

    #[test]
    fn method2_without_homo_edges() {
        let g = HetGraph::build(&[3, 2], &[e((0, 0), (1, 0))], BuildMode::Simple).unwrap();
        let r = method2(&g, &LouvainConfig::default().with_restarts(2)).unwrap();
        assert_eq!(r.degenerate, vec![true, true]);
        assert_eq!(r.labels, vec![vec![0, 1, 2], vec![0, 1]]);
    }
}
