#![allow(dead_code)]

use hetcomm::graph::{BuildMode, HetGraph, NodeRef};
use hetcomm::modularity::Partition;
use hetcomm::sbm::{Matrix, SbmSpec};
use rand::Rng;

/// Random graph with `num_types` types of 1..=`max_size` nodes. Each block
/// gets its own density, and about one block in five is left empty.
pub fn random_graph<R: Rng>(rng: &mut R, num_types: usize, max_size: usize, weighted: bool) -> HetGraph {
    let sizes: Vec<usize> = (0..num_types).map(|_| rng.gen_range(1..=max_size)).collect();
    let mut edges = Vec::new();
    for a in 0..num_types {
        for b in a..num_types {
            let p = if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.1..0.9) };
            for i in 0..sizes[a] {
                let start = if a == b { i } else { 0 };
                for j in start..sizes[b] {
                    if a == b && i == j && !(weighted && rng.gen_bool(0.2)) {
                        continue;
                    }
                    if rng.gen_bool(p) {
                        let w = if weighted { rng.gen_range(1..=3) as f64 } else { 1.0 };
                        edges.push((NodeRef::new(a, i), NodeRef::new(b, j), w));
                    }
                }
            }
        }
    }
    let mode = if weighted { BuildMode::Weighted } else { BuildMode::Simple };
    HetGraph::build(&sizes, &edges, mode).unwrap()
}

pub fn random_partition<R: Rng>(rng: &mut R, g: &HetGraph, max_k: usize) -> Partition {
    let k = rng.gen_range(1..=max_k);
    let raw: Vec<Vec<usize>> = g
        .type_sizes()
        .iter()
        .map(|&n| (0..n).map(|_| rng.gen_range(0..k)).collect())
        .collect();
    Partition::from_raw(&raw)
}

/// Random SBM: 1..=3 types, 1..=3 communities of 1..=5 nodes each.
pub fn random_sbm<R: Rng>(rng: &mut R) -> SbmSpec {
    let nt = rng.gen_range(1..=3);
    let k = rng.gen_range(1..=3);
    let community_sizes = (0..nt)
        .map(|_| (0..k).map(|_| rng.gen_range(1..=5)).collect())
        .collect();
    let homo_probs = (0..nt)
        .map(|_| {
            let mut data = vec![0.0; k * k];
            for a in 0..k {
                for b in a..k {
                    let p = rng.gen_range(0.0..1.0);
                    data[a * k + b] = p;
                    data[b * k + a] = p;
                }
            }
            Matrix::from_rows(k, data)
        })
        .collect();
    let cross_probs = (0..nt * (nt - 1) / 2)
        .map(|_| Matrix::from_rows(k, (0..k * k).map(|_| rng.gen_range(0.0..1.0)).collect()))
        .collect();
    SbmSpec {
        community_sizes,
        homo_probs,
        cross_probs,
        rho: 1.0,
    }
}

/// Modularity by the definition: a double loop over every ordered pair of
/// nodes, with degrees and edge counts recomputed from `weight`.
pub fn naive_modularity(g: &HetGraph, p: &Partition) -> f64 {
    let nt = g.num_types();
    let nodes: Vec<NodeRef> = g.nodes().collect();
    // deg[a][b][i]: weight from node i of type a into type b
    let mut deg = vec![vec![Vec::new(); nt]; nt];
    for a in 0..nt {
        for b in 0..nt {
            deg[a][b] = (0..g.type_size(a))
                .map(|i| {
                    (0..g.type_size(b))
                        .map(|j| g.weight(NodeRef::new(a, i), NodeRef::new(b, j)))
                        .sum::<f64>()
                })
                .collect::<Vec<f64>>();
        }
    }
    let mut q = 0.0;
    for a in 0..nt {
        for b in 0..nt {
            // total of the block's matrix: 2m for homo, m for cross
            let total: f64 = deg[a][b].iter().sum();
            if total == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for &u in nodes.iter().filter(|u| u.node_type == a) {
                for &v in nodes.iter().filter(|v| v.node_type == b) {
                    if p.label(u) != p.label(v) {
                        continue;
                    }
                    let e = deg[a][b][u.index] * deg[b][a][v.index] / total;
                    s += g.weight(u, v) - e;
                }
            }
            q += s / total;
        }
    }
    q / (nt * nt) as f64
}
