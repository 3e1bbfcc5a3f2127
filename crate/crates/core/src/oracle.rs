//! Brute-force references for tiny instances.
//!
//! [`max_modularity_exhaustive`] scores every set partition of the combined
//! node set. [`NullCounter`] counts the simple graphs (or bipartite graphs)
//! with a given degree sequence, exactly, which yields the exact expectation
//! of every adjacency entry under the uniform degree-preserving null.

use std::collections::HashMap;

use thiserror::Error;

use crate::graph::HetGraph;
use crate::modularity::{CommunityState, Partition};

/// Largest total node count accepted by the exhaustive maximizer.
pub const MAX_EXHAUSTIVE_NODES: usize = 12;
/// Largest number of nodes per side accepted by the null counter.
pub const MAX_NULL_SIDE: usize = 8;

/// Partitions within this much of the maximum count as maximizers.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("{nodes} nodes exceed the exhaustive limit of {limit}")]
    TooLarge { nodes: usize, limit: usize },
    #[error("no simple graph has this degree sequence")]
    Infeasible,
    #[error("node index {0} out of range")]
    OutOfRange(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExhaustiveResult {
    pub best_modularity: f64,
    /// Every partition within `1e-12` of the maximum.
    pub maximizers: Vec<Partition>,
    pub partitions_scored: u64,
}

/// Maximizes block modularity over all set partitions of the nodes (types
/// may mix inside a community).
pub fn max_modularity_exhaustive(g: &HetGraph) -> Result<ExhaustiveResult, OracleError> {
    let n = g.total_nodes();
    if n > MAX_EXHAUSTIVE_NODES {
        return Err(OracleError::TooLarge {
            nodes: n,
            limit: MAX_EXHAUSTIVE_NODES,
        });
    }
    let sizes = g.type_sizes().to_vec();
    let split = |flat: &[usize]| -> Vec<Vec<usize>> {
        let mut out = Vec::with_capacity(sizes.len());
        let mut start = 0;
        for &s in &sizes {
            out.push(flat[start..start + s].to_vec());
            start += s;
        }
        out
    };

    let mut best = f64::NEG_INFINITY;
    let mut argmax: Vec<Vec<usize>> = Vec::new();
    let mut scored = 0u64;
    // restricted growth strings: rgs[0] = 0, rgs[i] <= 1 + max(rgs[..i])
    let mut rgs = vec![0usize; n];
    let mut maxes = vec![0usize; n];
    loop {
        let k = if n == 0 { 0 } else { maxes[n - 1] + 1 };
        let labels = split(&rgs);
        let q = CommunityState::new(g, &labels, k).quality();
        scored += 1;
        if q > best + TIE_TOL {
            best = q;
            argmax.clear();
            argmax.push(rgs.clone());
        } else if (q - best).abs() <= TIE_TOL {
            argmax.push(rgs.clone());
            best = best.max(q);
        }

        // next restricted growth string
        let mut i = n;
        loop {
            if i <= 1 {
                let maximizers = argmax
                    .iter()
                    .map(|flat| Partition::from_raw(&split(flat)))
                    .collect();
                return Ok(ExhaustiveResult {
                    best_modularity: if n == 0 { 0.0 } else { best },
                    maximizers,
                    partitions_scored: scored,
                });
            }
            i -= 1;
            if rgs[i] <= maxes[i - 1] {
                rgs[i] += 1;
                maxes[i] = maxes[i - 1].max(rgs[i]);
                for j in i + 1..n {
                    rgs[j] = 0;
                    maxes[j] = maxes[i];
                }
                break;
            }
        }
    }
}

/// Degree sequence of one block of the null model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DegreeSpec {
    /// Simple graph on one node set.
    Homogeneous(Vec<usize>),
    /// Bipartite graph with these row and column degrees.
    Bipartite { rows: Vec<usize>, cols: Vec<usize> },
}

/// Exact counts: `total = |Sigma_D|` and `pairs[i][j]` = number of graphs in
/// `Sigma_D` containing edge `(i, j)` (rows by columns for bipartite specs).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NullCounts {
    pub total: u128,
    pub pairs: Vec<Vec<u128>>,
}

impl NullCounts {
    pub fn expectation(&self, i: usize, j: usize) -> f64 {
        self.pairs[i][j] as f64 / self.total as f64
    }

    pub fn expectations(&self) -> Vec<Vec<f64>> {
        self.pairs
            .iter()
            .map(|row| row.iter().map(|&c| c as f64 / self.total as f64).collect())
            .collect()
    }
}

/// Memoized counter of graphs with prescribed degrees. Reusing one counter
/// across many sequences shares the memo tables.
#[derive(Debug, Default)]
pub struct NullCounter {
    homo_memo: HashMap<Vec<u8>, u128>,
    bip_memo: HashMap<(Vec<u8>, Vec<u8>), u128>,
}

fn sorted_key(xs: impl IntoIterator<Item = usize>) -> Vec<u8> {
    let mut v: Vec<u8> = xs.into_iter().map(|x| x as u8).collect();
    v.sort_unstable_by(|a, b| b.cmp(a));
    v
}

/// Calls `f` with every `k`-subset of `items` (as a bitmask over positions).
fn for_each_subset(len: usize, k: usize, mut f: impl FnMut(u32)) {
    if k > len {
        return;
    }
    let full: u32 = 1 << len;
    for mask in 0..full {
        if mask.count_ones() as usize == k {
            f(mask);
        }
    }
}

impl NullCounter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of labeled simple graphs with degree multiset `degrees`.
    fn homo_count(&mut self, degrees: Vec<u8>) -> u128 {
        if degrees.iter().all(|&d| d == 0) {
            return 1;
        }
        if let Some(&c) = self.homo_memo.get(&degrees) {
            return c;
        }
        // first entry is the largest; connect it to a subset of the rest
        let d0 = degrees[0] as usize;
        let rest = &degrees[1..];
        let mut total = 0u128;
        let mut next = Vec::with_capacity(rest.len());
        for_each_subset(rest.len(), d0, |mask| {
            next.clear();
            for (p, &d) in rest.iter().enumerate() {
                if mask & (1 << p) != 0 {
                    if d == 0 {
                        return;
                    }
                    next.push(d - 1);
                } else {
                    next.push(d);
                }
            }
            let mut key = next.clone();
            key.sort_unstable_by(|a, b| b.cmp(a));
            total += self.homo_count(key);
        });
        self.homo_memo.insert(degrees, total);
        total
    }

    /// Number of 0-1 matrices with row sums `rows` and column sums `cols`.
    fn bip_count(&mut self, rows: Vec<u8>, cols: Vec<u8>) -> u128 {
        if rows.is_empty() {
            return u128::from(cols.iter().all(|&c| c == 0));
        }
        let key = (rows, cols);
        if let Some(&c) = self.bip_memo.get(&key) {
            return c;
        }
        let (rows, cols) = key;
        let r0 = rows[0] as usize;
        let rest_rows = rows[1..].to_vec();
        let mut total = 0u128;
        for_each_subset(cols.len(), r0, |mask| {
            let mut next = cols.clone();
            for (p, c) in next.iter_mut().enumerate() {
                if mask & (1 << p) != 0 {
                    if *c == 0 {
                        return;
                    }
                    *c -= 1;
                }
            }
            next.sort_unstable_by(|a, b| b.cmp(a));
            total += self.bip_count(rest_rows.clone(), next);
        });
        self.bip_memo.insert((rows, cols), total);
        total
    }

    /// Graphs on `degrees` where vertex `i` is first joined to `need` other
    /// vertices, never to `forced_out`, and the rest is unconstrained.
    fn homo_with_first(&mut self, degrees: &[usize], i: usize, need: usize, forced_out: Option<usize>) -> u128 {
        let others: Vec<(usize, usize)> = degrees
            .iter()
            .enumerate()
            .filter(|&(v, _)| v != i)
            .map(|(v, &d)| (v, d))
            .collect();
        let mut total = 0u128;
        let mut next = Vec::with_capacity(others.len());
        for_each_subset(others.len(), need, |mask| {
            next.clear();
            for (p, &(v, d)) in others.iter().enumerate() {
                let chosen = mask & (1 << p) != 0;
                if chosen && (Some(v) == forced_out || d == 0) {
                    return;
                }
                next.push(if chosen { d - 1 } else { d });
            }
            total += self.homo_count(sorted_key(next.iter().copied()));
        });
        total
    }

    fn bip_with_first(&mut self, rows: &[usize], cols: &[usize], i: usize, forced: Option<usize>) -> u128 {
        let rest_rows = sorted_key(rows.iter().enumerate().filter(|&(r, _)| r != i).map(|(_, &d)| d));
        let mut need = rows[i];
        let mut cols = cols.to_vec();
        if let Some(j) = forced {
            if need == 0 || cols[j] == 0 {
                return 0;
            }
            need -= 1;
            cols[j] -= 1;
        }
        let mut total = 0u128;
        for_each_subset(cols.len(), need, |mask| {
            let mut next = cols.clone();
            for (p, c) in next.iter_mut().enumerate() {
                if mask & (1 << p) != 0 {
                    if *c == 0 || Some(p) == forced {
                        return;
                    }
                    *c -= 1;
                }
            }
            total += self.bip_count(rest_rows.clone(), sorted_key(next));
        });
        total
    }

    /// Exact `|Sigma_D|` and per-pair edge counts.
    pub fn counts(&mut self, spec: &DegreeSpec) -> Result<NullCounts, OracleError> {
        match spec {
            DegreeSpec::Homogeneous(d) => {
                let n = d.len();
                if n > MAX_NULL_SIDE {
                    return Err(OracleError::TooLarge {
                        nodes: n,
                        limit: MAX_NULL_SIDE,
                    });
                }
                if d.iter().any(|&x| x >= n.max(1)) && n > 0 {
                    return Err(OracleError::Infeasible);
                }
                let total = self.homo_count(sorted_key(d.iter().copied()));
                if total == 0 {
                    return Err(OracleError::Infeasible);
                }
                let mut pairs = vec![vec![0u128; n]; n];
                for i in 0..n {
                    for j in i + 1..n {
                        if d[i] == 0 || d[j] == 0 {
                            continue;
                        }
                        let mut reduced = d.clone();
                        reduced[j] -= 1;
                        // i takes j plus d_i - 1 others, never j again
                        let c = self.homo_with_first(&reduced, i, d[i] - 1, Some(j));
                        pairs[i][j] = c;
                        pairs[j][i] = c;
                    }
                }
                Ok(NullCounts { total, pairs })
            }
            DegreeSpec::Bipartite { rows, cols } => {
                let side = rows.len().max(cols.len());
                if side > MAX_NULL_SIDE {
                    return Err(OracleError::TooLarge {
                        nodes: side,
                        limit: MAX_NULL_SIDE,
                    });
                }
                if rows.iter().any(|&r| r > cols.len()) || cols.iter().any(|&c| c > rows.len()) {
                    return Err(OracleError::Infeasible);
                }
                let total = self.bip_count(sorted_key(rows.iter().copied()), sorted_key(cols.iter().copied()));
                if total == 0 {
                    return Err(OracleError::Infeasible);
                }
                let mut pairs = vec![vec![0u128; cols.len()]; rows.len()];
                for (i, row) in pairs.iter_mut().enumerate() {
                    for (j, cell) in row.iter_mut().enumerate() {
                        *cell = self.bip_with_first(rows, cols, i, Some(j));
                    }
                }
                Ok(NullCounts { total, pairs })
            }
        }
    }
}

/// Exact `E(A_ij)` under the uniform null over graphs with the given degrees.
pub fn exact_null_expectation(spec: &DegreeSpec, i: usize, j: usize) -> Result<f64, OracleError> {
    let (n_rows, n_cols) = match spec {
        DegreeSpec::Homogeneous(d) => (d.len(), d.len()),
        DegreeSpec::Bipartite { rows, cols } => (rows.len(), cols.len()),
    };
    if i >= n_rows {
        return Err(OracleError::OutOfRange(i));
    }
    if j >= n_cols {
        return Err(OracleError::OutOfRange(j));
    }
    Ok(NullCounter::new().counts(spec)?.expectation(i, j))
}
