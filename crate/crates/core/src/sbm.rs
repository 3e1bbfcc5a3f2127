//! Heterogeneous stochastic blockmodel: sampling, the three simulation
//! settings, and the consistency-condition checker.
//!
//! Every block is sampled from its own ChaCha8 stream (stream id = block id,
//! homo blocks first, then cross blocks in pair order), so adding a type does
//! not change the draws of existing blocks.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{pair_index, type_pairs, BuildMode, HetGraph, NodeRef};
use crate::modularity::Partition;

#[derive(Debug, Error, PartialEq)]
pub enum SbmError {
    #[error("spec needs at least one type and one community")]
    Empty,
    #[error("{what}: expected {expected} values, got {got}")]
    Shape {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("{what}[{row},{col}] = {value} is not a probability after scaling")]
    Probability {
        what: String,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("{what} must be symmetric; entry ({row},{col}) differs from its mirror")]
    Asymmetric { what: String, row: usize, col: usize },
    #[error("sparsity scale {0} must lie in (0, 1]")]
    Rho(f64),
    #[error("unknown simulation setting {0} (expected 1, 2 or 3)")]
    UnknownSetting(u8),
    #[error("r3 = {r3} outside the sweep range [{lo}, {hi}] of setting {setting}")]
    R3OutOfRange { setting: u8, r3: f64, lo: f64, hi: f64 },
    #[error("line {line}: {message}")]
    Config { line: usize, message: String },
}

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), dim * dim, "matrix data must be dim^2 long");
        Self { dim, data }
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Self::from_rows(dim, vec![value; dim * dim])
    }

    /// `base * 1 1' + diag * I`
    pub fn planted(dim: usize, base: f64, diag: f64) -> Self {
        let mut m = Self::filled(dim, base);
        for a in 0..dim {
            m.data[a * dim + a] += diag;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.data[a * self.dim + b]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        Self::from_rows(n, (0..n * n).map(|x| self.get(x % n, x / n)).collect())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.data.chunks(self.dim).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|b| (0..self.dim).map(|a| self.get(a, b)).sum())
            .collect()
    }

    fn is_symmetric(&self) -> Option<(usize, usize)> {
        for a in 0..self.dim {
            for b in a + 1..self.dim {
                if self.get(a, b) != self.get(b, a) {
                    return Some((a, b));
                }
            }
        }
        None
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.data.chunks(self.dim) {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:>10.6}")).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

/// Parameters of a heterogeneous SBM with exact community sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmSpec {
    /// `[l][a]`: number of type-`l` nodes in community `a`.
    pub community_sizes: Vec<Vec<usize>>,
    /// Symmetric `K x K` matrix per type.
    pub homo_probs: Vec<Matrix>,
    /// One matrix per unordered pair `(lo, hi)` in pair order, rows indexed
    /// by the community of the `lo` node. `P[hi,lo]` is its transpose.
    pub cross_probs: Vec<Matrix>,
    /// Multiplies every probability.
    pub rho: f64,
}

impl SbmSpec {
    pub fn num_types(&self) -> usize {
        self.community_sizes.len()
    }

    pub fn num_communities(&self) -> usize {
        self.community_sizes.first().map_or(0, Vec::len)
    }

    pub fn type_sizes(&self) -> Vec<usize> {
        self.community_sizes.iter().map(|s| s.iter().sum()).collect()
    }

    pub fn total_nodes(&self) -> usize {
        self.type_sizes().iter().sum()
    }

    /// `P[a,b]` for an ordered type pair, honoring the transpose identity.
    pub fn cross_matrix(&self, from: usize, to: usize) -> Matrix {
        let m = &self.cross_probs[pair_index(self.num_types(), from, to)];
        if from < to {
            m.clone()
        } else {
            m.transpose()
        }
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    /// Same probabilities with new per-type community sizes.
    pub fn with_community_sizes(mut self, sizes: Vec<Vec<usize>>) -> Self {
        self.community_sizes = sizes;
        self
    }

    /// `lambda = n * rho`, the expected-degree scale.
    pub fn lambda(&self) -> f64 {
        self.total_nodes() as f64 * self.rho
    }

    pub fn validate(&self) -> Result<(), SbmError> {
        let nt = self.num_types();
        let k = self.num_communities();
        if nt == 0 || k == 0 {
            return Err(SbmError::Empty);
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(SbmError::Rho(self.rho));
        }
        for (l, sizes) in self.community_sizes.iter().enumerate() {
            if sizes.len() != k {
                return Err(SbmError::Shape {
                    what: format!("sizes.{}", l + 1),
                    expected: k,
                    got: sizes.len(),
                });
            }
        }
        let check = |what: String, m: &Matrix, symmetric: bool| -> Result<(), SbmError> {
            if m.dim() != k {
                return Err(SbmError::Shape {
                    what,
                    expected: k * k,
                    got: m.data().len(),
                });
            }
            for a in 0..k {
                for b in 0..k {
                    let value = m.get(a, b) * self.rho;
                    if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                        return Err(SbmError::Probability {
                            what,
                            row: a,
                            col: b,
                            value,
                        });
                    }
                }
            }
            if symmetric {
                if let Some((row, col)) = m.is_symmetric() {
                    return Err(SbmError::Asymmetric { what, row, col });
                }
            }
            Ok(())
        };
        if self.homo_probs.len() != nt {
            return Err(SbmError::Shape {
                what: "homo matrices".into(),
                expected: nt,
                got: self.homo_probs.len(),
            });
        }
        if self.cross_probs.len() != nt * (nt - 1) / 2 {
            return Err(SbmError::Shape {
                what: "cross matrices".into(),
                expected: nt * (nt - 1) / 2,
                got: self.cross_probs.len(),
            });
        }
        for (l, m) in self.homo_probs.iter().enumerate() {
            check(format!("P.{}", l + 1), m, true)?;
        }
        for ((lo, hi), m) in type_pairs(nt).zip(&self.cross_probs) {
            check(format!("P.{}.{}", lo + 1, hi + 1), m, false)?;
        }
        Ok(())
    }

    /// Planted label of every node: consecutive runs by community.
    pub fn planted_labels(&self) -> Vec<Vec<usize>> {
        self.community_sizes
            .iter()
            .map(|sizes| {
                sizes
                    .iter()
                    .enumerate()
                    .flat_map(|(a, &n)| std::iter::repeat_n(a, n))
                    .collect()
            })
            .collect()
    }
}

/// Draws one network and returns it with its planted partition.
pub fn sample(spec: &SbmSpec, seed: u64) -> Result<(HetGraph, Partition), SbmError> {
    spec.validate()?;
    let nt = spec.num_types();
    let sizes = spec.type_sizes();
    let labels = spec.planted_labels();
    let mut edges = Vec::new();

    for l in 0..nt {
        let mut rng = block_rng(seed, l);
        let p = &spec.homo_probs[l];
        let c = &labels[l];
        for i in 0..sizes[l] {
            for j in i + 1..sizes[l] {
                if rng.gen::<f64>() < p.get(c[i], c[j]) * spec.rho {
                    edges.push((NodeRef::new(l, i), NodeRef::new(l, j), 1.0));
                }
            }
        }
    }
    for (pi, (lo, hi)) in type_pairs(nt).enumerate() {
        let mut rng = block_rng(seed, nt + pi);
        let p = &spec.cross_probs[pi];
        for i in 0..sizes[lo] {
            for j in 0..sizes[hi] {
                if rng.gen::<f64>() < p.get(labels[lo][i], labels[hi][j]) * spec.rho {
                    edges.push((NodeRef::new(lo, i), NodeRef::new(hi, j), 1.0));
                }
            }
        }
    }
    let g = HetGraph::build(&sizes, &edges, BuildMode::Simple)
        .expect("sampled pairs are distinct and in range");
    Ok((g, Partition::from_raw(&labels)))
}

fn block_rng(seed: u64, block: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block as u64);
    rng
}

/// Probability parameters shared by the three simulation settings.
pub const SETTING_P1: f64 = 0.1;
pub const SETTING_P2: f64 = 0.2;
pub const SETTING_P3: f64 = 0.05;

/// The simulation study design: `L = 2`, `K = 3`, 600 type-1 nodes (3 x 200)
/// and 300 type-2 nodes (3 x 100). `P[1] = p1 11' + r1 I`, likewise for
/// `P[2]` and the cross block with `p3, r3`.
///
/// | setting | r1   | r2  | r3 sweep      |
/// |---------|------|-----|---------------|
/// | 1       | 0.05 | 0.1 | 0.05 to 0.15  |
/// | 2       | 0.05 | 0   | 0.05 to 0.15  |
/// | 3       | 0    | 0   | 0.05 to 0.20  |
pub fn setting_spec(which: u8, r3: f64) -> Result<SbmSpec, SbmError> {
    let (r1, r2, r3_max) = match which {
        1 => (0.05, 0.1, 0.15),
        2 => (0.05, 0.0, 0.15),
        3 => (0.0, 0.0, 0.20),
        other => return Err(SbmError::UnknownSetting(other)),
    };
    let r3_min = 0.05;
    // tolerate grid arithmetic such as 0.05 + 4 * 0.025
    if !(r3 >= r3_min - 1e-9 && r3 <= r3_max + 1e-9) {
        return Err(SbmError::R3OutOfRange {
            setting: which,
            r3,
            lo: r3_min,
            hi: r3_max,
        });
    }
    let k = 3;
    Ok(SbmSpec {
        community_sizes: vec![vec![200; k], vec![100; k]],
        homo_probs: vec![
            Matrix::planted(k, SETTING_P1, r1),
            Matrix::planted(k, SETTING_P2, r2),
        ],
        cross_probs: vec![Matrix::planted(k, SETTING_P3, r3)],
        rho: 1.0,
    })
}

/// Which block a condition matrix belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbmBlock {
    Homo(usize),
    Cross(usize, usize),
}

impl fmt::Display for SbmBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SbmBlock::Homo(l) => write!(f, "[{}]", l + 1),
            SbmBlock::Cross(a, b) => write!(f, "[{}{}]", a + 1, b + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockCondition {
    pub block: SbmBlock,
    /// `T_ab = pi_a pi_b P_ab / sum`
    pub t: Matrix,
    /// `W = T - (T 1)(T 1)'`
    pub w: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    /// Per type `l`, `pi[l]_a = n[l]_a / n` with `n` the total node count.
    pub proportions: Vec<Vec<f64>>,
    pub blocks: Vec<BlockCondition>,
    /// Blocks left out because their `T` normalizer is zero.
    pub skipped: Vec<SbmBlock>,
    /// Sum of all `W` matrices over types and ordered type pairs.
    pub total: Matrix,
    pub diagonal_ok: Vec<bool>,
    /// `[a][b]` for `a != b`; the diagonal entries are `true`.
    pub off_diagonal_ok: Vec<Vec<bool>>,
    pub satisfied: bool,
}

/// Margin below which a condition sum counts as zero, so exact boundary
/// cases are reported as violated rather than decided by rounding.
pub const CONDITION_TOL: f64 = 1e-12;

/// Evaluates the W-matrix sign conditions for label recovery by maximizing
/// block modularity. `rho` cancels in `T`.
pub fn check_consistency(spec: &SbmSpec) -> Result<ConsistencyReport, SbmError> {
    spec.validate()?;
    let nt = spec.num_types();
    let k = spec.num_communities();
    let n = spec.total_nodes() as f64;
    let proportions: Vec<Vec<f64>> = spec
        .community_sizes
        .iter()
        .map(|s| s.iter().map(|&x| x as f64 / n).collect())
        .collect();

    let condition = |block: SbmBlock, pa: &[f64], pb: &[f64], p: &Matrix| {
        let raw: Vec<f64> = (0..k * k)
            .map(|x| pa[x / k] * pb[x % k] * p.get(x / k, x % k) * spec.rho)
            .collect();
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return None;
        }
        let t = Matrix::from_rows(k, raw.iter().map(|x| x / total).collect());
        let r = t.row_sums();
        let w = Matrix::from_rows(k, (0..k * k).map(|x| t.data()[x] - r[x / k] * r[x % k]).collect());
        Some(BlockCondition { block, t, w })
    };

    let mut blocks = Vec::new();
    let mut skipped = Vec::new();
    for l in 0..nt {
        let b = SbmBlock::Homo(l);
        match condition(b, &proportions[l], &proportions[l], &spec.homo_probs[l]) {
            Some(c) => blocks.push(c),
            None => skipped.push(b),
        }
    }
    for a in 0..nt {
        for b in (0..nt).filter(|&b| b != a) {
            let blk = SbmBlock::Cross(a, b);
            match condition(blk, &proportions[a], &proportions[b], &spec.cross_matrix(a, b)) {
                Some(c) => blocks.push(c),
                None => skipped.push(blk),
            }
        }
    }

    let mut sum = vec![0.0; k * k];
    for c in &blocks {
        for (s, w) in sum.iter_mut().zip(c.w.data()) {
            *s += w;
        }
    }
    let total = Matrix::from_rows(k, sum);
    let diagonal_ok: Vec<bool> = (0..k).map(|a| total.get(a, a) > CONDITION_TOL).collect();
    let off_diagonal_ok: Vec<Vec<bool>> = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| a == b || total.get(a, b) < -CONDITION_TOL)
                .collect()
        })
        .collect();
    let satisfied =
        !blocks.is_empty() && diagonal_ok.iter().all(|&x| x) && off_diagonal_ok.iter().flatten().all(|&x| x);
    Ok(ConsistencyReport {
        proportions,
        blocks,
        skipped,
        total,
        diagonal_ok,
        off_diagonal_ok,
        satisfied,
    })
}

/// Flat `key = value` serialization of an [`SbmSpec`] plus a seed.
///
/// ```text
/// num_types = 2
/// num_communities = 3
/// sizes.1 = 200, 200, 200
/// sizes.2 = 100, 100, 100
/// P.1 = 0.15 0.1 0.1  0.1 0.15 0.1  0.1 0.1 0.15    # row-major
/// P.2 = ...
/// P.1.2 = ...                                         # rows: type-1 communities
/// rho = 1
/// seed = 42
/// ```
///
/// Values are separated by commas and/or whitespace; `#` starts a comment.
/// `P.b.a` with `b > a` is accepted and transposed.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecConfig {
    pub spec: SbmSpec,
    pub seed: Option<u64>,
}

impl FromStr for SpecConfig {
    type Err = SbmError;

    fn from_str(text: &str) -> Result<Self, SbmError> {
        use std::collections::BTreeMap;
        let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| SbmError::Config {
                line: line_no,
                message: "expected `key = value`".into(),
            })?;
            let key = key.trim().to_string();
            if entries.contains_key(&key) {
                return Err(SbmError::Config {
                    line: line_no,
                    message: format!("duplicate key `{key}`"),
                });
            }
            entries.insert(key, (line_no, value.trim().to_string()));
        }

        let missing = |key: &str| SbmError::Config {
            line: 0,
            message: format!("missing key `{key}`"),
        };
        let scalar = |key: &str| -> Result<Option<(usize, String)>, SbmError> {
            Ok(entries.get(key).cloned())
        };
        let parse_usize = |(line, v): (usize, String)| {
            v.parse::<usize>().map_err(|_| SbmError::Config {
                line,
                message: format!("invalid integer `{v}`"),
            })
        };
        let numbers = |(line, v): &(usize, String)| -> Result<Vec<f64>, SbmError> {
            v.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>().map_err(|_| SbmError::Config {
                        line: *line,
                        message: format!("invalid number `{s}`"),
                    })
                })
                .collect()
        };

        let nt = parse_usize(scalar("num_types")?.ok_or_else(|| missing("num_types"))?)?;
        let k = parse_usize(scalar("num_communities")?.ok_or_else(|| missing("num_communities"))?)?;
        if nt == 0 || k == 0 {
            return Err(SbmError::Empty);
        }
        let matrix = |key: &str| -> Result<(usize, Matrix), SbmError> {
            let entry = entries.get(key).ok_or_else(|| missing(key))?;
            let vals = numbers(entry)?;
            if vals.len() != k * k {
                return Err(SbmError::Config {
                    line: entry.0,
                    message: format!("`{key}` needs {} values, found {}", k * k, vals.len()),
                });
            }
            Ok((entry.0, Matrix::from_rows(k, vals)))
        };

        let mut community_sizes = Vec::new();
        for l in 1..=nt {
            let key = format!("sizes.{l}");
            let entry = entries.get(&key).ok_or_else(|| missing(&key))?;
            let vals = numbers(entry)?;
            if vals.len() != k || vals.iter().any(|x| x.fract() != 0.0 || *x < 0.0) {
                return Err(SbmError::Config {
                    line: entry.0,
                    message: format!("`{key}` needs {k} non-negative integers"),
                });
            }
            community_sizes.push(vals.iter().map(|&x| x as usize).collect());
        }
        let homo_probs = (1..=nt)
            .map(|l| matrix(&format!("P.{l}")).map(|(_, m)| m))
            .collect::<Result<Vec<_>, _>>()?;
        let mut cross_probs = Vec::new();
        for (lo, hi) in type_pairs(nt) {
            let fwd = format!("P.{}.{}", lo + 1, hi + 1);
            let bwd = format!("P.{}.{}", hi + 1, lo + 1);
            let m = if entries.contains_key(&fwd) {
                if entries.contains_key(&bwd) {
                    let (line, a) = matrix(&fwd)?;
                    let (_, b) = matrix(&bwd)?;
                    if a != b.transpose() {
                        return Err(SbmError::Config {
                            line,
                            message: format!("`{fwd}` and `{bwd}` are not transposes"),
                        });
                    }
                }
                matrix(&fwd)?.1
            } else {
                matrix(&bwd)?.1.transpose()
            };
            cross_probs.push(m);
        }
        let rho = match scalar("rho")? {
            Some((line, v)) => v.parse::<f64>().map_err(|_| SbmError::Config {
                line,
                message: format!("invalid number `{v}`"),
            })?,
            None => 1.0,
        };
        let seed = match scalar("seed")? {
            Some((line, v)) => Some(v.parse::<u64>().map_err(|_| SbmError::Config {
                line,
                message: format!("invalid seed `{v}`"),
            })?),
            None => None,
        };
        let known = |key: &str| {
            matches!(key, "num_types" | "num_communities" | "rho" | "seed")
                || key.starts_with("sizes.")
                || key.starts_with("P.")
        };
        if let Some((key, (line, _))) = entries.iter().find(|(key, _)| !known(key)) {
            return Err(SbmError::Config {
                line: *line,
                message: format!("unknown key `{key}`"),
            });
        }
        let spec = SbmSpec {
            community_sizes,
            homo_probs,
            cross_probs,
            rho,
        };
        spec.validate()?;
        Ok(Self { spec, seed })
    }
}

impl fmt::Display for SpecConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let spec = &self.spec;
        let join = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(f, "num_types = {}", spec.num_types())?;
        writeln!(f, "num_communities = {}", spec.num_communities())?;
        for (l, s) in spec.community_sizes.iter().enumerate() {
            let s: Vec<String> = s.iter().map(|x| x.to_string()).collect();
            writeln!(f, "sizes.{} = {}", l + 1, s.join(", "))?;
        }
        for (l, m) in spec.homo_probs.iter().enumerate() {
            writeln!(f, "P.{} = {}", l + 1, join(m.data()))?;
        }
        for ((lo, hi), m) in type_pairs(spec.num_types()).zip(&spec.cross_probs) {
            writeln!(f, "P.{}.{} = {}", lo + 1, hi + 1, join(m.data()))?;
        }
        writeln!(f, "rho = {}", spec.rho)?;
        if let Some(seed) = self.seed {
            writeln!(f, "seed = {seed}")?;
        }
        Ok(())
    }
}
