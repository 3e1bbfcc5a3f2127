//! Partition comparison: normalized mutual information and misclassification
//! rate under the best matching of labels.

use std::collections::HashMap;

use log::warn;
use thiserror::Error;

use crate::modularity::Partition;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("label vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("label vectors are empty")]
    Empty,
    #[error("partitions cover different node types ({0} vs {1})")]
    TypeMismatch(usize, usize),
}

/// Largest label count for which the matching is solved exactly.
pub const EXACT_MATCHING_LIMIT: usize = 12;

/// Contingency counts between two labelings, with labels compacted in order
/// of first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contingency {
    /// `[x][y]`: number of items with compact labels `x` and `y`.
    pub counts: Vec<Vec<usize>>,
    pub total: usize,
}

impl Contingency {
    pub fn new(x: &[usize], y: &[usize]) -> Result<Self, MetricsError> {
        if x.len() != y.len() {
            return Err(MetricsError::LengthMismatch(x.len(), y.len()));
        }
        let cx = compact(x);
        let cy = compact(y);
        let kx = cx.iter().max().map_or(0, |m| m + 1);
        let ky = cy.iter().max().map_or(0, |m| m + 1);
        let mut counts = vec![vec![0; ky]; kx];
        for (&a, &b) in cx.iter().zip(&cy) {
            counts[a][b] += 1;
        }
        Ok(Self {
            counts,
            total: x.len(),
        })
    }

    fn row_totals(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    fn col_totals(&self) -> Vec<usize> {
        let k = self.counts.first().map_or(0, Vec::len);
        (0..k).map(|b| self.counts.iter().map(|r| r[b]).sum()).collect()
    }
}

fn compact(labels: &[usize]) -> Vec<usize> {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect()
}

fn entropy(totals: &[usize], n: f64) -> f64 {
    totals
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// `2 I(X;Y) / (H(X) + H(Y))` from the empirical joint distribution.
/// Two single-cluster labelings score 1.
pub fn nmi(x: &[usize], y: &[usize]) -> Result<f64, MetricsError> {
    if x.is_empty() && y.is_empty() {
        return Err(MetricsError::Empty);
    }
    let table = Contingency::new(x, y)?;
    let n = table.total as f64;
    let rows = table.row_totals();
    let cols = table.col_totals();
    let hx = entropy(&rows, n);
    let hy = entropy(&cols, n);
    if hx + hy == 0.0 {
        return Ok(1.0);
    }
    let mut terms: Vec<f64> = Vec::new();
    for (a, row) in table.counts.iter().enumerate() {
        for (b, &c) in row.iter().enumerate() {
            if c > 0 {
                let pxy = c as f64 / n;
                terms.push(pxy * (c as f64 * n / (rows[a] as f64 * cols[b] as f64)).ln());
            }
        }
    }
    // summing in sorted order makes nmi(x, y) == nmi(y, x) bit for bit
    terms.sort_unstable_by(f64::total_cmp);
    let mi: f64 = terms.iter().sum();
    Ok((2.0 * mi / (hx + hy)).clamp(0.0, 1.0))
}

/// Largest number of items that can be put on the diagonal by a one-to-one
/// matching of row labels to column labels.
fn best_matching(counts: &[Vec<usize>]) -> usize {
    let rows = counts.len();
    let cols = counts.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return 0;
    }
    if cols > rows {
        let t: Vec<Vec<usize>> = (0..cols)
            .map(|b| (0..rows).map(|a| counts[a][b]).collect())
            .collect();
        return best_matching(&t);
    }
    // rows >= cols; search over subsets of columns
    if cols <= EXACT_MATCHING_LIMIT {
        let full = 1usize << cols;
        let mut dp = vec![None::<usize>; full];
        dp[0] = Some(0);
        for row in counts {
            let mut next = dp.clone();
            for mask in 0..full {
                let Some(v) = dp[mask] else { continue };
                for (b, &c) in row.iter().enumerate() {
                    if mask & (1 << b) == 0 {
                        let m2 = mask | (1 << b);
                        let cand = v + c;
                        if next[m2].is_none_or(|x| cand > x) {
                            next[m2] = Some(cand);
                        }
                    }
                }
            }
            dp = next;
        }
        dp.into_iter().flatten().max().unwrap_or(0)
    } else {
        warn!(
            "{rows}x{cols} label matching exceeds the exact limit of {EXACT_MATCHING_LIMIT}; using greedy matching"
        );
        let mut cells: Vec<(usize, usize, usize)> = counts
            .iter()
            .enumerate()
            .flat_map(|(a, r)| r.iter().enumerate().map(move |(b, &c)| (c, a, b)))
            .collect();
        cells.sort_unstable_by(|x, y| y.cmp(x));
        let mut used_r = vec![false; rows];
        let mut used_c = vec![false; cols];
        let mut total = 0;
        for (c, a, b) in cells {
            if !used_r[a] && !used_c[b] {
                used_r[a] = true;
                used_c[b] = true;
                total += c;
            }
        }
        total
    }
}

/// Fraction of items whose predicted label disagrees with the truth after
/// the best one-to-one relabeling of predicted labels. Unmatched predicted
/// labels count as errors.
pub fn misclassification(pred: &[usize], truth: &[usize]) -> Result<f64, MetricsError> {
    let table = Contingency::new(pred, truth)?;
    if table.total == 0 {
        return Err(MetricsError::Empty);
    }
    let matched = best_matching(&table.counts);
    Ok(1.0 - matched as f64 / table.total as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    /// NMI over all nodes pooled across types.
    pub nmi: f64,
    pub nmi_per_type: Vec<f64>,
    pub misclassification_per_type: Vec<f64>,
    /// Pooled contingency table, predicted communities by true communities.
    pub confusion: Contingency,
}

/// Scores a detected partition against ground truth. Each type is aligned
/// separately for its misclassification rate. Types with no nodes score 0.
pub fn score(pred: &Partition, truth: &Partition) -> Result<ScoreReport, MetricsError> {
    if pred.num_types() != truth.num_types() {
        return Err(MetricsError::TypeMismatch(pred.num_types(), truth.num_types()));
    }
    let mut nmi_per_type = Vec::new();
    let mut miss = Vec::new();
    for l in 0..pred.num_types() {
        let (p, t) = (pred.labels(l), truth.labels(l));
        if p.len() != t.len() {
            return Err(MetricsError::LengthMismatch(p.len(), t.len()));
        }
        if p.is_empty() {
            nmi_per_type.push(0.0);
            miss.push(0.0);
            continue;
        }
        nmi_per_type.push(nmi(p, t)?);
        miss.push(misclassification(p, t)?);
    }
    let fp = pred.flat_labels();
    let ft = truth.flat_labels();
    Ok(ScoreReport {
        nmi: nmi(&fp, &ft)?,
        nmi_per_type,
        misclassification_per_type: miss,
        confusion: Contingency::new(&fp, &ft)?,
    })
}
