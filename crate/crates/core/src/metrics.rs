//! Partition comparison: confusion matrix, NMI, ARI and misclassification.
//!
//! The two labelings may use different class counts. `0 * log 0` is taken as
//! zero everywhere.

use serde::{Deserialize, Serialize};

use crate::align::align_labels;
use crate::error::{NsbmError, Result};
use crate::types::Labels;

/// Contingency table between two labelings (`a` on rows, `b` on columns).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub counts: Vec<Vec<usize>>,
    pub row_sums: Vec<usize>,
    pub col_sums: Vec<usize>,
    pub n: usize,
}

pub fn confusion(a: &Labels, b: &Labels) -> Result<Confusion> {
    if a.len() != b.len() {
        return Err(NsbmError::DimensionMismatch(format!(
            "labelings have {} and {} nodes",
            a.len(),
            b.len()
        )));
    }
    let mut counts = vec![vec![0usize; b.k()]; a.k()];
    for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
        counts[x][y] += 1;
    }
    let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
    let col_sums = (0..b.k()).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
    Ok(Confusion {
        counts,
        row_sums,
        col_sums,
        n: a.len(),
    })
}

fn xlogy_ratio(count: usize, scale: f64) -> f64 {
    if count == 0 {
        0.0
    } else {
        count as f64 * (count as f64 * scale).ln()
    }
}

/// Normalized mutual information
/// `-2 sum n_ij log(n_ij n / (n_i. n_.j)) / (sum n_i. log(n_i./n) + sum n_.j log(n_.j/n))`.
///
/// Returns 0 when either labeling puts every node in one class.
pub fn nmi(a: &Labels, b: &Labels) -> Result<f64> {
    let c = confusion(a, b)?;
    let n = c.n as f64;
    if c.n == 0 {
        return Ok(0.0);
    }
    let mut num = 0.0;
    for (i, row) in c.counts.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                num += nij as f64 * (nij as f64 * n / (c.row_sums[i] as f64 * c.col_sums[j] as f64)).ln();
            }
        }
    }
    let ha: f64 = c.row_sums.iter().map(|&s| xlogy_ratio(s, 1.0 / n)).sum();
    let hb: f64 = c.col_sums.iter().map(|&s| xlogy_ratio(s, 1.0 / n)).sum();
    if ha == 0.0 || hb == 0.0 {
        return Ok(0.0);
    }
    Ok((-2.0 * num / (ha + hb)).clamp(0.0, 1.0))
}

fn choose2(m: usize) -> f64 {
    let m = m as f64;
    m * (m - 1.0) / 2.0
}

/// Adjusted Rand index. Identical partitions give exactly 1; when the
/// expected and maximal index coincide (both labelings trivial) the result
/// is 1.
pub fn ari(a: &Labels, b: &Labels) -> Result<f64> {
    let c = confusion(a, b)?;
    if c.n < 2 {
        return Err(NsbmError::InvalidInput("adjusted Rand index needs n >= 2".into()));
    }
    let index: f64 = c.counts.iter().flatten().map(|&x| choose2(x)).sum();
    let sa: f64 = c.row_sums.iter().map(|&x| choose2(x)).sum();
    let sb: f64 = c.col_sums.iter().map(|&x| choose2(x)).sum();
    let expected = sa * sb / choose2(c.n);
    let max_index = 0.5 * (sa + sb);
    let den = max_index - expected;
    if den == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / den)
}

/// Fraction of nodes whose estimated label disagrees with the reference after
/// the best relabeling of `b`.
pub fn misclassification_rate(a: &Labels, b: &Labels) -> Result<f64> {
    let sigma = align_labels(a, b)?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let wrong = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .filter(|&(&x, &y)| sigma.apply(y) != x)
        .count();
    Ok(wrong as f64 / a.len() as f64)
}
