//! Objective evaluators and the closed-form block-matrix updates.

use crate::error::{NsbmError, Result};
use crate::logit::logit_objective;
use crate::types::{BlockMatrix, BlockMode, Coefficients, Covariates, Graph, Labels, SoftLabels};

fn check_dims(g: &Graph, x: &Covariates, n: usize, k: usize, beta: &Coefficients, b: &BlockMatrix) -> Result<()> {
    if g.n() != n || x.n() != n {
        return Err(NsbmError::DimensionMismatch(format!(
            "graph has {} nodes, covariates {} rows, labels {n}",
            g.n(),
            x.n()
        )));
    }
    if beta.k() != k || b.k() != k || beta.p() != x.p() {
        return Err(NsbmError::DimensionMismatch(
            "coefficients or block matrix disagree with k or p".into(),
        ));
    }
    Ok(())
}

/// Expected edge and pair counts under `q`, each over unordered pairs:
/// `edges[a][b] = 1/2 sum_{i != j} A_ij q_ia q_jb` and
/// `pairs[a][b] = 1/2 sum_{i != j} q_ia q_jb`.
pub(crate) fn soft_block_counts(g: &Graph, q: &SoftLabels) -> (Vec<f64>, Vec<f64>) {
    let k = q.k();
    let n = q.n();
    let mut edges = vec![0.0; k * k];
    let mut neigh = vec![0.0; k];
    for i in 0..n {
        neigh.iter_mut().for_each(|v| *v = 0.0);
        for &j in g.neighbors(i) {
            for (s, v) in neigh.iter_mut().zip(q.row(j)) {
                *s += v;
            }
        }
        let qi = q.row(i);
        for a in 0..k {
            for b in 0..k {
                edges[a * k + b] += qi[a] * neigh[b];
            }
        }
    }
    let totals = q.column_sums();
    let mut self_pairs = vec![0.0; k * k];
    for i in 0..n {
        let qi = q.row(i);
        for a in 0..k {
            for b in 0..k {
                self_pairs[a * k + b] += qi[a] * qi[b];
            }
        }
    }
    let mut pairs = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            pairs[a * k + b] = 0.5 * (totals[a] * totals[b] - self_pairs[a * k + b]);
            edges[a * k + b] *= 0.5;
        }
    }
    // exact symmetry
    for a in 0..k {
        for b in (a + 1)..k {
            let e = 0.5 * (edges[a * k + b] + edges[b * k + a]);
            edges[a * k + b] = e;
            edges[b * k + a] = e;
            let p = 0.5 * (pairs[a * k + b] + pairs[b * k + a]);
            pairs[a * k + b] = p;
            pairs[b * k + a] = p;
        }
    }
    (edges, pairs)
}

/// Edge and pair counts for hard labels over unordered pairs, arranged as a
/// symmetric `k x k` table. Diagonal pairs are `n_a (n_a - 1) / 2`;
/// off-diagonal entries hold `n_a n_b` (the count of unordered pairs between
/// `a` and `b`) in both `[a][b]` and `[b][a]`.
pub(crate) fn hard_block_counts(g: &Graph, c: &Labels) -> (Vec<f64>, Vec<f64>) {
    let k = c.k();
    let sizes = c.class_sizes();
    let mut edges = vec![0.0; k * k];
    for (i, j) in g.edges() {
        let (a, b) = (c.get(i), c.get(j));
        edges[a * k + b] += 1.0;
        if a != b {
            edges[b * k + a] += 1.0;
        }
    }
    let mut pairs = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            pairs[a * k + b] = if a == b {
                (sizes[a] * sizes[a].saturating_sub(1)) as f64 / 2.0
            } else {
                (sizes[a] * sizes[b]) as f64
            };
        }
    }
    (edges, pairs)
}

/// Block rates `edges / pairs`, clamped into `clamp` (Poisson rates only
/// from below). Blocks with no
/// pairs keep the entry from `previous`; the flag reports whether that
/// happened.
pub(crate) fn block_update(
    k: usize,
    mode: BlockMode,
    edges: &[f64],
    pairs: &[f64],
    previous: &BlockMatrix,
    clamp: (f64, f64),
) -> Result<(BlockMatrix, bool)> {
    let mut values = vec![0.0; k * k];
    let mut empty = false;
    for a in 0..k {
        for b in 0..k {
            let idx = a * k + b;
            values[idx] = if pairs[idx] > 0.0 {
                let r = (edges[idx] / pairs[idx]).max(clamp.0);
                match mode {
                    BlockMode::Bernoulli => r.min(clamp.1),
                    BlockMode::Poisson => r,
                }
            } else {
                empty = true;
                previous.get(a, b)
            };
        }
    }
    Ok((BlockMatrix::new(k, mode, values)?, empty))
}

/// Evidence lower bound of the mean-field family, without the `log P(X)`
/// constant:
///
/// ```text
/// sum_{i<j} sum_ab q_ia q_jb [A_ij log B_ab + (1 - A_ij) log(1 - B_ab)]
///   + sum_i [ sum_k q_ik beta_k' x_i - log sum_k exp(beta_k' x_i) ]
///   - sum_ik q_ik log q_ik
/// ```
pub fn elbo(g: &Graph, x: &Covariates, q: &SoftLabels, beta: &Coefficients, b: &BlockMatrix) -> Result<f64> {
    check_dims(g, x, q.n(), q.k(), beta, b)?;
    if b.mode() != BlockMode::Bernoulli {
        return Err(NsbmError::BlockRange("ELBO needs a Bernoulli block matrix".into()));
    }
    let (edges, pairs) = soft_block_counts(g, q);
    Ok(elbo_from_counts(&edges, &pairs, b) + logit_objective(beta, x, q) + entropy(q))
}

pub(crate) fn elbo_from_counts(edges: &[f64], pairs: &[f64], b: &BlockMatrix) -> f64 {
    let k = b.k();
    let mut total = 0.0;
    for a in 0..k {
        for c in 0..k {
            let idx = a * k + c;
            let rate = b.get(a, c);
            total += edges[idx] * rate.ln() + (pairs[idx] - edges[idx]) * (-rate).ln_1p();
        }
    }
    total
}

pub(crate) fn entropy(q: &SoftLabels) -> f64 {
    -q.values()
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// Poisson profile log-likelihood, without the `log A_ij!` constant:
///
/// ```text
/// sum_{i<j} [A_ij log B_{c_i c_j} - B_{c_i c_j}]
///   + sum_i [beta_{c_i}' x_i - log sum_k exp(beta_k' x_i)]
/// ```
pub fn profile_objective(g: &Graph, x: &Covariates, c: &Labels, beta: &Coefficients, b: &BlockMatrix) -> Result<f64> {
    check_dims(g, x, c.len(), c.k(), beta, b)?;
    if b.mode() != BlockMode::Poisson {
        return Err(NsbmError::BlockRange("profile objective needs a Poisson block matrix".into()));
    }
    let (edges, pairs) = hard_block_counts(g, c);
    Ok(profile_edge_term(&edges, &pairs, b) + logit_objective(beta, x, &c.to_one_hot()))
}

pub(crate) fn profile_edge_term(edges: &[f64], pairs: &[f64], b: &BlockMatrix) -> f64 {
    let k = b.k();
    let mut total = 0.0;
    for a in 0..k {
        for c in a..k {
            let idx = a * k + c;
            if pairs[idx] == 0.0 && edges[idx] == 0.0 {
                continue;
            }
            total += edges[idx] * b.get(a, c).ln() - pairs[idx] * b.get(a, c);
        }
    }
    total
}
