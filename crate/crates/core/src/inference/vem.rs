use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NsbmError, Result};
use crate::logit::{fit_multilogistic_with, softmax_into, LogitFit};
use crate::rng::stream;
use crate::types::{BlockMatrix, BlockMode, Coefficients, Covariates, Graph, Labels, SoftLabels};

use super::objective::{block_update, elbo_from_counts, entropy, soft_block_counts};
use super::{random_soft_labels, relative_change, FitOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VemResult {
    pub q: SoftLabels,
    pub beta: Coefficients,
    /// Last logistic fit, for standard errors.
    pub logit: LogitFit,
    pub b: BlockMatrix,
    /// ELBO after every outer iteration.
    pub elbo_trace: Vec<f64>,
    pub labels: Labels,
    pub converged: bool,
    /// Sweeps used by each inner loop.
    pub inner_sweeps: Vec<usize>,
    /// A block had no pairs at some iteration and kept its previous rate.
    pub empty_block: bool,
}

impl VemResult {
    pub fn objective(&self) -> f64 {
        *self.elbo_trace.last().expect("at least one outer iteration")
    }
}

pub(crate) fn check_inputs(g: &Graph, x: &Covariates, n: usize, k: usize, opts: &FitOptions) -> Result<()> {
    opts.validate()?;
    if g.n() != n || x.n() != n {
        return Err(NsbmError::DimensionMismatch(format!(
            "graph has {} nodes, covariates {} rows, initialization {n}",
            g.n(),
            x.n()
        )));
    }
    if n < k {
        return Err(NsbmError::InvalidInput(format!("{n} nodes for {k} communities")));
    }
    Ok(())
}

pub(crate) fn starting_blocks(g: &Graph, k: usize, mode: BlockMode, clamp: (f64, f64)) -> Result<BlockMatrix> {
    let mut d = g.density().max(clamp.0);
    if mode == BlockMode::Bernoulli {
        d = d.min(clamp.1);
    }
    BlockMatrix::constant(k, mode, d)
}

/// Variational EM from the responsibilities `q0`.
///
/// Each outer iteration refits the multi-logistic coefficients (warm
/// started), sets `B` to the expected edge density of every block, then runs
/// in-place sweeps over the nodes updating each row of `q` to its exact
/// maximizer given the rest.
pub fn vem_fit(g: &Graph, x: &Covariates, q0: &SoftLabels, opts: &FitOptions) -> Result<VemResult> {
    let (n, k) = (q0.n(), q0.k());
    check_inputs(g, x, n, k, opts)?;
    let mut q = q0.clone();
    let mut b = starting_blocks(g, k, BlockMode::Bernoulli, opts.b_clamp)?;
    let mut fit: Option<LogitFit> = None;
    let mut trace = Vec::new();
    let mut inner_sweeps = Vec::new();
    let mut empty_block = false;
    let mut converged = false;

    for t in 0..opts.max_outer {
        let next = fit_multilogistic_with(x, &q, fit.as_ref().map(|f| &f.beta), &opts.logit)?;
        let (edges, pairs) = soft_block_counts(g, &q);
        let (nb, empty) = block_update(k, BlockMode::Bernoulli, &edges, &pairs, &b, opts.b_clamp)?;
        b = nb;
        empty_block |= empty;
        inner_sweeps.push(e_step(g, x, &mut q, &next.beta, &b, opts));
        fit = Some(next);

        let beta = &fit.as_ref().expect("just set").beta;
        let (edges, pairs) = soft_block_counts(g, &q);
        let value = elbo_from_counts(&edges, &pairs, &b)
            + crate::logit::logit_objective(beta, x, &q)
            + entropy(&q);
        if !value.is_finite() {
            return Err(NsbmError::NonFinite(format!("ELBO at outer iteration {t}")));
        }
        let prev = trace.last().copied();
        trace.push(value);
        if let Some(prev) = prev {
            if relative_change(prev, value) <= opts.rel_tol {
                converged = true;
                break;
            }
        }
    }

    let logit = fit.expect("max_outer is positive");
    let labels = q.argmax_labels();
    Ok(VemResult {
        q,
        beta: logit.beta.clone(),
        logit,
        b,
        elbo_trace: trace,
        labels,
        converged,
        inner_sweeps,
        empty_block,
    })
}

/// Gauss-Seidel sweeps of the closed-form row update. Returns the number of
/// sweeps run.
fn e_step(g: &Graph, x: &Covariates, q: &mut SoftLabels, beta: &Coefficients, b: &BlockMatrix, opts: &FitOptions) -> usize {
    let (n, k) = (q.n(), q.k());
    let log_b: Vec<f64> = b.values().iter().map(|v| v.ln()).collect();
    let log_1mb: Vec<f64> = b.values().iter().map(|v| (-v).ln_1p()).collect();
    let mut eta = vec![0.0; n * k];
    for i in 0..n {
        beta.linear_predictors(x.row(i), &mut eta[i * k..(i + 1) * k]);
    }
    let mut neigh = vec![0.0; k];
    let mut score = vec![0.0; k];
    let mut old = vec![0.0; k];

    for sweep in 1..=opts.inner_sweeps_max {
        let mut totals = q.column_sums();
        let mut max_change: f64 = 0.0;
        for i in 0..n {
            neigh.iter_mut().for_each(|v| *v = 0.0);
            for &j in g.neighbors(i) {
                for (s, v) in neigh.iter_mut().zip(q.row(j)) {
                    *s += v;
                }
            }
            old.copy_from_slice(q.row(i));
            for a in 0..k {
                let mut s = eta[i * k + a];
                for c in 0..k {
                    let non_edges = totals[c] - old[c] - neigh[c];
                    s += neigh[c] * log_b[a * k + c] + non_edges * log_1mb[a * k + c];
                }
                score[a] = s;
            }
            let row = q.row_mut(i);
            softmax_into(&score, row);
            for c in 0..k {
                totals[c] += row[c] - old[c];
                max_change = max_change.max((row[c] - old[c]).abs());
            }
        }
        if max_change < opts.inner_tol {
            return sweep;
        }
    }
    opts.inner_sweeps_max
}

/// Best of `restarts` fits from flat-Dirichlet responsibilities, by final
/// ELBO. Restart `r` draws from stream `r` of `seed`.
pub fn vem_random_restarts(
    g: &Graph,
    x: &Covariates,
    k: usize,
    restarts: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<VemResult> {
    let fits: Vec<Result<VemResult>> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let q0 = random_soft_labels(g.n(), k, &mut stream(seed, r as u64))?;
            vem_fit(g, x, &q0, opts)
        })
        .collect();
    let mut best: Option<VemResult> = None;
    for fit in fits {
        let fit = fit?;
        if best.as_ref().is_none_or(|b| fit.objective() > b.objective()) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}
