use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NsbmError, Result};
use crate::logit::{fit_multilogistic_with, logit_objective, LogitFit};
use crate::rng::stream;
use crate::types::{BlockMatrix, BlockMode, Coefficients, Covariates, Graph, Labels};

use super::objective::{block_update, hard_block_counts, profile_edge_term};
use super::vem::{check_inputs, starting_blocks};
use super::{random_labels, relative_change, FitOptions};

/// Relative margin a new label must win by before a node moves.
const SWITCH_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MplResult {
    pub labels: Labels,
    pub beta: Coefficients,
    pub logit: LogitFit,
    pub b: BlockMatrix,
    /// Profile objective after every outer iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    /// Label moves made by each label step.
    pub label_changes: Vec<usize>,
    pub empty_block: bool,
}

impl MplResult {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("at least one outer iteration")
    }
}

/// Alternating maximization of the Poisson profile likelihood from `c0`.
///
/// Each outer iteration refits the coefficients on the current labels, sets
/// `B` to the block means, then sweeps the nodes moving each to its best
/// class until a sweep changes nothing. A node keeps its label unless another
/// class scores strictly higher.
pub fn mpl_fit(g: &Graph, x: &Covariates, c0: &Labels, opts: &FitOptions) -> Result<MplResult> {
    let (n, k) = (c0.len(), c0.k());
    check_inputs(g, x, n, k, opts)?;
    let mut c = c0.as_slice().to_vec();
    let mut b = starting_blocks(g, k, BlockMode::Poisson, opts.b_clamp)?;
    let mut fit: Option<LogitFit> = None;
    let mut trace = Vec::new();
    let mut label_changes = Vec::new();
    let mut empty_block = false;
    let mut converged = false;

    for t in 0..opts.max_outer {
        let labels = Labels::new(c.clone(), k)?;
        let next = fit_multilogistic_with(x, &labels.to_one_hot(), fit.as_ref().map(|f| &f.beta), &opts.logit)?;
        let (edges, pairs) = hard_block_counts(g, &labels);
        let (nb, empty) = block_update(k, BlockMode::Poisson, &edges, &pairs, &b, opts.b_clamp)?;
        b = nb;
        empty_block |= empty;
        label_changes.push(label_step(g, x, &mut c, k, &next.beta, &b, opts));
        fit = Some(next);

        let labels = Labels::new(c.clone(), k)?;
        let beta = &fit.as_ref().expect("just set").beta;
        let (edges, pairs) = hard_block_counts(g, &labels);
        let value = profile_edge_term(&edges, &pairs, &b) + logit_objective(beta, x, &labels.to_one_hot());
        if !value.is_finite() {
            return Err(NsbmError::NonFinite(format!("profile objective at outer iteration {t}")));
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
    Ok(MplResult {
        labels: Labels::new(c, k)?,
        beta: logit.beta.clone(),
        logit,
        b,
        objective_trace: trace,
        converged,
        label_changes,
        empty_block,
    })
}

fn label_step(
    g: &Graph,
    x: &Covariates,
    c: &mut [usize],
    k: usize,
    beta: &Coefficients,
    b: &BlockMatrix,
    opts: &FitOptions,
) -> usize {
    let log_b: Vec<f64> = b.values().iter().map(|v| v.ln()).collect();
    let mut sizes = vec![0.0; k];
    c.iter().for_each(|&a| sizes[a] += 1.0);
    let mut counts = vec![0.0; k];
    let mut score = vec![0.0; k];
    let mut moves = 0;

    for _ in 0..opts.inner_sweeps_max {
        let mut changed = 0;
        for i in 0..c.len() {
            counts.iter_mut().for_each(|v| *v = 0.0);
            for &j in g.neighbors(i) {
                counts[c[j]] += 1.0;
            }
            let cur = c[i];
            beta.linear_predictors(x.row(i), &mut score);
            for a in 0..k {
                let mut s = 0.0;
                for d in 0..k {
                    let others = sizes[d] - if d == cur { 1.0 } else { 0.0 };
                    s += counts[d] * log_b[a * k + d] - others * b.get(a, d);
                }
                score[a] += s;
            }
            let mut best = 0;
            for a in 1..k {
                if score[a] > score[best] {
                    best = a;
                }
            }
            if best != cur && score[best] > score[cur] + SWITCH_MARGIN * (1.0 + score[cur].abs()) {
                sizes[cur] -= 1.0;
                sizes[best] += 1.0;
                c[i] = best;
                changed += 1;
            }
        }
        moves += changed;
        if changed == 0 {
            break;
        }
    }
    moves
}

/// Best of `restarts` fits from uniformly random labels, by final profile
/// objective. Restart `r` draws from stream `r` of `seed`.
pub fn mpl_random_restarts(
    g: &Graph,
    x: &Covariates,
    k: usize,
    restarts: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<MplResult> {
    let fits: Vec<Result<MplResult>> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let c0 = random_labels(g.n(), k, &mut stream(seed, r as u64))?;
            mpl_fit(g, x, &c0, opts)
        })
        .collect();
    let mut best: Option<MplResult> = None;
    for fit in fits {
        let fit = fit?;
        if best.as_ref().is_none_or(|b| fit.objective() > b.objective()) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::{permute_coefficients, Permutation};
    use crate::inference::profile_objective;
    use crate::simgen::{generate_nsbm, Scenario, ScenarioSpec};

    fn cliques(size: usize) -> (Graph, Labels) {
        let mut edges = Vec::new();
        for block in 0..2 {
            for i in 0..size {
                for j in (i + 1)..size {
                    edges.push((block * size + i, block * size + j));
                }
            }
        }
        let truth = (0..2 * size).map(|i| i / size).collect();
        (Graph::from_edges(2 * size, edges).unwrap(), Labels::new(truth, 2).unwrap())
    }

    #[test]
    fn cliques_truth_is_fixed_point() {
        let (g, truth) = cliques(8);
        let x = Covariates::zeros(16, 1);
        let res = mpl_fit(&g, &x, &truth, &FitOptions::default()).unwrap();
        assert_eq!(res.labels, truth);
        assert_eq!(res.label_changes[0], 0);
    }

    #[test]
    fn trace_is_monotone_and_matches_evaluator() {
        let mut params = ScenarioSpec::new(Scenario::A, 80).params();
        params.rho = 0.2;
        let s = generate_nsbm(&params, 80, 2).unwrap();
        let mut rng = crate::rng::rng_from_seed(5);
        let c0 = random_labels(80, 2, &mut rng).unwrap();
        let res = mpl_fit(&s.graph, &s.covariates, &c0, &FitOptions::default()).unwrap();
        for w in res.objective_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8);
        }
        let direct = profile_objective(&s.graph, &s.covariates, &res.labels, &res.beta, &res.b).unwrap();
        assert!((direct - res.objective()).abs() < 1e-9 * (1.0 + direct.abs()));
        assert!(res.converged);
    }

    #[test]
    fn relabeled_start_relabels_output() {
        let mut params = ScenarioSpec::new(Scenario::A, 80).params();
        params.rho = 0.3;
        let s = generate_nsbm(&params, 80, 3).unwrap();
        let mut rng = crate::rng::rng_from_seed(6);
        let c0 = random_labels(80, 2, &mut rng).unwrap();
        let sigma = Permutation::new(vec![1, 0]).unwrap();
        let opts = FitOptions::default();
        let a = mpl_fit(&s.graph, &s.covariates, &c0, &opts).unwrap();
        let b = mpl_fit(&s.graph, &s.covariates, &sigma.relabel(&c0), &opts).unwrap();
        assert_eq!(sigma.relabel(&a.labels), b.labels);
        let moved = permute_coefficients(&a.beta, &sigma).unwrap();
        for (u, v) in moved.values().iter().zip(b.beta.values()) {
            assert!((u - v).abs() < 1e-5, "{u} vs {v}");
        }
    }

    #[test]
    fn empty_class_keeps_previous_rates() {
        let (g, _) = cliques(4);
        let x = Covariates::zeros(8, 1);
        let c0 = Labels::new(vec![0; 8], 2).unwrap();
        let res = mpl_fit(&g, &x, &c0, &FitOptions::default()).unwrap();
        assert!(res.empty_block);
        assert!(res.b.values().iter().all(|v| v.is_finite() && *v > 0.0));
    }
}
