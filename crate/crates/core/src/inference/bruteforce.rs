use crate::error::{NsbmError, Result};
use crate::logit::{fit_multilogistic_with, log_sum_exp};
use crate::types::{BlockMatrix, BlockMode, Coefficients, Covariates, Graph, Labels};

use super::objective::{block_update, hard_block_counts, profile_edge_term};
use super::vem::starting_blocks;
use super::FitOptions;

/// Default largest `n` accepted by the enumerators.
pub const BRUTEFORCE_LIMIT: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileOptimum {
    pub labels: Labels,
    pub beta: Coefficients,
    pub b: BlockMatrix,
    pub objective: f64,
}

fn assignment_count(n: usize, k: usize, limit: usize) -> Result<usize> {
    if n > limit {
        return Err(NsbmError::TooLarge { n, limit });
    }
    if k < 2 {
        return Err(NsbmError::InvalidInput(format!("k = {k}")));
    }
    k.checked_pow(n as u32)
        .ok_or(NsbmError::TooLarge { n, limit })
}

fn decode(mut code: usize, n: usize, k: usize, out: &mut [usize]) {
    for slot in out.iter_mut().take(n) {
        *slot = code % k;
        code /= k;
    }
}

/// Global maximizer of the profile likelihood over all `k^n` labelings,
/// with `B` set to the block means and `beta` fitted from zero under default
/// [`FitOptions`]. The first maximizer in enumeration order wins ties (node 0
/// is the least significant digit).
pub fn bruteforce_profile_argmax(g: &Graph, x: &Covariates, k: usize, limit: usize) -> Result<ProfileOptimum> {
    let n = g.n();
    let total = assignment_count(n, k, limit)?;
    if x.n() != n {
        return Err(NsbmError::DimensionMismatch(format!("graph has {n} nodes, covariates {} rows", x.n())));
    }
    let opts = FitOptions::default();
    let start = starting_blocks(g, k, BlockMode::Poisson, opts.b_clamp)?;
    let mut assign = vec![0; n];
    let mut best: Option<ProfileOptimum> = None;
    for code in 0..total {
        decode(code, n, k, &mut assign);
        let labels = Labels::new(assign.clone(), k)?;
        let one_hot = labels.to_one_hot();
        let fit = fit_multilogistic_with(x, &one_hot, None, &opts.logit)?;
        let (edges, pairs) = hard_block_counts(g, &labels);
        let (b, _) = block_update(k, BlockMode::Poisson, &edges, &pairs, &start, opts.b_clamp)?;
        let objective = profile_edge_term(&edges, &pairs, &b) + fit.objective;
        if best.as_ref().is_none_or(|o| objective > o.objective) {
            best = Some(ProfileOptimum {
                labels,
                beta: fit.beta,
                b,
                objective,
            });
        }
    }
    Ok(best.expect("at least one labeling"))
}

/// `log sum_c P(A | c; B) P(c | X; beta)` over all `k^n` labelings, for a
/// Bernoulli block matrix.
pub fn bruteforce_marginal_loglik(
    g: &Graph,
    x: &Covariates,
    beta: &Coefficients,
    b: &BlockMatrix,
    limit: usize,
) -> Result<f64> {
    let n = g.n();
    let k = b.k();
    let total = assignment_count(n, k, limit)?;
    if b.mode() != BlockMode::Bernoulli {
        return Err(NsbmError::BlockRange("marginal likelihood needs a Bernoulli block matrix".into()));
    }
    if x.n() != n || beta.k() != k || beta.p() != x.p() {
        return Err(NsbmError::DimensionMismatch("graph, covariates and parameters disagree".into()));
    }
    let mut log_prior = vec![0.0; n * k];
    let mut eta = vec![0.0; k];
    for i in 0..n {
        beta.linear_predictors(x.row(i), &mut eta);
        let lse = log_sum_exp(&eta);
        for a in 0..k {
            log_prior[i * k + a] = eta[a] - lse;
        }
    }
    let mut assign = vec![0; n];
    let mut terms = Vec::with_capacity(total);
    for code in 0..total {
        decode(code, n, k, &mut assign);
        let labels = Labels::new(assign.clone(), k)?;
        let (edges, pairs) = hard_block_counts(g, &labels);
        let mut v: f64 = (0..n).map(|i| log_prior[i * k + assign[i]]).sum();
        for a in 0..k {
            for c in a..k {
                let idx = a * k + c;
                let r = b.get(a, c);
                v += edges[idx] * r.ln() + (pairs[idx] - edges[idx]) * (-r).ln_1p();
            }
        }
        terms.push(v);
    }
    Ok(log_sum_exp(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::Permutation;
    use crate::inference::{elbo, mpl_fit, profile_objective};
    use crate::types::SoftLabels;
    use rand::Rng as _;

    fn random_instance(n: usize, seed: u64) -> (Graph, Covariates) {
        let mut rng = crate::rng::rng_from_seed(seed);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < 0.4 {
                    edges.push((i, j));
                }
            }
        }
        let x = (0..n * 2).map(|_| rng.random_range(-1.5..1.5)).collect();
        (Graph::from_edges(n, edges).unwrap(), Covariates::new(n, 2, x).unwrap())
    }

    #[test]
    fn two_nodes_one_edge_enumeration() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let x = Covariates::new(2, 1, vec![0.0, 0.0]).unwrap();
        let opt = bruteforce_profile_argmax(&g, &x, 2, BRUTEFORCE_LIMIT).unwrap();
        // together: log 1 - 1 - 2 log 2; apart: the edge sits in the
        // off-diagonal block with the same rate 1
        let together = -1.0 - 2.0 * 2f64.ln();
        assert!((opt.objective - together).abs() < 1e-10);
        assert_eq!(opt.labels.get(0), opt.labels.get(1));
        let mut values = Vec::new();
        for c in [[0, 0], [1, 0], [0, 1], [1, 1]] {
            let labels = Labels::new(c.to_vec(), 2).unwrap();
            let (edges, pairs) = hard_block_counts(&g, &labels);
            let b = block_update(2, BlockMode::Poisson, &edges, &pairs, &BlockMatrix::constant(2, BlockMode::Poisson, 1.0).unwrap(), (1e-10, 1.0 - 1e-10)).unwrap().0;
            values.push(profile_objective(&g, &x, &labels, &Coefficients::zeros(2, 1), &b).unwrap());
        }
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((opt.objective - max).abs() < 1e-10);
    }

    #[test]
    fn optimum_is_permutation_invariant() {
        let (g, x) = random_instance(6, 11);
        let opt = bruteforce_profile_argmax(&g, &x, 2, BRUTEFORCE_LIMIT).unwrap();
        let flipped = Permutation::new(vec![1, 0]).unwrap().relabel(&opt.labels);
        let fit = crate::logit::fit_multilogistic(&x, &flipped.to_one_hot()).unwrap();
        let (edges, pairs) = hard_block_counts(&g, &flipped);
        let b = block_update(2, BlockMode::Poisson, &edges, &pairs, &opt.b, (1e-10, 1.0 - 1e-10)).unwrap().0;
        let v = profile_objective(&g, &x, &flipped, &fit.beta, &b).unwrap();
        assert!((v - opt.objective).abs() < 1e-8);
    }

    #[test]
    fn mpl_at_optimum_does_not_move() {
        for seed in 0..5 {
            let (g, x) = random_instance(7, 20 + seed);
            let opt = bruteforce_profile_argmax(&g, &x, 2, BRUTEFORCE_LIMIT).unwrap();
            let res = mpl_fit(&g, &x, &opt.labels, &FitOptions::default()).unwrap();
            assert_eq!(res.label_changes[0], 0);
            assert_eq!(res.labels, opt.labels);
            assert!((res.objective_trace[0] - opt.objective).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_b_collapses_marginal() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let x = Covariates::new(2, 1, vec![0.4, -0.9]).unwrap();
        let b = BlockMatrix::constant(2, BlockMode::Bernoulli, 0.3).unwrap();
        let v = bruteforce_marginal_loglik(&g, &x, &Coefficients::zeros(2, 1), &b, BRUTEFORCE_LIMIT).unwrap();
        assert!((v - 0.3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn marginal_increases_with_b_on_complete_graph() {
        let edges: Vec<_> = (0..4).flat_map(|i| ((i + 1)..4).map(move |j| (i, j))).collect();
        let g = Graph::from_edges(4, edges).unwrap();
        let x = Covariates::zeros(4, 1);
        let beta = Coefficients::zeros(2, 1);
        let mut last = f64::NEG_INFINITY;
        for r in [0.1, 0.3, 0.5, 0.9] {
            let b = BlockMatrix::constant(2, BlockMode::Bernoulli, r).unwrap();
            let v = bruteforce_marginal_loglik(&g, &x, &beta, &b, BRUTEFORCE_LIMIT).unwrap();
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn elbo_below_marginal() {
        for seed in 0..5 {
            let (g, x) = random_instance(6, 40 + seed);
            let beta = Coefficients::new(2, 2, vec![0.7, -0.4, 0.0, 0.0]).unwrap();
            let b = BlockMatrix::new(2, BlockMode::Bernoulli, vec![0.6, 0.2, 0.2, 0.45]).unwrap();
            let marginal = bruteforce_marginal_loglik(&g, &x, &beta, &b, BRUTEFORCE_LIMIT).unwrap();
            let mut rng = crate::rng::rng_from_seed(seed);
            let q = crate::inference::random_soft_labels(6, 2, &mut rng).unwrap();
            assert!(marginal - elbo(&g, &x, &q, &beta, &b).unwrap() >= -1e-10);
            let uniform = SoftLabels::uniform(6, 2);
            assert!(marginal - elbo(&g, &x, &uniform, &beta, &b).unwrap() >= -1e-10);
        }
    }

    #[test]
    fn limit_is_enforced() {
        let (g, x) = random_instance(11, 1);
        assert!(matches!(
            bruteforce_profile_argmax(&g, &x, 2, BRUTEFORCE_LIMIT),
            Err(NsbmError::TooLarge { n: 11, limit: 10 })
        ));
        let b = BlockMatrix::constant(2, BlockMode::Bernoulli, 0.3).unwrap();
        assert!(bruteforce_marginal_loglik(&g, &x, &Coefficients::zeros(2, 2), &b, BRUTEFORCE_LIMIT).is_err());
    }
}
