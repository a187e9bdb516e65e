//! Synthetic data: node-coupled SBM draws, the two benchmark scenarios, and
//! conversion of weighted directed networks into simple graphs.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{NsbmError, Result};
use crate::logit::softmax_into;
use crate::rng::{rng_from_seed, Rng};
use crate::types::{
    Coefficients, CovariateBlock, CovariateLaw, Covariates, Graph, Labels, Membership, ModelParams,
};

/// A generated network with covariates and its planted labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub graph: Graph,
    pub covariates: Covariates,
    pub labels: Labels,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// Gaussian covariates with means `+-(0, 0.4, 0.6, 0.8)`; the model is
    /// well specified.
    A,
    /// Correlated Gaussian pair, a Bernoulli and a uniform covariate; the
    /// logistic membership model is misspecified.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub n: usize,
}

pub const SCENARIO_BBAR: [f64; 4] = [1.6, 0.4, 0.4, 1.6];
pub const SCENARIO_A_MEAN: [f64; 4] = [0.0, 0.4, 0.6, 0.8];

/// `rho_n = 3 (ln n)^1.5 / (4n)`.
pub fn scenario_rho(n: usize) -> f64 {
    let n = n as f64;
    3.0 * n.ln().powf(1.5) / (4.0 * n)
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario, n: usize) -> Self {
        ScenarioSpec { scenario, n }
    }

    pub fn params(&self) -> ModelParams {
        let laws = match self.scenario {
            Scenario::A => {
                let neg: Vec<f64> = SCENARIO_A_MEAN.iter().map(|m| -m).collect();
                vec![
                    CovariateLaw::isotropic_normal(SCENARIO_A_MEAN.to_vec()),
                    CovariateLaw::isotropic_normal(neg),
                ]
            }
            Scenario::B => {
                let cov = vec![1.0, 0.3, 0.3, 1.0];
                let class = |sign: f64, bern: f64, low: f64, high: f64| CovariateLaw {
                    blocks: vec![
                        CovariateBlock::Gaussian {
                            mean: vec![0.5 * sign, 0.5 * sign],
                            cov: cov.clone(),
                        },
                        CovariateBlock::Bernoulli { p: bern },
                        CovariateBlock::Uniform { low, high },
                    ],
                };
                vec![class(1.0, 0.6, -0.2, 0.5), class(-1.0, 0.4, -0.5, 0.2)]
            }
        };
        ModelParams {
            rho: scenario_rho(self.n),
            k: 2,
            bbar: SCENARIO_BBAR.to_vec(),
            membership: Membership::ClassConditional {
                prior: vec![0.5, 0.5],
                laws,
            },
        }
    }
}

/// Logistic coefficients implied by scenario A: the Gaussian log-odds
/// `log phi(x - mu) / phi(x + mu) = 2 mu' x`.
pub fn scenario_a_true_beta() -> Coefficients {
    let mut beta: Vec<f64> = SCENARIO_A_MEAN.iter().map(|m| 2.0 * m).collect();
    beta.extend([0.0; 4]);
    Coefficients::new(2, 4, beta).expect("valid scenario coefficients")
}

pub fn generate_scenario(spec: &ScenarioSpec, seed: u64) -> Result<Sample> {
    if spec.n < 50 {
        return Err(NsbmError::InvalidInput(format!(
            "scenario generation needs n >= 50, got {}",
            spec.n
        )));
    }
    generate_nsbm(&spec.params(), spec.n, seed)
}

/// Draws `(A, X, c)`.
///
/// Under [`Membership::Logistic`] the covariates come first and labels follow
/// the multi-logistic law given `x`; under [`Membership::ClassConditional`]
/// labels come first. Edges are independent Bernoulli(`rho * bbar[c_i][c_j]`)
/// for `i < j`.
pub fn generate_nsbm(params: &ModelParams, n: usize, seed: u64) -> Result<Sample> {
    params.validate()?;
    let k = params.k;
    let mut rng = rng_from_seed(seed);
    let (covariates, labels) = match &params.membership {
        Membership::Logistic { beta, marginal } => {
            let p = marginal.dim();
            let mut xs = Vec::with_capacity(n * p);
            let mut cs = Vec::with_capacity(n);
            let mut eta = vec![0.0; k];
            let mut prob = vec![0.0; k];
            for _ in 0..n {
                let start = xs.len();
                sample_law(marginal, &mut rng, &mut xs)?;
                beta.linear_predictors(&xs[start..], &mut eta);
                softmax_into(&eta, &mut prob);
                cs.push(sample_categorical(&prob, &mut rng));
            }
            (Covariates::new(n, p, xs)?, Labels::new(cs, k)?)
        }
        Membership::ClassConditional { prior, laws } => {
            let p = laws[0].dim();
            let cs: Vec<usize> = (0..n).map(|_| sample_categorical(prior, &mut rng)).collect();
            let mut xs = Vec::with_capacity(n * p);
            for &c in &cs {
                sample_law(&laws[c], &mut rng, &mut xs)?;
            }
            (Covariates::new(n, p, xs)?, Labels::new(cs, k)?)
        }
    };

    let mut adjacency = vec![0u8; n * n];
    for i in 0..n {
        let ci = labels.get(i);
        for j in (i + 1)..n {
            let prob = params.rho * params.bbar[ci * k + labels.get(j)];
            if rng.random::<f64>() < prob {
                adjacency[i * n + j] = 1;
                adjacency[j * n + i] = 1;
            }
        }
    }
    Ok(Sample {
        graph: Graph::from_dense(n, adjacency)?,
        covariates,
        labels,
    })
}

fn sample_categorical(prob: &[f64], rng: &mut Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (a, &w) in prob.iter().enumerate() {
        acc += w;
        if u < acc {
            return a;
        }
    }
    prob.len() - 1
}

fn sample_law(law: &CovariateLaw, rng: &mut Rng, out: &mut Vec<f64>) -> Result<()> {
    for block in &law.blocks {
        match block {
            CovariateBlock::Gaussian { mean, cov } => {
                let d = mean.len();
                let chol = cholesky(d, cov).ok_or_else(|| {
                    NsbmError::InvalidInput("Gaussian covariance is not positive definite".into())
                })?;
                let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                for i in 0..d {
                    let v: f64 = (0..=i).map(|j| chol[i * d + j] * z[j]).sum();
                    out.push(mean[i] + v);
                }
            }
            CovariateBlock::Bernoulli { p } => {
                out.push(if rng.random::<f64>() < *p { 1.0 } else { 0.0 });
            }
            CovariateBlock::Uniform { low, high } => {
                out.push(low + (high - low) * rng.random::<f64>());
            }
        }
    }
    Ok(())
}

/// Lower Cholesky factor of a small SPD matrix.
fn cholesky(d: usize, a: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|m| l[i * d + m] * l[j * d + m]).sum();
            if i == j {
                let v = a[i * d + i] - s;
                if v <= 0.0 {
                    return None;
                }
                l[i * d + i] = v.sqrt();
            } else {
                l[i * d + j] = (a[i * d + j] - s) / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// Directed network with small integer weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedDigraph {
    n: usize,
    weights: Vec<u32>,
}

pub const MAX_EDGE_WEIGHT: u32 = 6;

impl WeightedDigraph {
    pub fn new(n: usize, weights: Vec<u32>) -> Result<Self> {
        if weights.len() != n * n {
            return Err(NsbmError::DimensionMismatch(format!(
                "weight matrix has {} entries, expected {n} x {n}",
                weights.len()
            )));
        }
        if let Some(pos) = weights.iter().position(|&w| w > MAX_EDGE_WEIGHT) {
            return Err(NsbmError::InvalidInput(format!(
                "weight {} at ({}, {}) exceeds {MAX_EDGE_WEIGHT}",
                weights[pos],
                pos / n,
                pos % n
            )));
        }
        let mut weights = weights;
        for i in 0..n {
            weights[i * n + i] = 0;
        }
        Ok(WeightedDigraph { n, weights })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> u32 {
        self.weights[i * self.n + j]
    }
}

/// Keeps the undirected edge `{i, j}` iff both `w_ij` and `w_ji` exceed
/// `threshold`, then drops isolated nodes.
///
/// Returns the graph and the surviving original indices in ascending order.
pub fn preprocess_weighted_digraph(g: &WeightedDigraph, threshold: u32) -> Result<(Graph, Vec<usize>)> {
    if threshold > MAX_EDGE_WEIGHT {
        return Err(NsbmError::InvalidInput(format!(
            "threshold {threshold} outside 0..={MAX_EDGE_WEIGHT}"
        )));
    }
    let n = g.n();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if g.weight(i, j) > threshold && g.weight(j, i) > threshold {
                edges.push((i, j));
            }
        }
    }
    let full = Graph::from_edges(n, edges)?;
    let kept: Vec<usize> = (0..n).filter(|&i| full.degree(i) > 0).collect();
    if kept.is_empty() {
        return Err(NsbmError::DegenerateGraph(format!(
            "no mutual edges above threshold {threshold}; every node is isolated"
        )));
    }
    Ok((full.induced(&kept), kept))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logistic_params(rho: f64, beta: Coefficients) -> ModelParams {
        let p = beta.p();
        ModelParams {
            rho,
            k: beta.k(),
            bbar: vec![1.0; beta.k() * beta.k()],
            membership: Membership::Logistic {
                beta,
                marginal: CovariateLaw::isotropic_normal(vec![0.0; p]),
            },
        }
    }

    #[test]
    fn zero_rho_gives_empty_graph() {
        let s = generate_nsbm(&logistic_params(0.0, Coefficients::zeros(2, 2)), 50, 1).unwrap();
        assert_eq!(s.graph.edge_count(), 0);
    }

    #[test]
    fn zero_coefficients_balance_classes() {
        let s = generate_nsbm(&logistic_params(0.0, Coefficients::zeros(3, 2)), 10_000, 2).unwrap();
        for size in s.labels.class_sizes() {
            assert!((size as f64 / 10_000.0 - 1.0 / 3.0).abs() < 0.02);
        }
    }

    #[test]
    fn same_seed_same_sample() {
        let spec = ScenarioSpec::new(Scenario::B, 120);
        let a = generate_scenario(&spec, 5).unwrap();
        let b = generate_scenario(&spec, 5).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.graph, generate_scenario(&spec, 6).unwrap().graph);
    }

    #[test]
    fn scenario_a_class_means() {
        let s = generate_scenario(&ScenarioSpec::new(Scenario::A, 1000), 11).unwrap();
        for class in 0..2 {
            let idx: Vec<usize> = (0..1000).filter(|&i| s.labels.get(i) == class).collect();
            let sign = if class == 0 { 1.0 } else { -1.0 };
            for j in 0..4 {
                let m = idx.iter().map(|&i| s.covariates.get(i, j)).sum::<f64>() / idx.len() as f64;
                assert!((m - sign * SCENARIO_A_MEAN[j]).abs() < 4.0 / 500f64.sqrt(), "class {class} col {j}: {m}");
            }
        }
    }

    #[test]
    fn scenario_b_marginals() {
        let s = generate_scenario(&ScenarioSpec::new(Scenario::B, 4000), 3).unwrap();
        let idx: Vec<usize> = (0..4000).filter(|&i| s.labels.get(i) == 0).collect();
        let m = |j: usize| idx.iter().map(|&i| s.covariates.get(i, j)).sum::<f64>() / idx.len() as f64;
        assert!((m(0) - 0.5).abs() < 0.1);
        assert!((m(2) - 0.6).abs() < 0.05);
        assert!((m(3) - 0.15).abs() < 0.03);
        assert!(idx.iter().all(|&i| (-0.2..=0.5).contains(&s.covariates.get(i, 3))));
    }

    #[test]
    fn rates_too_large_are_rejected() {
        let params = logistic_params(1.0, Coefficients::zeros(2, 1));
        let mut bad = params.clone();
        bad.bbar = vec![1.5, 0.1, 0.1, 1.0];
        assert!(generate_nsbm(&bad, 10, 0).is_err());
    }

    #[test]
    fn mutual_threshold_rule() {
        let mut w = vec![0u32; 9];
        w[1] = 4; // 0 -> 1
        w[3] = 4; // 1 -> 0
        w[2] = 6; // 0 -> 2
        w[6] = 2; // 2 -> 0
        let g = WeightedDigraph::new(3, w).unwrap();
        let (graph, kept) = preprocess_weighted_digraph(&g, 3).unwrap();
        assert_eq!(kept, vec![0, 1]);
        assert_eq!(graph.edge_count(), 1);
        assert!(graph.has_edge(0, 1));
    }

    #[test]
    fn all_isolated_is_an_error() {
        let g = WeightedDigraph::new(4, vec![0; 16]).unwrap();
        assert!(matches!(
            preprocess_weighted_digraph(&g, 3),
            Err(NsbmError::DegenerateGraph(_))
        ));
    }

    #[test]
    fn preprocessing_commutes_with_node_relabeling() {
        let mut rng = rng_from_seed(4);
        let n = 12;
        let w: Vec<u32> = (0..n * n).map(|_| rng.random_range(0..=6)).collect();
        let g = WeightedDigraph::new(n, w.clone()).unwrap();
        let perm: Vec<usize> = (0..n).rev().collect();
        let mut pw = vec![0u32; n * n];
        for i in 0..n {
            for j in 0..n {
                pw[perm[i] * n + perm[j]] = w[i * n + j];
            }
        }
        let (g1, k1) = preprocess_weighted_digraph(&g, 3).unwrap();
        let (g2, k2) = preprocess_weighted_digraph(&WeightedDigraph::new(n, pw).unwrap(), 3).unwrap();
        assert_eq!(g1.edge_count(), g2.edge_count());
        let mut mapped: Vec<usize> = k1.iter().map(|&i| perm[i]).collect();
        mapped.sort_unstable();
        assert_eq!(mapped, k2);
        for (a, &i) in k1.iter().enumerate() {
            for (b, &j) in k1.iter().enumerate() {
                let a2 = k2.iter().position(|&v| v == perm[i]).unwrap();
                let b2 = k2.iter().position(|&v| v == perm[j]).unwrap();
                assert_eq!(g1.has_edge(a, b), g2.has_edge(a2, b2));
            }
        }
        assert!((0..g1.n()).all(|i| g1.degree(i) > 0));
    }
}
