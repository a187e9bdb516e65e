//! Convex initialization: an ADMM solver for the covariate-augmented SDP
//! relaxation, k-means rounding, and the spectral estimate used to pick the
//! sum constraint.

mod admm;
mod kmeans;
mod psd;
mod spectral;

use serde::{Deserialize, Serialize};

pub use admm::{affinity_matrix, solve_sdp, Feasibility, SdpConfig, SdpSolution};
pub use kmeans::{kmeans, wcss, KmeansResult};
pub use psd::{psd_project, symmetric_eigenvalues};
pub use spectral::spectral_cluster;

use crate::error::{NsbmError, Result};
use crate::types::{Covariates, Graph, Labels};

/// Restarts used when rounding the SDP solution.
pub const ROUNDING_RESTARTS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SdpInit {
    pub labels: Labels,
    pub solution: SdpSolution,
    pub degenerate: bool,
}

/// Solves the SDP and clusters the rows of the solution.
pub fn sdp_init(g: &Graph, x: &Covariates, cfg: &SdpConfig, k: usize, seed: u64) -> Result<SdpInit> {
    let solution = solve_sdp(g, x, cfg)?;
    let res = kmeans(&solution.z, solution.n, solution.n, k, ROUNDING_RESTARTS, seed)?;
    Ok(SdpInit {
        labels: res.labels,
        solution,
        degenerate: res.degenerate,
    })
}

pub fn sdp_init_labels(g: &Graph, x: &Covariates, cfg: &SdpConfig, k: usize, seed: u64) -> Result<Labels> {
    Ok(sdp_init(g, x, cfg, k, seed)?.labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaStrategy {
    /// `sum_k n_k^2` from known labels.
    Oracle,
    /// `n^2 / k`.
    Balanced,
    /// `sum_k n_k^2` from spectral-clustering community sizes.
    Spectral,
}

/// Inputs a [`LambdaStrategy`] may need.
#[derive(Debug, Clone, Copy)]
pub struct LambdaInputs<'a> {
    pub n: usize,
    pub k: usize,
    pub truth: Option<&'a Labels>,
    pub graph: Option<&'a Graph>,
    pub seed: u64,
}

pub fn choose_lambda(strategy: LambdaStrategy, inputs: LambdaInputs<'_>) -> Result<f64> {
    let sum_sq = |labels: &Labels| labels.class_sizes().iter().map(|&s| (s * s) as f64).sum::<f64>();
    match strategy {
        LambdaStrategy::Oracle => {
            let truth = inputs
                .truth
                .ok_or_else(|| NsbmError::MissingInput("oracle lambda needs true labels".into()))?;
            Ok(sum_sq(truth))
        }
        LambdaStrategy::Balanced => {
            if inputs.k == 0 {
                return Err(NsbmError::MissingInput("balanced lambda needs k".into()));
            }
            Ok((inputs.n * inputs.n) as f64 / inputs.k as f64)
        }
        LambdaStrategy::Spectral => {
            let graph = inputs
                .graph
                .ok_or_else(|| NsbmError::MissingInput("spectral lambda needs the graph".into()))?;
            Ok(sum_sq(&spectral_cluster(graph, inputs.k, inputs.seed)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::nmi;

    pub(crate) fn two_cliques(size: usize) -> (Graph, Labels) {
        let mut edges = Vec::new();
        for block in 0..2 {
            for i in 0..size {
                for j in (i + 1)..size {
                    edges.push((block * size + i, block * size + j));
                }
            }
        }
        let truth = (0..2 * size).map(|i| i / size).collect();
        (
            Graph::from_edges(2 * size, edges).unwrap(),
            Labels::new(truth, 2).unwrap(),
        )
    }

    #[test]
    fn lambda_strategies() {
        let base = LambdaInputs { n: 100, k: 2, truth: None, graph: None, seed: 0 };
        assert_eq!(choose_lambda(LambdaStrategy::Balanced, base).unwrap(), 5000.0);
        let equal = Labels::new((0..100).map(|i| i / 50).collect(), 2).unwrap();
        let skewed = Labels::new((0..100).map(|i| usize::from(i >= 70)).collect(), 2).unwrap();
        let with = |t| LambdaInputs { truth: Some(t), ..base };
        assert_eq!(choose_lambda(LambdaStrategy::Oracle, with(&equal)).unwrap(), 5000.0);
        assert_eq!(choose_lambda(LambdaStrategy::Oracle, with(&skewed)).unwrap(), 5800.0);
        assert!(choose_lambda(LambdaStrategy::Oracle, base).is_err());
        assert!(choose_lambda(LambdaStrategy::Spectral, base).is_err());
        let (g, _) = two_cliques(10);
        let spec = LambdaInputs { n: 20, k: 2, graph: Some(&g), ..base };
        assert_eq!(choose_lambda(LambdaStrategy::Spectral, spec).unwrap(), 200.0);
    }

    #[test]
    fn spectral_recovers_cliques() {
        let (g, truth) = two_cliques(10);
        let est = spectral_cluster(&g, 2, 3).unwrap();
        assert_eq!(nmi(&truth, &est).unwrap(), 1.0);
    }

    #[test]
    fn sdp_recovers_cliques() {
        let (g, truth) = two_cliques(10);
        let x = Covariates::zeros(20, 1);
        let init = sdp_init(&g, &x, &SdpConfig::new(0.0, 200.0), 2, 1).unwrap();
        assert_eq!(nmi(&truth, &init.labels).unwrap(), 1.0);
    }
}
