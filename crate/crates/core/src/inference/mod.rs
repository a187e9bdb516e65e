//! Refinement of an initial partition: variational EM over soft
//! responsibilities and maximum profile likelihood over hard labels, with
//! brute-force oracles for tiny graphs.

mod bruteforce;
mod mpl;
mod objective;
mod vem;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{NsbmError, Result};
use crate::logit::LogitOptions;
use crate::rng::Rng;
use crate::types::{Labels, SoftLabels, BLOCK_FLOOR};

pub use bruteforce::{bruteforce_marginal_loglik, bruteforce_profile_argmax, ProfileOptimum, BRUTEFORCE_LIMIT};
pub use mpl::{mpl_fit, mpl_random_restarts, MplResult};
pub use objective::{elbo, profile_objective};
pub use vem::{vem_fit, vem_random_restarts, VemResult};

/// Mass moved off the assigned class when hard labels seed a soft fit.
pub const HARD_TO_SOFT_TAU: f64 = 0.1;

/// Default number of random starts when no initial partition is given.
pub const DEFAULT_RESTARTS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_outer: usize,
    /// Relative objective change that ends the outer loop.
    pub rel_tol: f64,
    pub inner_sweeps_max: usize,
    /// Largest responsibility change in a sweep that ends the inner loop.
    pub inner_tol: f64,
    /// Floor and ceiling for Bernoulli block rates; Poisson rates use the
    /// floor only.
    pub b_clamp: (f64, f64),
    pub logit: LogitOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_outer: 500,
            rel_tol: 1e-8,
            inner_sweeps_max: 50,
            inner_tol: 1e-6,
            b_clamp: (BLOCK_FLOOR, 1.0 - BLOCK_FLOOR),
            logit: LogitOptions::default(),
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer == 0 || self.inner_sweeps_max == 0 {
            return Err(NsbmError::InvalidInput("iteration limits must be positive".into()));
        }
        if !(self.rel_tol > 0.0 && self.inner_tol > 0.0) {
            return Err(NsbmError::InvalidInput("tolerances must be positive".into()));
        }
        let (lo, hi) = self.b_clamp;
        if !(lo > 0.0 && lo < hi && hi < 1.0) {
            return Err(NsbmError::InvalidInput(format!("block clamp ({lo}, {hi})")));
        }
        Ok(())
    }
}

/// Per-row argmax; ties go to the lowest class index.
pub fn labels_from_soft(q: &SoftLabels) -> Labels {
    q.argmax_labels()
}

/// Independent uniform labels.
pub fn random_labels(n: usize, k: usize, rng: &mut Rng) -> Result<Labels> {
    Labels::new((0..n).map(|_| rng.random_range(0..k)).collect(), k)
}

/// Independent rows drawn from the flat Dirichlet distribution.
pub fn random_soft_labels(n: usize, k: usize, rng: &mut Rng) -> Result<SoftLabels> {
    let mut q = Vec::with_capacity(n * k);
    for _ in 0..n {
        // normalized unit exponentials
        let row: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let s: f64 = row.iter().sum();
        q.extend(row.iter().map(|v| v / s));
    }
    SoftLabels::new(n, k, q)
}

fn relative_change(prev: f64, cur: f64) -> f64 {
    (cur - prev).abs() / prev.abs().max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_hot_rows_give_positions() {
        let c = Labels::new(vec![1, 0, 2, 2], 3).unwrap();
        assert_eq!(labels_from_soft(&c.to_one_hot()), c);
    }

    #[test]
    fn tie_goes_to_first_class() {
        let q = SoftLabels::new(1, 2, vec![0.5, 0.5]).unwrap();
        assert_eq!(labels_from_soft(&q).get(0), 0);
    }

    #[test]
    fn options_validation() {
        assert!(FitOptions::default().validate().is_ok());
        let bad = FitOptions {
            rel_tol: 0.0,
            ..FitOptions::default()
        };
        assert!(bad.validate().is_err());
        let bad = FitOptions {
            b_clamp: (0.5, 0.4),
            ..FitOptions::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn dirichlet_rows_are_valid() {
        let mut rng = crate::rng::rng_from_seed(3);
        let q = random_soft_labels(50, 3, &mut rng).unwrap();
        for i in 0..50 {
            assert!((q.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn argmax_matches_row_scan(vals in proptest::collection::vec(0.01f64..1.0, 3 * 12)) {
            let mut q = Vec::new();
            for r in vals.chunks(3) {
                let s: f64 = r.iter().sum();
                q.extend(r.iter().map(|v| v / s));
            }
            let soft = SoftLabels::new(12, 3, q).unwrap();
            let labels = labels_from_soft(&soft);
            for i in 0..12 {
                let row = soft.row(i);
                let mut best = 0;
                for a in 1..3 {
                    if row[a] > row[best] {
                        best = a;
                    }
                }
                prop_assert_eq!(labels.get(i), best);
            }
        }
    }
}
