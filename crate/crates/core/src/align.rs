//! Label-permutation utilities.
//!
//! Community labels are identified only up to relabeling, so estimates are
//! compared to a reference after solving the assignment problem on the
//! confusion matrix.

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{NsbmError, Result};
use crate::types::{Coefficients, Labels};

/// Largest class count solved by exhaustive enumeration.
const EXHAUSTIVE_MAX_K: usize = 6;

/// A bijection on `0..k`, read as `old label -> new label`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &m in &map {
            if m >= map.len() || seen[m] {
                return Err(NsbmError::InvalidInput(format!("{map:?} is not a permutation")));
            }
            seen[m] = true;
        }
        Ok(Permutation(map))
    }

    pub fn identity(k: usize) -> Self {
        Permutation((0..k).collect())
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn apply(&self, label: usize) -> usize {
        self.0[label]
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.0.len()];
        for (old, &new) in self.0.iter().enumerate() {
            inv[new] = old;
        }
        Permutation(inv)
    }

    pub fn compose(&self, then: &Permutation) -> Permutation {
        Permutation(self.0.iter().map(|&m| then.apply(m)).collect())
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &m)| i == m)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn relabel(&self, labels: &Labels) -> Labels {
        let mapped = labels.as_slice().iter().map(|&c| self.apply(c)).collect();
        Labels::new(mapped, labels.k().max(self.k())).expect("permutation keeps labels in range")
    }
}

/// Returns the permutation `sigma` maximizing `#{i : sigma(estimate_i) == reference_i}`.
///
/// Ties resolve to the lexicographically first permutation, so the identity
/// wins whenever it is optimal.
pub fn align_labels(reference: &Labels, estimate: &Labels) -> Result<Permutation> {
    if reference.len() != estimate.len() {
        return Err(NsbmError::DimensionMismatch(format!(
            "reference has {} nodes, estimate has {}",
            reference.len(),
            estimate.len()
        )));
    }
    let k = reference.k().max(estimate.k());
    // overlap[e][r] = #{i : estimate_i = e, reference_i = r}
    let mut overlap = vec![vec![0i64; k]; k];
    for (&r, &e) in reference.as_slice().iter().zip(estimate.as_slice()) {
        overlap[e][r] += 1;
    }

    if k <= EXHAUSTIVE_MAX_K {
        let mut perm: Vec<usize> = (0..k).collect();
        let mut best = perm.clone();
        let mut best_score = score(&overlap, &perm);
        while next_permutation(&mut perm) {
            let s = score(&overlap, &perm);
            if s > best_score {
                best_score = s;
                best.clone_from(&perm);
            }
        }
        Ok(Permutation(best))
    } else {
        let weights = Matrix::from_rows(overlap).expect("square overlap matrix");
        let (_, assignment) = kuhn_munkres(&weights);
        Ok(Permutation(assignment))
    }
}

fn score(overlap: &[Vec<i64>], perm: &[usize]) -> i64 {
    perm.iter().enumerate().map(|(e, &r)| overlap[e][r]).sum()
}

fn next_permutation(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Re-expresses coefficients fitted under the old labels in terms of the new
/// labels `sigma(old)`, keeping the last row at zero.
///
/// Class probabilities are unchanged: `P'(sigma(a) | x) == P(a | x)`.
pub fn permute_coefficients(beta: &Coefficients, sigma: &Permutation) -> Result<Coefficients> {
    let k = beta.k();
    let p = beta.p();
    if sigma.k() != k {
        return Err(NsbmError::DimensionMismatch(format!(
            "permutation on {} classes applied to {k}-class coefficients",
            sigma.k()
        )));
    }
    let pivot = beta.row(sigma.inverse().apply(k - 1)).to_vec();
    let mut out = vec![0.0; k * p];
    for old in 0..k {
        let new = sigma.apply(old);
        for (j, (&b, &piv)) in beta.row(old).iter().zip(&pivot).enumerate() {
            out[new * p + j] = b - piv;
        }
    }
    for v in &mut out[(k - 1) * p..] {
        *v = 0.0;
    }
    Coefficients::new(k, p, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logit::predict_probs;
    use crate::types::Covariates;
    use proptest::prelude::*;

    fn labels(v: &[usize], k: usize) -> Labels {
        Labels::new(v.to_vec(), k).unwrap()
    }

    #[test]
    fn identical_labelings_align_to_identity() {
        let a = labels(&[0, 1, 0, 1], 2);
        assert!(align_labels(&a, &a).unwrap().is_identity());
    }

    #[test]
    fn full_swap() {
        let sigma = align_labels(&labels(&[0, 0, 1, 1], 2), &labels(&[1, 1, 0, 0], 2)).unwrap();
        assert_eq!(sigma.as_slice(), &[1, 0]);
    }

    #[test]
    fn three_cycle_matches_exhaustive_search() {
        let reference = labels(&[0, 0, 1, 1, 2, 2], 3);
        let estimate = labels(&[1, 1, 2, 2, 0, 0], 3);
        let sigma = align_labels(&reference, &estimate).unwrap();
        // oracle: score every one of the 3! maps directly
        let mut perms = vec![vec![0, 1, 2]];
        let mut p = vec![0, 1, 2];
        while next_permutation(&mut p) {
            perms.push(p.clone());
        }
        assert_eq!(perms.len(), 6);
        let hits = |m: &[usize]| {
            (0..6)
                .filter(|&i| m[estimate.get(i)] == reference.get(i))
                .count()
        };
        let best = perms.iter().max_by_key(|m| hits(m)).unwrap();
        assert_eq!(hits(best), 6);
        assert_eq!(sigma.as_slice(), best.as_slice());
        assert_eq!(sigma.as_slice(), &[2, 0, 1]);
    }

    #[test]
    fn hungarian_path_for_large_k() {
        let k = 8;
        let reference: Vec<usize> = (0..40).map(|i| i % k).collect();
        let shift = Permutation::new((0..k).map(|c| (c + 3) % k).collect()).unwrap();
        let estimate = shift.relabel(&labels(&reference, k));
        let sigma = align_labels(&labels(&reference, k), &estimate).unwrap();
        assert_eq!(sigma, shift.inverse());
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(align_labels(&labels(&[0, 1], 2), &labels(&[0, 1, 1], 2)).is_err());
    }

    #[test]
    fn identity_leaves_coefficients_unchanged() {
        let beta = Coefficients::new(3, 2, vec![1.0, -2.0, 0.5, 0.25, 0.0, 0.0]).unwrap();
        let out = permute_coefficients(&beta, &Permutation::identity(3)).unwrap();
        assert_eq!(out, beta);
    }

    #[test]
    fn two_class_swap_flips_sign() {
        let beta = Coefficients::new(2, 2, vec![0.7, -1.3, 0.0, 0.0]).unwrap();
        let out = permute_coefficients(&beta, &Permutation::new(vec![1, 0]).unwrap()).unwrap();
        assert_eq!(out.values(), &[-0.7, 1.3, 0.0, 0.0]);
    }

    fn perm_strategy(k: usize) -> impl Strategy<Value = Permutation> {
        Just((0..k).collect::<Vec<_>>())
            .prop_shuffle()
            .prop_map(|v| Permutation::new(v).unwrap())
    }

    proptest! {
        #[test]
        fn relabeled_coefficients_preserve_probabilities(
            free in proptest::collection::vec(-3.0f64..3.0, 6),
            xs in proptest::collection::vec(-2.0f64..2.0, 9),
            sigma in perm_strategy(3),
        ) {
            let beta = Coefficients::from_free_rows(3, 3, &free).unwrap();
            let x = Covariates::new(3, 3, xs).unwrap();
            let before = predict_probs(&beta, &x).unwrap();
            let after = predict_probs(&permute_coefficients(&beta, &sigma).unwrap(), &x).unwrap();
            for i in 0..3 {
                for a in 0..3 {
                    prop_assert!((before[i * 3 + a] - after[i * 3 + sigma.apply(a)]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn permute_then_inverse_is_identity(
            free in proptest::collection::vec(-3.0f64..3.0, 8),
            sigma in perm_strategy(5),
        ) {
            let beta = Coefficients::from_free_rows(5, 2, &free).unwrap();
            let there = permute_coefficients(&beta, &sigma).unwrap();
            let back = permute_coefficients(&there, &sigma.inverse()).unwrap();
            for (a, b) in back.values().iter().zip(beta.values()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn alignment_recovers_inverse_relabeling(
            sigma in perm_strategy(4),
            extra in proptest::collection::vec(0usize..4, 0..20),
        ) {
            let mut base: Vec<usize> = (0..4).collect();
            base.extend(extra);
            let reference = labels(&base, 4);
            prop_assert!(align_labels(&reference, &reference).unwrap().is_identity());
            let relabeled = sigma.relabel(&reference);
            let found = align_labels(&reference, &relabeled).unwrap();
            // any optimal map must send every relabeled class back exactly
            prop_assert_eq!(found, sigma.inverse());
        }
    }
}
