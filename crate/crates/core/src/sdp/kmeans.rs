use rand::Rng as _;

use crate::error::{NsbmError, Result};
use crate::rng::{stream, Rng};
use crate::types::Labels;

const MAX_LLOYD_ITERS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansResult {
    pub labels: Labels,
    /// Within-cluster sum of squares of the returned partition.
    pub wcss: f64,
    /// Fewer than `k` distinct points, or the best run ended with an empty
    /// cluster.
    pub degenerate: bool,
}

/// Lloyd's algorithm from k-means++ seeds, best of `restarts` by WCSS.
///
/// `points` is row-major `m x d`. Restart `r` draws from stream `r` of
/// `seed`; ties between runs keep the earliest.
pub fn kmeans(points: &[f64], m: usize, d: usize, k: usize, restarts: usize, seed: u64) -> Result<KmeansResult> {
    if points.len() != m * d {
        return Err(NsbmError::DimensionMismatch(format!(
            "point buffer has {} entries, expected {m} x {d}",
            points.len()
        )));
    }
    if k < 2 || m < k {
        return Err(NsbmError::InvalidInput(format!(
            "k-means needs 2 <= k <= m, got k = {k}, m = {m}"
        )));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(NsbmError::NonFinite("k-means input".into()));
    }
    let distinct_short = count_distinct_up_to(points, m, d, k) < k;
    let mut best: Option<(Vec<usize>, f64)> = None;
    for r in 0..restarts.max(1) {
        let mut rng = stream(seed, r as u64);
        let centers = plus_plus_seeds(points, m, d, k, &mut rng);
        let (assign, wcss) = lloyd(points, m, d, k, centers);
        if best.as_ref().is_none_or(|(_, b)| wcss < *b) {
            best = Some((assign, wcss));
        }
    }
    let (assign, wcss) = best.expect("at least one restart");
    let mut sizes = vec![0usize; k];
    assign.iter().for_each(|&a| sizes[a] += 1);
    let degenerate = distinct_short || sizes.contains(&0);
    Ok(KmeansResult {
        labels: Labels::new(assign, k)?,
        wcss,
        degenerate,
    })
}

fn count_distinct_up_to(points: &[f64], m: usize, d: usize, limit: usize) -> usize {
    let mut reps: Vec<usize> = Vec::new();
    for i in 0..m {
        let row = &points[i * d..(i + 1) * d];
        if !reps.iter().any(|&r| &points[r * d..(r + 1) * d] == row) {
            reps.push(i);
            if reps.len() >= limit {
                break;
            }
        }
    }
    reps.len()
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn plus_plus_seeds(points: &[f64], m: usize, d: usize, k: usize, rng: &mut Rng) -> Vec<f64> {
    let mut centers = Vec::with_capacity(k * d);
    let first = rng.random_range(0..m);
    centers.extend_from_slice(&points[first * d..(first + 1) * d]);
    let mut dist: Vec<f64> = (0..m)
        .map(|i| sq_dist(&points[i * d..(i + 1) * d], &centers[..d]))
        .collect();
    for c in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = m - 1;
            for (i, &w) in dist.iter().enumerate() {
                acc += w;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..m)
        };
        centers.extend_from_slice(&points[pick * d..(pick + 1) * d]);
        let new_center = &centers[c * d..(c + 1) * d];
        for (i, di) in dist.iter_mut().enumerate() {
            *di = di.min(sq_dist(&points[i * d..(i + 1) * d], new_center));
        }
    }
    centers
}

fn lloyd(points: &[f64], m: usize, d: usize, k: usize, mut centers: Vec<f64>) -> (Vec<usize>, f64) {
    let mut assign = vec![usize::MAX; m];
    for _ in 0..MAX_LLOYD_ITERS {
        let mut changed = false;
        for i in 0..m {
            let p = &points[i * d..(i + 1) * d];
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let dc = sq_dist(p, &centers[c * d..(c + 1) * d]);
                if dc < best_d {
                    best_d = dc;
                    best = c;
                }
            }
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for i in 0..m {
            let a = assign[i];
            counts[a] += 1;
            for (s, v) in sums[a * d..(a + 1) * d].iter_mut().zip(&points[i * d..(i + 1) * d]) {
                *s += v;
            }
        }
        for c in 0..k {
            // empty clusters keep their previous center
            if counts[c] > 0 {
                for j in 0..d {
                    centers[c * d + j] = sums[c * d + j] / counts[c] as f64;
                }
            }
        }
    }
    (assign.clone(), wcss(points, d, k, &assign))
}

/// Within-cluster sum of squares around the cluster means.
pub fn wcss(points: &[f64], d: usize, k: usize, assign: &[usize]) -> f64 {
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for (i, &a) in assign.iter().enumerate() {
        counts[a] += 1;
        for j in 0..d {
            sums[a * d + j] += points[i * d + j];
        }
    }
    assign
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            (0..d)
                .map(|j| {
                    let mean = sums[a * d + j] / counts[a] as f64;
                    (points[i * d + j] - mean).powi(2)
                })
                .sum::<f64>()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::nmi;

    #[test]
    fn separated_clusters_recovered() {
        let mut rng = crate::rng::rng_from_seed(1);
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for c in 0..3 {
            for _ in 0..20 {
                pts.push(10.0 * c as f64 + rng.random_range(-0.5..0.5));
                pts.push(-5.0 * c as f64 + rng.random_range(-0.5..0.5));
                truth.push(c);
            }
        }
        let res = kmeans(&pts, 60, 2, 3, 5, 7).unwrap();
        assert_eq!(nmi(&res.labels, &Labels::new(truth, 3).unwrap()).unwrap(), 1.0);
        assert!(!res.degenerate);
    }

    #[test]
    fn identical_points_flagged() {
        let res = kmeans(&[1.0; 10], 5, 2, 2, 3, 0).unwrap();
        assert!(res.degenerate);
        assert_eq!(res.wcss, 0.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let mut rng = crate::rng::rng_from_seed(2);
        let pts: Vec<f64> = (0..80).map(|_| rng.random_range(0.0..1.0)).collect();
        let a = kmeans(&pts, 40, 2, 3, 4, 11).unwrap();
        let b = kmeans(&pts, 40, 2, 3, 4, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn matches_exhaustive_partition_oracle() {
        for seed in 0..10 {
            let mut rng = crate::rng::rng_from_seed(100 + seed);
            let pts: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut best = f64::INFINITY;
            for mask in 1u32..255 {
                let assign: Vec<usize> = (0..8).map(|i| ((mask >> i) & 1) as usize).collect();
                best = best.min(wcss(&pts, 2, 2, &assign));
            }
            let res = kmeans(&pts, 8, 2, 2, 64, seed).unwrap();
            assert!(res.wcss <= best + 1e-9, "seed {seed}: {} vs {best}", res.wcss);
        }
    }

    #[test]
    fn rejects_too_few_points() {
        assert!(kmeans(&[0.0, 1.0], 2, 1, 3, 1, 0).is_err());
    }
}
