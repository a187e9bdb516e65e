use faer::{Mat, Side};

use crate::error::{NsbmError, Result};
use crate::types::{Graph, Labels};

use super::kmeans::kmeans;

/// k-means on the rows of the `k` adjacency eigenvectors with the largest
/// absolute eigenvalues.
pub fn spectral_cluster(g: &Graph, k: usize, seed: u64) -> Result<Labels> {
    let n = g.n();
    if n < k {
        return Err(NsbmError::InvalidInput(format!(
            "spectral clustering needs n >= k, got n = {n}, k = {k}"
        )));
    }
    let a = Mat::from_fn(n, n, |i, j| g.adjacency(i, j));
    let evd = a.self_adjoint_eigen(Side::Lower).map_err(|_| NsbmError::Eigen)?;
    let s = evd.S();
    let u = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| s[y].abs().total_cmp(&s[x].abs()).then(x.cmp(&y)));
    let cols = &order[..k];
    let mut embedding = Vec::with_capacity(n * k);
    for i in 0..n {
        embedding.extend(cols.iter().map(|&c| u[(i, c)]));
    }
    Ok(kmeans(&embedding, n, k, k, 10, seed)?.labels)
}
