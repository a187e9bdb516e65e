use faer::{Mat, MatRef, Side};

use crate::error::{NsbmError, Result};

/// Frobenius-nearest positive semidefinite matrix: eigendecompose, zero the
/// negative eigenvalues, reconstruct.
///
/// `m` is an `n x n` buffer; the input is symmetrized as `(M + M') / 2`
/// first and the output is exactly symmetric.
pub fn psd_project(n: usize, m: &[f64]) -> Result<Vec<f64>> {
    Ok(psd_project_with_spectrum(n, m)?.0)
}

/// As [`psd_project`], also returning the eigenvalues of the symmetrized
/// input in ascending order.
pub(crate) fn psd_project_with_spectrum(n: usize, m: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if m.len() != n * n {
        return Err(NsbmError::DimensionMismatch(format!(
            "matrix has {} entries, expected {n} x {n}",
            m.len()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(NsbmError::NonFinite("matrix passed to PSD projection".into()));
    }
    let sym = Mat::from_fn(n, n, |i, j| 0.5 * (m[i * n + j] + m[j * n + i]));
    let evd = sym.self_adjoint_eigen(Side::Lower).map_err(|_| NsbmError::Eigen)?;
    let u = evd.U();
    let s = evd.S();
    let spectrum: Vec<f64> = (0..n).map(|j| s[j]).collect();
    let positive: Vec<usize> = (0..n).filter(|&j| spectrum[j] > 0.0).collect();
    let mut out = vec![0.0; n * n];
    if !positive.is_empty() {
        let scaled = Mat::from_fn(n, positive.len(), |i, c| {
            let j = positive[c];
            u[(i, j)] * spectrum[j].sqrt()
        });
        let z = &scaled * scaled.transpose();
        write_symmetrized(z.as_ref(), n, &mut out);
    }
    Ok((out, spectrum))
}

fn write_symmetrized(z: MatRef<'_, f64>, n: usize, out: &mut [f64]) {
    for i in 0..n {
        out[i * n + i] = z[(i, i)];
        for j in (i + 1)..n {
            let v = 0.5 * (z[(i, j)] + z[(j, i)]);
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
}

/// Eigenvalues of a symmetric `n x n` buffer, ascending.
pub fn symmetric_eigenvalues(n: usize, m: &[f64]) -> Result<Vec<f64>> {
    let mat = Mat::from_fn(n, n, |i, j| 0.5 * (m[i * n + j] + m[j * n + i]));
    let mut vals = mat
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|_| NsbmError::Eigen)?;
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn random_symmetric(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::rng::rng_from_seed(seed);
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = rng.random_range(-1.0..1.0);
                m[i * n + j] = v;
                m[j * n + i] = v;
            }
        }
        m
    }

    fn frob(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn truncates_negative_eigenvalue() {
        let z = psd_project(2, &[1.0, 0.0, 0.0, -1.0]).unwrap();
        assert!(frob(&z, &[1.0, 0.0, 0.0, 0.0]) < 1e-12);
    }

    #[test]
    fn psd_input_is_fixed() {
        // B B' is PSD
        let b = random_symmetric(6, 1);
        let mut m = vec![0.0; 36];
        for i in 0..6 {
            for j in 0..6 {
                m[i * 6 + j] = (0..6).map(|k| b[i * 6 + k] * b[j * 6 + k]).sum();
            }
        }
        let z = psd_project(6, &m).unwrap();
        assert!(frob(&z, &m) < 1e-10);
    }

    #[test]
    fn idempotent_and_symmetric() {
        let m = random_symmetric(12, 2);
        let z = psd_project(12, &m).unwrap();
        let zz = psd_project(12, &z).unwrap();
        assert!(frob(&z, &zz) < 1e-10);
        for i in 0..12 {
            for j in 0..12 {
                assert_eq!(z[i * 12 + j], z[j * 12 + i]);
            }
        }
        assert!(symmetric_eigenvalues(12, &z).unwrap()[0] > -1e-10);
    }

    #[test]
    fn nearest_among_perturbed_psd_candidates() {
        let n = 5;
        let m = random_symmetric(n, 3);
        let z = psd_project(n, &m).unwrap();
        let best = frob(&m, &z);
        let mut rng = crate::rng::rng_from_seed(4);
        for _ in 0..200 {
            // candidate = project(z + small symmetric perturbation), still PSD
            let mut pert = z.clone();
            for i in 0..n {
                for j in i..n {
                    let e = rng.random_range(-0.05..0.05);
                    pert[i * n + j] += e;
                    if i != j {
                        pert[j * n + i] += e;
                    }
                }
            }
            let cand = psd_project(n, &pert).unwrap();
            assert!(frob(&m, &cand) >= best - 1e-12);
        }
        // eigenvalue-clipping oracle: distance equals norm of negative spectrum
        let neg: f64 = symmetric_eigenvalues(n, &m)
            .unwrap()
            .iter()
            .filter(|&&v| v < 0.0)
            .map(|v| v * v)
            .sum();
        assert!((best - neg.sqrt()).abs() < 1e-10);
    }
}
