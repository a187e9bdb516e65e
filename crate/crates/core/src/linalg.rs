//! Thin wrappers over `faer` for the small and medium dense problems used
//! across the crate. Buffers are row-major `Vec<f64>`.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, Side};

pub(crate) fn to_mat(d: usize, a: &[f64]) -> Mat<f64> {
    Mat::from_fn(d, d, |i, j| a[i * d + j])
}

pub(crate) fn from_mat(m: &Mat<f64>) -> Vec<f64> {
    let (r, c) = (m.nrows(), m.ncols());
    let mut out = Vec::with_capacity(r * c);
    for i in 0..r {
        for j in 0..c {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub(crate) fn spd_solve(d: usize, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let llt = to_mat(d, a).llt(Side::Lower).ok()?;
    let rhs = Mat::from_fn(d, 1, |i, _| b[i]);
    let x = llt.solve(&rhs);
    let out: Vec<f64> = (0..d).map(|i| x[(i, 0)]).collect();
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Inverse of a symmetric positive definite matrix.
pub(crate) fn spd_inverse(d: usize, a: &[f64]) -> Option<Vec<f64>> {
    let llt = to_mat(d, a).llt(Side::Lower).ok()?;
    let inv = from_mat(&llt.inverse());
    inv.iter().all(|v| v.is_finite()).then_some(inv)
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub(crate) fn sym_eigenvalues(d: usize, a: &[f64]) -> Option<Vec<f64>> {
    let mut vals = to_mat(d, a).self_adjoint_eigenvalues(Side::Lower).ok()?;
    vals.sort_by(f64::total_cmp);
    Some(vals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_and_invert_small_spd() {
        let a = [4.0, 1.0, 1.0, 3.0];
        let x = spd_solve(2, &a, &[1.0, 2.0]).unwrap();
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-12);
        assert!((x[0] + 3.0 * x[1] - 2.0).abs() < 1e-12);
        let inv = spd_inverse(2, &a).unwrap();
        assert!((inv[0] - 3.0 / 11.0).abs() < 1e-12);
        assert!(spd_solve(2, &[1.0, 2.0, 2.0, 1.0], &[1.0, 1.0]).is_none());
        assert_eq!(sym_eigenvalues(2, &[2.0, 0.0, 0.0, -1.0]).unwrap(), vec![-1.0, 2.0]);
    }
}
