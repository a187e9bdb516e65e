use serde::{Deserialize, Serialize};

use crate::error::{NsbmError, Result};
use crate::types::{Covariates, Graph};

use super::psd::{psd_project_with_spectrum, symmetric_eigenvalues};

/// Tuning for the covariate-augmented SDP relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdpConfig {
    /// Weight of `X X'` relative to the adjacency matrix.
    pub gamma: f64,
    /// Target for `sum_ij Z_ij`.
    pub lambda: f64,
    pub iterations: usize,
    pub step_size: f64,
}

impl SdpConfig {
    pub fn new(gamma: f64, lambda: f64) -> Self {
        SdpConfig {
            gamma,
            lambda,
            iterations: 100,
            step_size: 1.0,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let n2 = (n * n) as f64;
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(NsbmError::InvalidInput(format!("gamma = {}", self.gamma)));
        }
        if !(self.lambda > 0.0 && self.lambda <= n2) {
            return Err(NsbmError::InvalidInput(format!(
                "lambda = {} outside (0, n^2 = {n2}]",
                self.lambda
            )));
        }
        if self.iterations == 0 {
            return Err(NsbmError::InvalidInput("need at least one ADMM iteration".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(NsbmError::InvalidInput(format!("step size {}", self.step_size)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    /// Largest distance of an entry of `Z` outside `[0, 1]`.
    pub box_violation: f64,
    /// `|sum Z - lambda| / lambda`.
    pub sum_residual: f64,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub n: usize,
    /// Final PSD iterate, row-major and exactly symmetric.
    pub z: Vec<f64>,
    pub feasibility: Feasibility,
    /// `<A + gamma X X', Z>`.
    pub objective: f64,
}

impl SdpSolution {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.z[i * self.n..(i + 1) * self.n]
    }
}

/// `A + gamma X X'` as a dense row-major buffer.
pub fn affinity_matrix(g: &Graph, x: &Covariates, gamma: f64) -> Result<Vec<f64>> {
    let n = g.n();
    if x.n() != n {
        return Err(NsbmError::DimensionMismatch(format!(
            "graph has {n} nodes, covariates {} rows",
            x.n()
        )));
    }
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        let xi = x.row(i);
        for j in i..n {
            let mut v = g.adjacency(i, j);
            if gamma != 0.0 {
                v += gamma * xi.iter().zip(x.row(j)).map(|(a, b)| a * b).sum::<f64>();
            }
            c[i * n + j] = v;
            c[j * n + i] = v;
        }
    }
    Ok(c)
}

/// Runs exactly `cfg.iterations` ADMM sweeps on
///
/// ```text
/// max <A + gamma X X', Z>  s.t.  Z PSD, 0 <= Z_ij <= 1, sum_ij Z_ij = lambda
/// ```
///
/// with the splitting `Y = Z`, `Y = W`, starting from `Z = A + gamma X X'`
/// and zero `W, Y, U, V`. Returns the last PSD iterate; the box and sum
/// constraints hold only approximately and are reported in `feasibility`.
pub fn solve_sdp(g: &Graph, x: &Covariates, cfg: &SdpConfig) -> Result<SdpSolution> {
    let n = g.n();
    cfg.validate(n)?;
    let c = affinity_matrix(g, x, cfg.gamma)?;
    let nn = n * n;
    let inv_step = 1.0 / cfg.step_size;
    let shift_scale = 1.0 / nn as f64;

    let mut z = c.clone();
    let mut w = vec![0.0; nn];
    let mut y = vec![0.0; nn];
    let mut u = vec![0.0; nn];
    let mut v = vec![0.0; nn];
    let mut m = vec![0.0; nn];

    for _ in 0..cfg.iterations {
        // (a) box-constrained average of the two consensus targets
        for idx in 0..nn {
            y[idx] = (0.5 * (w[idx] + z[idx] - u[idx] - v[idx])).clamp(0.0, 1.0);
        }
        // (b) project Y + U onto the affine sum constraint
        let total: f64 = y.iter().zip(&u).map(|(a, b)| a + b).sum();
        let shift = (cfg.lambda - total) * shift_scale;
        for idx in 0..nn {
            w[idx] = y[idx] + u[idx] + shift;
        }
        // (c) PSD step
        for idx in 0..nn {
            m[idx] = y[idx] + v[idx] + inv_step * c[idx];
        }
        z = psd_project_with_spectrum(n, &m)?.0;
        // (d) dual ascent
        for idx in 0..nn {
            u[idx] += y[idx] - w[idx];
            v[idx] += y[idx] - z[idx];
        }
    }

    let feasibility = feasibility_of(n, &z, cfg.lambda)?;
    let objective = c.iter().zip(&z).map(|(a, b)| a * b).sum();
    Ok(SdpSolution {
        n,
        z,
        feasibility,
        objective,
    })
}

pub(crate) fn feasibility_of(n: usize, z: &[f64], lambda: f64) -> Result<Feasibility> {
    let box_violation = z
        .iter()
        .map(|&v| (-v).max(v - 1.0).max(0.0))
        .fold(0.0, f64::max);
    let sum: f64 = z.iter().sum();
    let min_eigenvalue = if n == 0 {
        0.0
    } else {
        symmetric_eigenvalues(n, z)?[0]
    };
    Ok(Feasibility {
        box_violation,
        sum_residual: (sum - lambda).abs() / lambda,
        min_eigenvalue,
    })
}
