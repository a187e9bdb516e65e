//! Multi-logistic regression with fractional responses.
//!
//! Maximizes `sum_i [ (sum_k q_ik beta_k)' x_i - log sum_k exp(beta_k' x_i) ]`
//! over `beta` with the last row fixed at zero. Hard labels are the one-hot
//! special case. The objective is concave, so a damped Newton iteration on
//! the stacked `(k-1)p` free parameters converges from any start.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::align::Permutation;
use crate::error::{NsbmError, Result};
use crate::linalg::{spd_inverse, spd_solve, sym_eigenvalues};
use crate::types::{Coefficients, Covariates, SoftLabels};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogitOptions {
    /// Stop once the gradient infinity-norm falls below this.
    pub grad_tol: f64,
    /// ...and the Newton decrement `g' d` falls below this.
    pub decrement_tol: f64,
    pub max_iter: usize,
    /// Condition number above which the Newton system gets a ridge.
    pub max_condition: f64,
    pub ridge: f64,
}

impl Default for LogitOptions {
    fn default() -> Self {
        LogitOptions {
            grad_tol: 1e-8,
            decrement_tol: 1e-12,
            max_iter: 100,
            max_condition: 1e12,
            ridge: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitFit {
    /// Fitted coefficients; `fisher_info` carries `observed_info`.
    pub beta: Coefficients,
    /// Negative Hessian of the log-likelihood at `beta`, divided by `n`.
    pub observed_info: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Set when the Newton system needed the ridge fallback (near separation).
    pub ridge_used: bool,
    pub n: usize,
}

/// Row-wise softmax of the linear predictors, with max-subtraction.
pub fn predict_probs(beta: &Coefficients, x: &Covariates) -> Result<Vec<f64>> {
    if beta.p() != x.p() {
        return Err(NsbmError::DimensionMismatch(format!(
            "coefficients have p = {}, covariates have p = {}",
            beta.p(),
            x.p()
        )));
    }
    let k = beta.k();
    let mut out = vec![0.0; x.n() * k];
    let mut eta = vec![0.0; k];
    for i in 0..x.n() {
        beta.linear_predictors(x.row(i), &mut eta);
        softmax_into(&eta, &mut out[i * k..(i + 1) * k]);
    }
    Ok(out)
}

pub(crate) fn softmax_into(eta: &[f64], out: &mut [f64]) {
    let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for (o, &e) in out.iter_mut().zip(eta) {
        *o = (e - m).exp();
        s += *o;
    }
    out.iter_mut().for_each(|o| *o /= s);
}

/// `log sum_k exp(eta_k)`, accurate when one term dominates.
pub(crate) fn log_sum_exp(eta: &[f64]) -> f64 {
    let (arg, m) = eta
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(ai, am), (i, v)| {
            if v > am {
                (i, v)
            } else {
                (ai, am)
            }
        });
    if m == f64::NEG_INFINITY {
        return m;
    }
    let rest: f64 = eta
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != arg)
        .map(|(_, &v)| (v - m).exp())
        .sum();
    m + rest.ln_1p()
}

/// Covariate log-likelihood `sum_i [ sum_k q_ik eta_ik - lse(eta_i) ]`.
pub fn logit_objective(beta: &Coefficients, x: &Covariates, q: &SoftLabels) -> f64 {
    let k = beta.k();
    let mut eta = vec![0.0; k];
    let mut total = 0.0;
    for i in 0..x.n() {
        beta.linear_predictors(x.row(i), &mut eta);
        total += row_term(&eta, q.row(i));
    }
    total
}

fn row_term(eta: &[f64], q: &[f64]) -> f64 {
    // sum_k q_k (eta_k - m) - log1p(rest), with m the largest predictor
    let lse = log_sum_exp(eta);
    let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shift = lse - m;
    q.iter().zip(eta).map(|(qk, e)| qk * (e - m)).sum::<f64>() - shift
}

struct Problem<'a> {
    x: &'a Covariates,
    q: &'a SoftLabels,
    k: usize,
    p: usize,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        (self.k - 1) * self.p
    }

    fn coefficients(&self, free: &[f64]) -> Coefficients {
        let mut beta = free.to_vec();
        beta.resize(self.k * self.p, 0.0);
        Coefficients::new(self.k, self.p, beta).unwrap_or_else(|_| Coefficients::zeros(self.k, self.p))
    }

    fn objective(&self, free: &[f64]) -> f64 {
        let beta = self.coefficients(free);
        logit_objective(&beta, self.x, self.q)
    }

    /// Gradient and negative Hessian of the objective.
    fn derivatives(&self, free: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (k, p, d) = (self.k, self.p, self.dim());
        let beta = self.coefficients(free);
        let mut grad = vec![0.0; d];
        let mut neg_hess = vec![0.0; d * d];
        let mut eta = vec![0.0; k];
        let mut prob = vec![0.0; k];
        for i in 0..self.x.n() {
            let xi = self.x.row(i);
            beta.linear_predictors(xi, &mut eta);
            softmax_into(&eta, &mut prob);
            let qi = self.q.row(i);
            for a in 0..k - 1 {
                let r = qi[a] - prob[a];
                for j in 0..p {
                    grad[a * p + j] += r * xi[j];
                }
                for b in 0..k - 1 {
                    let w = prob[a] * (if a == b { 1.0 } else { 0.0 } - prob[b]);
                    if w == 0.0 {
                        continue;
                    }
                    for j in 0..p {
                        let wx = w * xi[j];
                        let row = (a * p + j) * d + b * p;
                        for l in 0..p {
                            neg_hess[row + l] += wx * xi[l];
                        }
                    }
                }
            }
        }
        (grad, neg_hess)
    }
}

/// Fits from a zero start with default options.
pub fn fit_multilogistic(x: &Covariates, q: &SoftLabels) -> Result<LogitFit> {
    fit_multilogistic_with(x, q, None, &LogitOptions::default())
}

/// Damped Newton ascent from `start` (zero when absent).
///
/// Every accepted step increases the objective (up to its rounding error), so
/// a warm start can only improve on the starting value. Non-convergence is reported through
/// `converged`, not as an error.
pub fn fit_multilogistic_with(
    x: &Covariates,
    q: &SoftLabels,
    start: Option<&Coefficients>,
    opts: &LogitOptions,
) -> Result<LogitFit> {
    if q.n() != x.n() {
        return Err(NsbmError::DimensionMismatch(format!(
            "responsibilities have {} rows, covariates {}",
            q.n(),
            x.n()
        )));
    }
    if x.n() < q.k() {
        return Err(NsbmError::InvalidInput(format!(
            "need at least k = {} observations, got {}",
            q.k(),
            x.n()
        )));
    }
    if x.values().iter().any(|v| !v.is_finite()) || q.values().iter().any(|v| !v.is_finite()) {
        return Err(NsbmError::NonFinite("logistic inputs".into()));
    }
    let prob = Problem {
        x,
        q,
        k: q.k(),
        p: x.p(),
    };
    let d = prob.dim();
    let mut free = match start {
        Some(b) if b.k() == prob.k && b.p() == prob.p => b.free().to_vec(),
        Some(_) => {
            return Err(NsbmError::DimensionMismatch(
                "warm-start coefficients have the wrong shape".into(),
            ))
        }
        None => vec![0.0; d],
    };
    let mut value = prob.objective(&free);
    let mut iterations = 0;
    let mut ridge_used = false;
    let (mut grad, mut neg_hess) = prob.derivatives(&free);
    let mut grad_norm = inf_norm(&grad);

    while iterations < opts.max_iter && d > 0 {
        let (dir, ridged) = newton_direction(d, &neg_hess, &grad, opts);
        ridge_used |= ridged;
        let decrement: f64 = dir.iter().zip(&grad).map(|(a, b)| a * b).sum();
        if grad_norm <= opts.grad_tol && decrement <= opts.decrement_tol {
            break;
        }
        iterations += 1;
        let mut step = 1.0;
        let mut accepted = false;
        let mut trial_derivs = None;
        for attempt in 0..60 {
            let trial: Vec<f64> = free.iter().zip(&dir).map(|(f, s)| f + step * s).collect();
            let v = prob.objective(&trial);
            if v > value {
                free = trial;
                value = v;
                accepted = true;
                break;
            }
            // a full step whose gain is below rounding of the objective is
            // taken when it shrinks the gradient
            if attempt == 0 && v >= value - 8.0 * f64::EPSILON * value.abs() {
                let (g, h) = prob.derivatives(&trial);
                if inf_norm(&g) < grad_norm {
                    free = trial;
                    value = v;
                    trial_derivs = Some((g, h));
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        (grad, neg_hess) = match trial_derivs {
            Some(d) => d,
            None => prob.derivatives(&free),
        };
        grad_norm = inf_norm(&grad);
    }

    let n = x.n();
    let observed_info: Vec<f64> = neg_hess.iter().map(|h| h / n as f64).collect();
    let beta = prob.coefficients(&free).with_fisher_info(observed_info.clone())?;
    if !value.is_finite() {
        return Err(NsbmError::NonFinite("logistic objective".into()));
    }
    Ok(LogitFit {
        beta,
        observed_info,
        objective: value,
        converged: grad_norm <= opts.grad_tol,
        iterations,
        grad_norm,
        ridge_used,
        n,
    })
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn newton_direction(d: usize, neg_hess: &[f64], grad: &[f64], opts: &LogitOptions) -> (Vec<f64>, bool) {
    let well_conditioned = sym_eigenvalues(d, neg_hess).is_some_and(|ev| {
        let lo = ev[0];
        let hi = ev[d - 1];
        lo > 0.0 && hi / lo <= opts.max_condition
    });
    if well_conditioned {
        if let Some(dir) = spd_solve(d, neg_hess, grad) {
            return (dir, false);
        }
    }
    let mut ridged = neg_hess.to_vec();
    for i in 0..d {
        ridged[i * d + i] += opts.ridge;
    }
    match spd_solve(d, &ridged, grad) {
        Some(dir) => (dir, true),
        // gradient ascent as a last resort
        None => (grad.to_vec(), true),
    }
}

/// One row of a Wald table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldEntry {
    pub class: usize,
    pub feature: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldTable {
    pub level: f64,
    pub critical_value: f64,
    pub entries: Vec<WaldEntry>,
    /// True when the information matrix had to be ridge-regularized.
    pub regularized: bool,
}

/// Two-sided standard-normal critical value at `level`.
pub fn normal_critical_value(level: f64) -> f64 {
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    std.inverse_cdf(1.0 - level / 2.0)
}

/// Per-coefficient z-tests using `(n * observed_info)^-1` as the covariance.
///
/// With `allow_ridge`, a singular information matrix is regularized and the
/// table flagged; otherwise it is an error.
pub fn wald_test(fit: &LogitFit, n: usize, level: f64, allow_ridge: bool) -> Result<WaldTable> {
    if !(0.0..1.0).contains(&level) || level == 0.0 {
        return Err(NsbmError::InvalidInput(format!("significance level {level}")));
    }
    let k = fit.beta.k();
    let p = fit.beta.p();
    let d = (k - 1) * p;
    let info: Vec<f64> = fit.observed_info.iter().map(|v| v * n as f64).collect();
    let (cov, regularized) = match spd_inverse(d, &info) {
        Some(c) => (c, false),
        None if allow_ridge => {
            let scale = (0..d).map(|i| info[i * d + i].abs()).fold(0.0, f64::max).max(1.0);
            let mut ridged = info.clone();
            for i in 0..d {
                ridged[i * d + i] += 1e-8 * scale;
            }
            (spd_inverse(d, &ridged).ok_or(NsbmError::SingularInformation)?, true)
        }
        None => return Err(NsbmError::SingularInformation),
    };
    let critical_value = normal_critical_value(level);
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    let entries = (0..d)
        .map(|idx| {
            let estimate = fit.beta.free()[idx];
            let std_error = cov[idx * d + idx].max(0.0).sqrt();
            let statistic = if estimate == 0.0 { 0.0 } else { estimate / std_error };
            let p_value = 2.0 * (1.0 - std.cdf(statistic.abs()));
            WaldEntry {
                class: idx / p,
                feature: idx % p,
                estimate,
                std_error,
                statistic,
                p_value,
                reject: statistic.abs() > critical_value,
            }
        })
        .collect();
    Ok(WaldTable {
        level,
        critical_value,
        entries,
        regularized,
    })
}

/// Relabels a fit by `sigma` (old -> new): coefficients follow
/// [`crate::align::permute_coefficients`] and the information matrix is
/// carried through the same linear map.
pub fn permute_fit(fit: &LogitFit, sigma: &Permutation) -> Result<LogitFit> {
    let k = fit.beta.k();
    let p = fit.beta.p();
    let d = (k - 1) * p;
    let beta = crate::align::permute_coefficients(&fit.beta, sigma)?;
    // New free parameters are T * old; information transforms as S' I S with
    // S = T^-1, the map of the inverse permutation.
    let s = coefficient_map(&sigma.inverse(), k, p);
    let mut tmp = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            tmp[i * d + j] = (0..d).map(|m| fit.observed_info[i * d + m] * s[m * d + j]).sum();
        }
    }
    let mut info = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            info[i * d + j] = (0..d).map(|m| s[m * d + i] * tmp[m * d + j]).sum();
        }
    }
    Ok(LogitFit {
        beta: beta.with_fisher_info(info.clone())?,
        observed_info: info,
        ..fit.clone()
    })
}

/// Matrix of the linear map on free parameters induced by relabeling.
fn coefficient_map(sigma: &Permutation, k: usize, p: usize) -> Vec<f64> {
    let d = (k - 1) * p;
    let mut t = vec![0.0; d * d];
    let pivot = sigma.inverse().apply(k - 1);
    for old in 0..k {
        let new = sigma.apply(old);
        if new == k - 1 {
            continue;
        }
        for j in 0..p {
            if old < k - 1 {
                t[(new * p + j) * d + old * p + j] += 1.0;
            }
            if pivot < k - 1 {
                t[(new * p + j) * d + pivot * p + j] -= 1.0;
            }
        }
    }
    t
}
