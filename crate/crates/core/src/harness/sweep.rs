use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{NsbmError, Result};

use super::config::{DataSource, ExperimentConfig, GammaRule, InitKind, LambdaRule, Method};
use super::pipeline::run_pipeline;

/// One cell of a tuning grid. `mean_nmi` and `se_nmi` are NaN for a failed
/// cell; `reps` counts completed replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub tau: f64,
    pub alpha: f64,
    pub mean_nmi: f64,
    pub se_nmi: f64,
    pub reps: usize,
}

/// SDP accuracy over the grid `taus x alphas` with `lambda = tau n^2` and
/// `gamma = alpha / 100`; everything else comes from `base`.
pub fn sweep_tuning(base: &ExperimentConfig, taus: &[f64], alphas: &[f64]) -> Result<Vec<SweepRow>> {
    if taus.is_empty() || alphas.is_empty() {
        return Err(NsbmError::InvalidInput("empty tuning grid".into()));
    }
    let n = match &base.data {
        DataSource::Scenario { n, .. } => *n,
        DataSource::Files { .. } => 0,
    };
    let mut rows = Vec::with_capacity(taus.len() * alphas.len());
    for &tau in taus {
        for &alpha in alphas {
            let cfg = ExperimentConfig {
                method: Method::Sdp,
                init: InitKind::Sdp,
                lambda: LambdaRule::Scaled { tau },
                gamma: GammaRule::Scaled { alpha },
                output_dir: None,
                ..base.clone()
            };
            let row = match run_pipeline(&cfg) {
                Ok(rec) => {
                    let n = rec.reps.iter().map(|r| r.n).max().unwrap_or(n);
                    match rec.aggregate.nmi {
                        Some(s) => SweepRow { n, tau, alpha, mean_nmi: s.mean, se_nmi: s.se, reps: s.count },
                        None => failed(n, tau, alpha),
                    }
                }
                Err(e) => {
                    log::warn!("sweep cell tau = {tau}, alpha = {alpha} failed: {e}");
                    failed(n, tau, alpha)
                }
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

fn failed(n: usize, tau: f64, alpha: f64) -> SweepRow {
    SweepRow { n, tau, alpha, mean_nmi: f64::NAN, se_nmi: f64::NAN, reps: 0 }
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    writeln!(w, "n,tau,alpha,mean_nmi,se_nmi,reps")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{}", r.n, r.tau, r.alpha, r.mean_nmi, r.se_nmi, r.reps)?;
    }
    Ok(())
}
