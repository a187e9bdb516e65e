use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{NsbmError, Result};
use crate::inference::{FitOptions, DEFAULT_RESTARTS};
use crate::sdp::LambdaStrategy;
use crate::simgen::Scenario;

/// How `gamma` (the covariate weight in the SDP) is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum GammaRule {
    Explicit { gamma: f64 },
    /// `gamma = alpha / 100`.
    Scaled { alpha: f64 },
    /// `gamma = multiplier * (ln n)^0.5 / n`.
    Auto { multiplier: f64 },
}

impl GammaRule {
    /// Multiplier 1 for scenario A and 0.8 for scenario B.
    pub fn auto_for(scenario: Scenario) -> Self {
        GammaRule::Auto {
            multiplier: match scenario {
                Scenario::A => 1.0,
                Scenario::B => 0.8,
            },
        }
    }

    pub fn gamma(&self, n: usize) -> f64 {
        match *self {
            GammaRule::Explicit { gamma } => gamma,
            GammaRule::Scaled { alpha } => alpha / 100.0,
            GammaRule::Auto { multiplier } => multiplier * (n as f64).ln().sqrt() / n as f64,
        }
    }
}

impl Default for GammaRule {
    fn default() -> Self {
        GammaRule::Auto { multiplier: 1.0 }
    }
}

/// How `lambda` (the SDP sum constraint) is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum LambdaRule {
    Strategy { strategy: LambdaStrategy },
    /// `lambda = tau * n^2`.
    Scaled { tau: f64 },
}

impl Default for LambdaRule {
    fn default() -> Self {
        LambdaRule::Scaled { tau: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sdp,
    Vem,
    Mpl,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitKind {
    Sdp,
    /// Best of `restarts` random starts.
    Random,
    Truth,
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    /// A fresh draw per replication.
    Scenario { scenario: Scenario, n: usize },
    Files {
        edges: PathBuf,
        covariates: Option<PathBuf>,
        truth: Option<PathBuf>,
        #[serde(default)]
        has_header: bool,
        #[serde(default)]
        intercept: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub k: usize,
    pub method: Method,
    pub init: InitKind,
    #[serde(default)]
    pub gamma: GammaRule,
    #[serde(default)]
    pub lambda: LambdaRule,
    pub restarts: usize,
    pub reps: usize,
    pub seed: u64,
    /// Replace every covariate by zero (edge information only).
    #[serde(default)]
    pub edge_only: bool,
    /// Center and scale covariate columns before fitting.
    #[serde(default)]
    pub standardize: bool,
    pub wald_level: f64,
    pub sdp_iterations: usize,
    #[serde(default)]
    pub opts: FitOptions,
    /// Adds per-replication wall time to the record (breaks byte stability).
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Scenario draws refined by `method` from an SDP start, with the
    /// paper-style defaults.
    pub fn scenario(scenario: Scenario, n: usize, method: Method) -> Self {
        ExperimentConfig {
            data: DataSource::Scenario { scenario, n },
            k: 2,
            method,
            init: InitKind::Sdp,
            gamma: GammaRule::auto_for(scenario),
            lambda: LambdaRule::default(),
            restarts: DEFAULT_RESTARTS,
            reps: 1,
            seed: 0,
            edge_only: false,
            standardize: false,
            wald_level: 0.01,
            sdp_iterations: 100,
            opts: FitOptions::default(),
            record_wall_time: false,
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(NsbmError::InvalidInput("reps must be at least 1".into()));
        }
        if self.k < 2 {
            return Err(NsbmError::InvalidInput(format!("k = {}", self.k)));
        }
        if self.restarts == 0 {
            return Err(NsbmError::InvalidInput("restarts must be at least 1".into()));
        }
        if !(self.wald_level > 0.0 && self.wald_level < 1.0) {
            return Err(NsbmError::InvalidInput(format!("wald level {}", self.wald_level)));
        }
        if self.sdp_iterations == 0 {
            return Err(NsbmError::InvalidInput("sdp_iterations must be positive".into()));
        }
        if let LambdaRule::Scaled { tau } = self.lambda {
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(NsbmError::InvalidInput(format!("tau = {tau} outside (0, 1]")));
            }
        }
        if self.method == Method::Sdp && self.init != InitKind::Sdp {
            return Err(NsbmError::InvalidInput("method sdp needs init sdp".into()));
        }
        if self.init == InitKind::Truth {
            if let DataSource::Files { truth: None, .. } = self.data {
                return Err(NsbmError::MissingInput("init truth needs a truth file".into()));
            }
        }
        self.opts.validate()
    }
}
