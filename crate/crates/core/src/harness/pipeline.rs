use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::align_labels;
use crate::error::{NsbmError, Result};
use crate::inference::{
    mpl_fit, mpl_random_restarts, vem_fit, vem_random_restarts, HARD_TO_SOFT_TAU,
};
use crate::logit::{fit_multilogistic, permute_fit, wald_test, LogitFit, WaldTable};
use crate::metrics::{ari, misclassification_rate, nmi};
use crate::rng::derive_seed;
use crate::sdp::{choose_lambda, sdp_init, Feasibility, LambdaInputs, SdpConfig};
use crate::simgen::{generate_scenario, ScenarioSpec};
use crate::types::{Covariates, Graph, Labels, SoftLabels};

use super::config::{DataSource, ExperimentConfig, InitKind, LambdaRule, Method};
use super::io::{parse_covariates, parse_edge_list, parse_labels, write_labels};

/// Graph, covariates and (when known) planted labels for one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    pub covariates: Covariates,
    pub truth: Option<Labels>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub iterations: usize,
    pub first: f64,
    pub last: f64,
    pub converged: bool,
    /// No recorded step decreased by more than `1e-8`.
    pub monotone: bool,
}

impl TraceSummary {
    fn of(trace: &[f64], converged: bool) -> Self {
        TraceSummary {
            iterations: trace.len(),
            first: trace[0],
            last: trace[trace.len() - 1],
            converged,
            monotone: trace.windows(2).all(|w| w[1] >= w[0] - 1e-8),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: usize,
    pub seed: u64,
    pub n: usize,
    pub edges: usize,
    /// NMI of the initial partition.
    pub init_nmi: Option<f64>,
    pub nmi: Option<f64>,
    pub ari: Option<f64>,
    pub misclassification: Option<f64>,
    /// Coefficient rows (classes) aligned to the truth when it is known.
    pub beta: Option<Vec<Vec<f64>>>,
    pub wald: Option<WaldTable>,
    pub trace: Option<TraceSummary>,
    pub sdp: Option<Feasibility>,
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Standard error of the mean.
    pub se: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        let m = values.len();
        if m == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / m as f64;
        let se = if m > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
            (var / m as f64).sqrt()
        } else {
            0.0
        };
        Some(Summary { mean, se, count: m })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub completed: usize,
    pub failed: usize,
    pub init_nmi: Option<Summary>,
    pub nmi: Option<Summary>,
    pub ari: Option<Summary>,
    pub misclassification: Option<Summary>,
    pub beta_mean: Option<Vec<Vec<f64>>>,
    /// Wald rejection frequency per coefficient.
    pub wald_rejection_rate: Option<Vec<Vec<f64>>>,
}

impl Aggregate {
    pub fn from_reps(reps: &[RepRecord]) -> Aggregate {
        let ok: Vec<&RepRecord> = reps.iter().filter(|r| r.error.is_none()).collect();
        let collect = |f: &dyn Fn(&RepRecord) -> Option<f64>| -> Option<Summary> {
            Summary::of(&ok.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
        };
        let betas: Vec<&Vec<Vec<f64>>> = ok.iter().filter_map(|r| r.beta.as_ref()).collect();
        let beta_mean = betas.first().map(|first| {
            first
                .iter()
                .enumerate()
                .map(|(a, row)| {
                    (0..row.len())
                        .map(|j| betas.iter().map(|b| b[a][j]).sum::<f64>() / betas.len() as f64)
                        .collect()
                })
                .collect()
        });
        let walds: Vec<&WaldTable> = ok.iter().filter_map(|r| r.wald.as_ref()).collect();
        let wald_rejection_rate = walds.first().map(|first| {
            let classes = first.entries.iter().map(|e| e.class).max().unwrap_or(0) + 1;
            let features = first.entries.iter().map(|e| e.feature).max().unwrap_or(0) + 1;
            let mut rate = vec![vec![0.0; features]; classes];
            for w in &walds {
                for e in &w.entries {
                    if e.reject {
                        rate[e.class][e.feature] += 1.0;
                    }
                }
            }
            rate.iter_mut()
                .flatten()
                .for_each(|v| *v /= walds.len() as f64);
            rate
        });
        Aggregate {
            completed: ok.len(),
            failed: reps.len() - ok.len(),
            init_nmi: collect(&|r| r.init_nmi),
            nmi: collect(&|r| r.nmi),
            ari: collect(&|r| r.ari),
            misclassification: collect(&|r| r.misclassification),
            beta_mean,
            wald_rejection_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub reps: Vec<RepRecord>,
    pub aggregate: Aggregate,
    /// Final labels per replication (`None` for failed ones); written to
    /// separate files rather than the JSON.
    #[serde(skip)]
    pub labels: Vec<Option<Labels>>,
}

impl RunRecord {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `run.json` and `labels/rep_<i>.txt` under `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("labels"))?;
        let mut f = BufWriter::new(File::create(dir.join("run.json"))?);
        f.write_all(self.to_json()?.as_bytes())?;
        f.write_all(b"\n")?;
        f.flush()?;
        for (i, labels) in self.labels.iter().enumerate() {
            if let Some(l) = labels {
                let mut w = BufWriter::new(File::create(dir.join("labels").join(format!("rep_{i:04}.txt")))?);
                write_labels(l, &mut w)?;
                w.flush()?;
            }
        }
        Ok(())
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| NsbmError::MissingInput(format!("{}: {e}", path.display())))
}

/// Reads a dataset described by [`DataSource::Files`].
pub fn load_files(source: &DataSource, k: usize) -> Result<Dataset> {
    let DataSource::Files {
        edges,
        covariates,
        truth,
        has_header,
        intercept,
    } = source
    else {
        return Err(NsbmError::InvalidInput("not a file data source".into()));
    };
    let graph = parse_edge_list(open(edges)?)?.graph;
    let covariates = match covariates {
        Some(p) => parse_covariates(open(p)?, *has_header, *intercept)?,
        None => Covariates::zeros(graph.n(), 1),
    };
    if covariates.n() != graph.n() {
        return Err(NsbmError::DimensionMismatch(format!(
            "edge list has {} nodes, covariates {} rows",
            graph.n(),
            covariates.n()
        )));
    }
    let truth = truth
        .as_ref()
        .map(|p| parse_labels(open(p)?, Some(k)))
        .transpose()?;
    Ok(Dataset {
        graph,
        covariates,
        truth,
    })
}

/// Runs every replication of `cfg` and, when `output_dir` is set, writes the
/// record there. Replications run in parallel on independent seed streams;
/// a failing replication is recorded and the rest continue.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let fixed = match &cfg.data {
        DataSource::Files { .. } => Some(load_files(&cfg.data, cfg.k)?),
        DataSource::Scenario { .. } => None,
    };
    let outcomes: Vec<(RepRecord, Option<Labels>)> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| run_rep(cfg, rep, fixed.as_ref()))
        .collect();
    let (reps, labels): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
    let record = RunRecord {
        config: cfg.clone(),
        aggregate: Aggregate::from_reps(&reps),
        reps,
        labels,
    };
    if let Some(dir) = &cfg.output_dir {
        record.write_to(dir)?;
    }
    Ok(record)
}

fn run_rep(cfg: &ExperimentConfig, rep: usize, fixed: Option<&Dataset>) -> (RepRecord, Option<Labels>) {
    let seed = derive_seed(cfg.seed, rep as u64);
    let start = Instant::now();
    let mut record = RepRecord {
        rep,
        seed,
        n: 0,
        edges: 0,
        init_nmi: None,
        nmi: None,
        ari: None,
        misclassification: None,
        beta: None,
        wald: None,
        trace: None,
        sdp: None,
        error: None,
        wall_time_s: None,
    };
    let labels = match execute_rep(cfg, seed, fixed, &mut record) {
        Ok(l) => Some(l),
        Err(e) => {
            record.error = Some(e.to_string());
            None
        }
    };
    if cfg.record_wall_time {
        record.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    (record, labels)
}

/// Data for replication `seed`: a fresh scenario draw or the fixed files,
/// with the configured covariate transforms applied.
pub fn rep_dataset(cfg: &ExperimentConfig, seed: u64, fixed: Option<&Dataset>) -> Result<Dataset> {
    let mut data = match (&cfg.data, fixed) {
        (DataSource::Scenario { scenario, n }, _) => {
            let s = generate_scenario(&ScenarioSpec::new(*scenario, *n), derive_seed(seed, 0))?;
            Dataset {
                graph: s.graph,
                covariates: s.covariates,
                truth: Some(s.labels),
            }
        }
        (DataSource::Files { .. }, Some(d)) => d.clone(),
        (DataSource::Files { .. }, None) => load_files(&cfg.data, cfg.k)?,
    };
    if cfg.standardize {
        data.covariates = data.covariates.standardized();
    }
    if cfg.edge_only {
        data.covariates = Covariates::zeros(data.covariates.n(), data.covariates.p());
    }
    Ok(data)
}

fn execute_rep(cfg: &ExperimentConfig, seed: u64, fixed: Option<&Dataset>, record: &mut RepRecord) -> Result<Labels> {
    let data = rep_dataset(cfg, seed, fixed)?;
    let (g, x) = (&data.graph, &data.covariates);
    let n = g.n();
    record.n = n;
    record.edges = g.edge_count();
    let truth = data.truth.as_ref();

    let init = match &cfg.init {
        InitKind::Sdp => {
            let lambda = match cfg.lambda {
                LambdaRule::Scaled { tau } => tau * (n * n) as f64,
                LambdaRule::Strategy { strategy } => choose_lambda(
                    strategy,
                    LambdaInputs {
                        n,
                        k: cfg.k,
                        truth,
                        graph: Some(g),
                        seed: derive_seed(seed, 3),
                    },
                )?,
            };
            let mut sdp_cfg = SdpConfig::new(cfg.gamma.gamma(n), lambda);
            sdp_cfg.iterations = cfg.sdp_iterations;
            let res = sdp_init(g, x, &sdp_cfg, cfg.k, derive_seed(seed, 1))?;
            record.sdp = Some(res.solution.feasibility);
            Some(res.labels)
        }
        InitKind::Truth => Some(
            truth
                .ok_or_else(|| NsbmError::MissingInput("init truth without known labels".into()))?
                .clone(),
        ),
        InitKind::File { path } => Some(parse_labels(open(path)?, Some(cfg.k))?),
        InitKind::Random => None,
    };
    if let (Some(c0), Some(t)) = (&init, truth) {
        if c0.len() != n {
            return Err(NsbmError::DimensionMismatch("initial labels do not match the graph".into()));
        }
        record.init_nmi = Some(nmi(t, c0)?);
    }

    let restart_seed = derive_seed(seed, 2);
    let (labels, fit): (Labels, LogitFit) = match cfg.method {
        Method::Sdp => {
            let labels = init.expect("validated: sdp method uses sdp init");
            let fit = fit_multilogistic(x, &labels.to_one_hot())?;
            (labels, fit)
        }
        Method::Mpl => {
            let res = match &init {
                Some(c0) => mpl_fit(g, x, c0, &cfg.opts)?,
                None => mpl_random_restarts(g, x, cfg.k, cfg.restarts, restart_seed, &cfg.opts)?,
            };
            record.trace = Some(TraceSummary::of(&res.objective_trace, res.converged));
            (res.labels, res.logit)
        }
        Method::Vem => {
            let res = match &init {
                Some(c0) => vem_fit(g, x, &SoftLabels::from_hard(c0, HARD_TO_SOFT_TAU), &cfg.opts)?,
                None => vem_random_restarts(g, x, cfg.k, cfg.restarts, restart_seed, &cfg.opts)?,
            };
            record.trace = Some(TraceSummary::of(&res.elbo_trace, res.converged));
            (res.labels, res.logit)
        }
    };

    let (labels, fit) = match truth {
        Some(t) => {
            record.nmi = Some(nmi(t, &labels)?);
            record.ari = Some(ari(t, &labels)?);
            record.misclassification = Some(misclassification_rate(t, &labels)?);
            let sigma = align_labels(t, &labels)?;
            if sigma.k() == labels.k() {
                (sigma.relabel(&labels), permute_fit(&fit, &sigma)?)
            } else {
                (labels, fit)
            }
        }
        None => (labels, fit),
    };
    record.beta = Some((0..fit.beta.k()).map(|a| fit.beta.row(a).to_vec()).collect());
    record.wald = wald_test(&fit, n, cfg.wald_level, false).ok();
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::GammaRule;
    use crate::simgen::Scenario;

    fn small(method: Method) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::scenario(Scenario::A, 120, method);
        cfg.reps = 3;
        cfg.seed = 9;
        cfg.sdp_iterations = 30;
        cfg
    }

    #[test]
    fn rerun_is_byte_identical() {
        let cfg = small(Method::Mpl);
        let a = run_pipeline(&cfg).unwrap().to_json().unwrap();
        let b = run_pipeline(&cfg).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn aggregate_recomputes() {
        let rec = run_pipeline(&small(Method::Vem)).unwrap();
        let nmis: Vec<f64> = rec.reps.iter().filter_map(|r| r.nmi).collect();
        let s = Summary::of(&nmis).unwrap();
        let agg = rec.aggregate.nmi.unwrap();
        assert!((s.mean - agg.mean).abs() < 1e-12);
        assert!((s.se - agg.se).abs() < 1e-12);
        assert_eq!(rec.aggregate.completed, 3);
        assert!(rec.reps.iter().all(|r| r.trace.as_ref().unwrap().monotone));
    }

    #[test]
    fn serial_and_parallel_agree() {
        let cfg = small(Method::Sdp);
        let rec = run_pipeline(&cfg).unwrap();
        for rep in 0..cfg.reps {
            let (single, _) = run_rep(&cfg, rep, None);
            assert_eq!(single, rec.reps[rep]);
        }
    }

    #[test]
    fn failures_are_recorded_per_rep() {
        let mut cfg = small(Method::Mpl);
        cfg.gamma = GammaRule::Explicit { gamma: f64::NAN };
        let rec = run_pipeline(&cfg).unwrap();
        assert_eq!(rec.aggregate.failed, 3);
        assert!(rec.reps.iter().all(|r| r.error.is_some()));
    }

    #[test]
    fn writes_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(Method::Mpl);
        cfg.reps = 1;
        cfg.output_dir = Some(dir.path().to_path_buf());
        let rec = run_pipeline(&cfg).unwrap();
        let text = fs::read_to_string(dir.path().join("run.json")).unwrap();
        let back: RunRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back.reps, rec.reps);
        let labels = parse_labels(open(&dir.path().join("labels/rep_0000.txt")).unwrap(), Some(2)).unwrap();
        assert_eq!(Some(labels), rec.labels[0]);
    }
}
