use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use nsbm::harness::{
    parse_covariates, parse_edge_list, parse_labels, real_data_pipeline, run_pipeline, sweep_tuning,
    write_covariates, write_edge_list, write_labels, write_sweep_csv, DataSource, ExperimentConfig,
    GammaRule, InitKind, LambdaRule, Method, RealDataInput,
};
use nsbm::inference::{FitOptions, DEFAULT_RESTARTS};
use nsbm::logit::{fit_multilogistic, wald_test};
use nsbm::metrics::{ari, misclassification_rate, nmi};
use nsbm::sdp::{choose_lambda, sdp_init, LambdaInputs, LambdaStrategy, SdpConfig};
use nsbm::simgen::{generate_scenario, Scenario, ScenarioSpec};
use nsbm::{Covariates, NsbmError, Result};

#[derive(Parser)]
#[command(name = "nsbm", version, about = "Community detection with nodal covariates")]
struct Cli {
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for replications (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a scenario network and write edges.txt, covariates.csv and labels.txt.
    Simulate {
        #[arg(long, value_enum, default_value_t = ScenarioArg::A)]
        scenario: ScenarioArg,
        #[arg(long)]
        n: usize,
    },
    /// Solve the SDP relaxation and write the rounded labels.
    SdpInit {
        #[command(flatten)]
        files: FileArgs,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[command(flatten)]
        tuning: TuningArgs,
        #[arg(long, default_value_t = 100)]
        iterations: usize,
    },
    /// Run one or more replications of a detection pipeline.
    Detect {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run a pipeline from a JSON configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compare an estimated labeling with the truth.
    Evaluate {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        labels: PathBuf,
    },
    /// SDP accuracy over a grid of scaled tuning parameters (CSV).
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated tau values (lambda = tau n^2).
        #[arg(long, value_delimiter = ',', required = true)]
        taus: Vec<f64>,
        /// Comma-separated alpha values (gamma = alpha / 100).
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        reps: usize,
    },
    /// Wald tests for the multi-logistic coefficients given a labeling.
    Wald {
        #[command(flatten)]
        files: FileArgs,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 0.01)]
        level: f64,
    },
    /// Binarize a weighted directed network and score SDP, MPL and VEM.
    RealData {
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        attributes: PathBuf,
        #[arg(long, default_value = "location")]
        truth_column: String,
        /// Covariate columns; defaults to every column except the truth.
        #[arg(long, value_delimiter = ',')]
        covariates: Vec<String>,
        #[arg(long, default_value_t = 3)]
        threshold: u32,
        #[arg(long)]
        one_hot: bool,
        #[arg(long)]
        standardize: bool,
        #[arg(long)]
        intercept: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    A,
    B,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::A => Scenario::A,
            ScenarioArg::B => Scenario::B,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Sdp,
    Vem,
    Mpl,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Sdp,
    Random,
    Truth,
    File,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Oracle,
    Balanced,
    Spectral,
}

#[derive(Args)]
struct FileArgs {
    #[arg(long)]
    edges: PathBuf,
    /// Covariate CSV; without it every node gets a single zero covariate.
    #[arg(long)]
    covariates: Option<PathBuf>,
    /// The covariate CSV starts with a header line.
    #[arg(long)]
    header: bool,
    /// Append a column of ones to the covariates.
    #[arg(long)]
    intercept: bool,
}

#[derive(Args)]
struct DataArgs {
    /// Simulate from a scenario instead of reading files.
    #[arg(long, value_enum, conflicts_with = "edges")]
    scenario: Option<ScenarioArg>,
    #[arg(long, requires = "scenario")]
    n: Option<usize>,
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long, requires = "edges")]
    covariates: Option<PathBuf>,
    #[arg(long, requires = "edges")]
    truth: Option<PathBuf>,
    #[arg(long)]
    header: bool,
    #[arg(long)]
    intercept: bool,
}

#[derive(Args)]
struct TuningArgs {
    /// Explicit gamma.
    #[arg(long, conflicts_with = "alpha")]
    gamma: Option<f64>,
    /// Scaled gamma: gamma = alpha / 100.
    #[arg(long)]
    alpha: Option<f64>,
    /// Multiplier of the automatic gamma (ln n)^0.5 / n.
    #[arg(long, default_value_t = 1.0)]
    gamma_multiplier: f64,
    /// Scaled lambda: lambda = tau n^2.
    #[arg(long, conflicts_with = "lambda_strategy")]
    tau: Option<f64>,
    #[arg(long, value_enum)]
    lambda_strategy: Option<StrategyArg>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Mpl)]
    method: MethodArg,
    #[arg(long, value_enum, default_value_t = InitArg::Sdp)]
    init: InitArg,
    /// Initial labels for `--init file`.
    #[arg(long)]
    init_labels: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    restarts: usize,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Drop the covariates.
    #[arg(long)]
    edge_only: bool,
    #[arg(long)]
    standardize: bool,
    #[arg(long, default_value_t = 0.01)]
    wald_level: f64,
    #[arg(long, default_value_t = 100)]
    sdp_iterations: usize,
    #[command(flatten)]
    tuning: TuningArgs,
}

impl TuningArgs {
    fn gamma_rule(&self, scenario: Option<Scenario>) -> GammaRule {
        match (self.gamma, self.alpha) {
            (Some(gamma), _) => GammaRule::Explicit { gamma },
            (_, Some(alpha)) => GammaRule::Scaled { alpha },
            _ => {
                let base = match scenario.map(GammaRule::auto_for) {
                    Some(GammaRule::Auto { multiplier }) => multiplier,
                    _ => 1.0,
                };
                GammaRule::Auto {
                    multiplier: base * self.gamma_multiplier,
                }
            }
        }
    }

    fn lambda_rule(&self) -> LambdaRule {
        match (self.tau, self.lambda_strategy) {
            (Some(tau), _) => LambdaRule::Scaled { tau },
            (_, Some(s)) => LambdaRule::Strategy { strategy: strategy(s) },
            _ => LambdaRule::default(),
        }
    }
}

fn strategy(s: StrategyArg) -> LambdaStrategy {
    match s {
        StrategyArg::Oracle => LambdaStrategy::Oracle,
        StrategyArg::Balanced => LambdaStrategy::Balanced,
        StrategyArg::Spectral => LambdaStrategy::Spectral,
    }
}

impl DataArgs {
    fn source(&self) -> Result<DataSource> {
        match (&self.scenario, &self.edges) {
            (Some(s), None) => Ok(DataSource::Scenario {
                scenario: (*s).into(),
                n: self.n.ok_or_else(|| NsbmError::MissingInput("--n is required with --scenario".into()))?,
            }),
            (None, Some(edges)) => Ok(DataSource::Files {
                edges: edges.clone(),
                covariates: self.covariates.clone(),
                truth: self.truth.clone(),
                has_header: self.header,
                intercept: self.intercept,
            }),
            _ => Err(NsbmError::MissingInput("give either --scenario or --edges".into())),
        }
    }

    fn scenario(&self) -> Option<Scenario> {
        self.scenario.map(Into::into)
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| NsbmError::MissingInput(format!("{}: {e}", path.display())))
}

fn load_files(f: &FileArgs) -> Result<(nsbm::Graph, Covariates)> {
    let g = parse_edge_list(open(&f.edges)?)?.graph;
    let x = match &f.covariates {
        Some(p) => parse_covariates(open(p)?, f.header, f.intercept)?,
        None => Covariates::zeros(g.n(), 1),
    };
    Ok((g, x))
}

fn output(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Simulate { scenario, n } => {
            let s = generate_scenario(&ScenarioSpec::new(scenario.into(), n), seed)?;
            let dir = cli.out.unwrap_or_else(|| PathBuf::from("."));
            fs::create_dir_all(&dir)?;
            let mut w = BufWriter::new(File::create(dir.join("edges.txt"))?);
            write_edge_list(&s.graph, &mut w)?;
            w.flush()?;
            let mut w = BufWriter::new(File::create(dir.join("covariates.csv"))?);
            write_covariates(&s.covariates, &mut w)?;
            w.flush()?;
            let mut w = BufWriter::new(File::create(dir.join("labels.txt"))?);
            write_labels(&s.labels, &mut w)?;
            w.flush()?;
            eprintln!("n = {n}, edges = {}, written to {}", s.graph.edge_count(), dir.display());
        }
        Command::SdpInit {
            files,
            k,
            tuning,
            iterations,
        } => {
            let (g, x) = load_files(&files)?;
            let n = g.n();
            let lambda = match tuning.lambda_rule() {
                LambdaRule::Scaled { tau } => tau * (n * n) as f64,
                LambdaRule::Strategy { strategy } => choose_lambda(
                    strategy,
                    LambdaInputs {
                        n,
                        k,
                        truth: None,
                        graph: Some(&g),
                        seed,
                    },
                )?,
            };
            let mut cfg = SdpConfig::new(tuning.gamma_rule(None).gamma(n), lambda);
            cfg.iterations = iterations;
            let res = sdp_init(&g, &x, &cfg, k, seed)?;
            let f = res.solution.feasibility;
            eprintln!(
                "gamma = {}, lambda = {}, sum residual = {:.3e}, min eigenvalue = {:.3e}, box violation = {:.3e}",
                cfg.gamma, cfg.lambda, f.sum_residual, f.min_eigenvalue, f.box_violation
            );
            let mut w = output(&cli.out)?;
            write_labels(&res.labels, &mut w)?;
            w.flush()?;
        }
        Command::Detect { data, run } => {
            let init = match run.init {
                InitArg::Sdp => InitKind::Sdp,
                InitArg::Random => InitKind::Random,
                InitArg::Truth => InitKind::Truth,
                InitArg::File => InitKind::File {
                    path: run
                        .init_labels
                        .clone()
                        .ok_or_else(|| NsbmError::MissingInput("--init file needs --init-labels".into()))?,
                },
            };
            let cfg = ExperimentConfig {
                data: data.source()?,
                k: run.k,
                method: match run.method {
                    MethodArg::Sdp => Method::Sdp,
                    MethodArg::Vem => Method::Vem,
                    MethodArg::Mpl => Method::Mpl,
                },
                init,
                gamma: run.tuning.gamma_rule(data.scenario()),
                lambda: run.tuning.lambda_rule(),
                restarts: run.restarts,
                reps: run.reps,
                seed,
                edge_only: run.edge_only,
                standardize: run.standardize,
                wald_level: run.wald_level,
                sdp_iterations: run.sdp_iterations,
                opts: FitOptions::default(),
                record_wall_time: false,
                output_dir: cli.out.clone(),
            };
            report(&run_pipeline(&cfg)?, cli.out.is_some())?;
        }
        Command::Run { config } => {
            let text = fs::read_to_string(&config)?;
            let mut cfg: ExperimentConfig = serde_json::from_str(&text)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if cli.out.is_some() {
                cfg.output_dir = cli.out.clone();
            }
            let written = cfg.output_dir.is_some();
            report(&run_pipeline(&cfg)?, written)?;
        }
        Command::Evaluate { truth, labels } => {
            let t = parse_labels(open(&truth)?, None)?;
            let l = parse_labels(open(&labels)?, None)?;
            let value = serde_json::json!({
                "nmi": nmi(&t, &l)?,
                "ari": ari(&t, &l)?,
                "misclassification": misclassification_rate(&t, &l)?,
            });
            let mut w = output(&cli.out)?;
            writeln!(w, "{}", serde_json::to_string_pretty(&value)?)?;
            w.flush()?;
        }
        Command::Sweep {
            data,
            taus,
            alphas,
            k,
            reps,
        } => {
            let mut base = ExperimentConfig::scenario(Scenario::A, 0, Method::Sdp);
            base.data = data.source()?;
            base.k = k;
            base.reps = reps;
            base.seed = seed;
            let rows = sweep_tuning(&base, &taus, &alphas)?;
            let mut w = output(&cli.out)?;
            write_sweep_csv(&rows, &mut w)?;
            w.flush()?;
        }
        Command::Wald { files, labels, level } => {
            let (g, x) = load_files(&files)?;
            let c = parse_labels(open(&labels)?, None)?;
            if c.len() != g.n() {
                return Err(NsbmError::DimensionMismatch("labels do not match the graph".into()));
            }
            let fit = fit_multilogistic(&x, &c.to_one_hot())?;
            let table = wald_test(&fit, x.n(), level, true)?;
            let mut w = output(&cli.out)?;
            writeln!(w, "class\tfeature\testimate\tstd_error\tz\tp_value\treject")?;
            for e in &table.entries {
                writeln!(
                    w,
                    "{}\t{}\t{:.6}\t{:.6}\t{:.4}\t{:.4e}\t{}",
                    e.class, e.feature, e.estimate, e.std_error, e.statistic, e.p_value, e.reject
                )?;
            }
            if table.regularized {
                writeln!(w, "# information matrix was regularized")?;
            }
            w.flush()?;
        }
        Command::RealData {
            edges,
            attributes,
            truth_column,
            covariates,
            threshold,
            one_hot,
            standardize,
            intercept,
        } => {
            let mut input = RealDataInput::new(edges, attributes);
            input.truth_column = truth_column;
            input.covariate_columns = covariates;
            input.threshold = threshold;
            input.one_hot = one_hot;
            input.standardize = standardize;
            input.intercept = intercept;
            let rep = real_data_pipeline(&input, seed, &FitOptions::default())?;
            eprintln!(
                "nodes = {} of {}, edges = {}, k = {}, lambda = {}, gamma = {:.5}",
                rep.nodes, rep.nodes_in_file, rep.edges, rep.k, rep.lambda, rep.gamma
            );
            rep.write_table(io::stdout().lock())?;
            if let Some(p) = &cli.out {
                fs::write(p, serde_json::to_string_pretty(&rep)?)?;
            }
        }
    }
    Ok(())
}

fn report(rec: &nsbm::harness::RunRecord, written: bool) -> Result<()> {
    let agg = &rec.aggregate;
    let fmt = |s: &Option<nsbm::harness::Summary>| match s {
        Some(s) => format!("{:.4} (se {:.4})", s.mean, s.se),
        None => "-".into(),
    };
    eprintln!(
        "completed {} failed {}; nmi {}; ari {}; misclassification {}",
        agg.completed,
        agg.failed,
        fmt(&agg.nmi),
        fmt(&agg.ari),
        fmt(&agg.misclassification)
    );
    for r in rec.reps.iter().filter(|r| r.error.is_some()) {
        eprintln!("rep {}: {}", r.rep, r.error.as_deref().unwrap_or_default());
    }
    if !written {
        println!("{}", rec.to_json()?);
    }
    Ok(())
}
