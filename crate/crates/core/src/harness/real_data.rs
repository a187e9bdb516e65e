use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{NsbmError, Result};
use crate::inference::{mpl_fit, vem_fit, FitOptions, HARD_TO_SOFT_TAU};
use crate::metrics::{ari, nmi};
use crate::rng::derive_seed;
use crate::sdp::{choose_lambda, sdp_init, LambdaInputs, LambdaStrategy, SdpConfig};
use crate::simgen::preprocess_weighted_digraph;
use crate::types::{Covariates, Labels, SoftLabels};

use super::config::Method;
use super::io::{parse_attribute_table, parse_weighted_digraph, AttributeTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealDataInput {
    /// `u v w` lines of the weighted directed network.
    pub edges: PathBuf,
    /// Attribute table with a header, one row per node in id order.
    pub attributes: PathBuf,
    pub truth_column: String,
    /// Columns used as covariates; empty means every column except the truth.
    pub covariate_columns: Vec<String>,
    /// Keep `{i, j}` iff both directed weights exceed this.
    pub threshold: u32,
    /// Id base of the edge file; detected when absent.
    pub one_based: Option<bool>,
    /// Expand each covariate column into level indicators (first level
    /// dropped).
    pub one_hot: bool,
    pub standardize: bool,
    pub intercept: bool,
}

impl RealDataInput {
    pub fn new(edges: PathBuf, attributes: PathBuf) -> Self {
        RealDataInput {
            edges,
            attributes,
            truth_column: "location".into(),
            covariate_columns: Vec::new(),
            threshold: 3,
            one_based: None,
            one_hot: false,
            standardize: false,
            intercept: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealDataRow {
    /// `edge` or `edge+nodal`.
    pub features: String,
    pub method: Method,
    pub nmi: f64,
    pub ari: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealDataReport {
    pub nodes_in_file: usize,
    pub nodes: usize,
    pub edges: usize,
    pub k: usize,
    pub covariates: Vec<String>,
    pub lambda: f64,
    pub gamma: f64,
    pub rows: Vec<RealDataRow>,
}

impl RealDataReport {
    pub fn row(&self, features: &str, method: Method) -> Option<&RealDataRow> {
        self.rows.iter().find(|r| r.features == features && r.method == method)
    }

    pub fn write_table<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "features,method,nmi,ari")?;
        for r in &self.rows {
            let method = match r.method {
                Method::Sdp => "sdp",
                Method::Mpl => "mpl",
                Method::Vem => "vem",
            };
            writeln!(w, "{},{method},{:.3},{:.3}", r.features, r.nmi, r.ari)?;
        }
        Ok(())
    }
}

fn open(path: &PathBuf) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| NsbmError::MissingInput(format!("{}: {e}", path.display())))
}

/// Distinct values mapped to `0..k` in increasing order.
fn encode_levels(values: &[f64]) -> (Vec<usize>, usize) {
    let mut levels: BTreeMap<u64, usize> = BTreeMap::new();
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    for v in sorted {
        let next = levels.len();
        levels.entry(v.to_bits()).or_insert(next);
    }
    (values.iter().map(|v| levels[&v.to_bits()]).collect(), levels.len())
}

fn build_covariates(table: &AttributeTable, columns: &[String], kept: &[usize], one_hot: bool) -> Result<Covariates> {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for name in columns {
        let full = table.column(name)?;
        let values: Vec<f64> = kept.iter().map(|&i| full[i]).collect();
        if one_hot {
            let (codes, levels) = encode_levels(&values);
            for level in 1..levels {
                cols.push(codes.iter().map(|&c| f64::from(u8::from(c == level))).collect());
            }
        } else {
            cols.push(values);
        }
    }
    let n = kept.len();
    let p = cols.len().max(1);
    let mut values = vec![0.0; n * p];
    for (j, col) in cols.iter().enumerate() {
        for i in 0..n {
            values[i * p + j] = col[i];
        }
    }
    Covariates::new(n, p, values)
}

/// Binarizes the network, then scores SDP, MPL and VEM against the truth
/// column with and without covariates. `lambda` comes from spectral
/// community sizes and `gamma = density / ln n`.
pub fn real_data_pipeline(input: &RealDataInput, seed: u64, opts: &FitOptions) -> Result<RealDataReport> {
    let table = parse_attribute_table(open(&input.attributes)?)?;
    let nodes_in_file = table.rows.len();
    let truth_full = table.column(&input.truth_column)?;
    let digraph = parse_weighted_digraph(open(&input.edges)?, nodes_in_file, input.one_based)?;
    let (graph, kept) = preprocess_weighted_digraph(&digraph, input.threshold)?;
    let n = graph.n();

    let (codes, k) = encode_levels(&kept.iter().map(|&i| truth_full[i]).collect::<Vec<_>>());
    if k < 2 {
        return Err(NsbmError::DegenerateGraph(format!(
            "truth column has {k} distinct value among the kept nodes"
        )));
    }
    if n < 2 * k {
        return Err(NsbmError::DegenerateGraph(format!("only {n} nodes left after thresholding")));
    }
    let truth = Labels::new(codes, k)?;

    let columns: Vec<String> = if input.covariate_columns.is_empty() {
        table.names.iter().filter(|c| **c != input.truth_column).cloned().collect()
    } else {
        input.covariate_columns.clone()
    };
    let mut x = build_covariates(&table, &columns, &kept, input.one_hot)?;
    if input.standardize {
        x = x.standardized();
    }
    if input.intercept {
        x = x.with_intercept();
    }

    let lambda = choose_lambda(
        LambdaStrategy::Spectral,
        LambdaInputs {
            n,
            k,
            truth: None,
            graph: Some(&graph),
            seed: derive_seed(seed, 3),
        },
    )?;
    let gamma = graph.density() / (n as f64).ln();

    let mut rows = Vec::new();
    for (features, covariates) in [("edge", Covariates::zeros(n, x.p())), ("edge+nodal", x.clone())] {
        let init = sdp_init(&graph, &covariates, &SdpConfig::new(gamma, lambda), k, derive_seed(seed, 1))?;
        let mpl = mpl_fit(&graph, &covariates, &init.labels, opts)?;
        let vem = vem_fit(&graph, &covariates, &SoftLabels::from_hard(&init.labels, HARD_TO_SOFT_TAU), opts)?;
        for (method, labels) in [(Method::Sdp, &init.labels), (Method::Mpl, &mpl.labels), (Method::Vem, &vem.labels)] {
            rows.push(RealDataRow {
                features: features.into(),
                method,
                nmi: nmi(&truth, labels)?,
                ari: ari(&truth, labels)?,
            });
        }
    }
    Ok(RealDataReport {
        nodes_in_file,
        nodes: n,
        edges: graph.edge_count(),
        k,
        covariates: columns,
        lambda,
        gamma,
        rows,
    })
}
