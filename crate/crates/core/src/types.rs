//! Shared data model: graphs, covariates, hard and soft labelings, block
//! matrices and multi-logistic coefficients.
//!
//! Class labels are stored 0-based (`0..k`). Every type validates its
//! invariants on construction and is immutable afterwards.

use serde::{Deserialize, Serialize};

use crate::error::{NsbmError, Result};

/// Simple undirected graph with dense adjacency and cached neighbor lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adjacency: Vec<u8>,
    neighbors: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            adjacency: vec![0; n * n],
            neighbors: vec![Vec::new(); n],
            edge_count: 0,
        }
    }

    /// Builds a graph from undirected edges. Duplicates collapse and
    /// self-loops are skipped.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adjacency = vec![0u8; n * n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(NsbmError::InvalidInput(format!(
                    "edge ({u}, {v}) out of range for n = {n}"
                )));
            }
            if u == v {
                continue;
            }
            adjacency[u * n + v] = 1;
            adjacency[v * n + u] = 1;
        }
        Ok(Self::from_validated(n, adjacency))
    }

    /// Builds a graph from a row-major 0/1 matrix, checking symmetry and the
    /// zero diagonal.
    pub fn from_dense(n: usize, adjacency: Vec<u8>) -> Result<Self> {
        if adjacency.len() != n * n {
            return Err(NsbmError::DimensionMismatch(format!(
                "adjacency has {} entries, expected {}",
                adjacency.len(),
                n * n
            )));
        }
        for i in 0..n {
            if adjacency[i * n + i] != 0 {
                return Err(NsbmError::InvalidInput(format!("self-loop at node {i}")));
            }
            for j in 0..n {
                let a = adjacency[i * n + j];
                if a > 1 {
                    return Err(NsbmError::InvalidInput(format!(
                        "adjacency entry ({i}, {j}) = {a} is not binary"
                    )));
                }
                if a != adjacency[j * n + i] {
                    return Err(NsbmError::InvalidInput(format!(
                        "adjacency not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self::from_validated(n, adjacency))
    }

    fn from_validated(n: usize, adjacency: Vec<u8>) -> Self {
        let mut neighbors = vec![Vec::new(); n];
        let mut twice_edges = 0usize;
        for i in 0..n {
            for j in 0..n {
                if adjacency[i * n + j] == 1 {
                    neighbors[i].push(j);
                    twice_edges += 1;
                }
            }
        }
        Graph {
            n,
            adjacency,
            neighbors,
            edge_count: twice_edges / 2,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j] == 1
    }

    #[inline]
    pub fn adjacency(&self, i: usize, j: usize) -> f64 {
        f64::from(self.adjacency[i * self.n + j])
    }

    /// Sorted neighbor indices of `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    /// Undirected edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |i| {
            self.neighbors[i]
                .iter()
                .copied()
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    /// Edge density `2m / n^2`.
    pub fn density(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        2.0 * self.edge_count as f64 / (self.n as f64 * self.n as f64)
    }

    /// Induced subgraph on `keep` (indices into this graph, in the given order).
    pub fn induced(&self, keep: &[usize]) -> Graph {
        let m = keep.len();
        let mut adjacency = vec![0u8; m * m];
        for (a, &i) in keep.iter().enumerate() {
            for (b, &j) in keep.iter().enumerate() {
                adjacency[a * m + b] = self.adjacency[i * self.n + j];
            }
        }
        Self::from_validated(m, adjacency)
    }
}

/// Row-major `n x p` matrix of nodal covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    n: usize,
    p: usize,
    values: Vec<f64>,
}

impl Covariates {
    pub fn new(n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * p {
            return Err(NsbmError::DimensionMismatch(format!(
                "covariate buffer has {} entries, expected {n} x {p}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(NsbmError::NonFinite(format!(
                "covariate ({}, {})",
                pos / p.max(1),
                pos % p.max(1)
            )));
        }
        Ok(Covariates { n, p, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(NsbmError::DimensionMismatch(format!(
                "row {i} has {} columns, expected {p}",
                rows[i].len()
            )));
        }
        Self::new(n, p, rows.concat())
    }

    pub fn zeros(n: usize, p: usize) -> Self {
        Covariates {
            n,
            p,
            values: vec![0.0; n * p],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Appends a trailing column of ones.
    pub fn with_intercept(&self) -> Covariates {
        let p = self.p + 1;
        let mut values = Vec::with_capacity(self.n * p);
        for i in 0..self.n {
            values.extend_from_slice(self.row(i));
            values.push(1.0);
        }
        Covariates {
            n: self.n,
            p,
            values,
        }
    }

    /// Centers each column and scales it to unit sample standard deviation.
    /// Constant columns are only centered.
    pub fn standardized(&self) -> Covariates {
        let mut values = self.values.clone();
        if self.n == 0 {
            return self.clone();
        }
        for j in 0..self.p {
            let mean = (0..self.n).map(|i| self.get(i, j)).sum::<f64>() / self.n as f64;
            let var = (0..self.n)
                .map(|i| (self.get(i, j) - mean).powi(2))
                .sum::<f64>()
                / (self.n.saturating_sub(1).max(1)) as f64;
            let sd = var.sqrt();
            for i in 0..self.n {
                let v = &mut values[i * self.p + j];
                *v -= mean;
                if sd > 0.0 {
                    *v /= sd;
                }
            }
        }
        Covariates {
            n: self.n,
            p: self.p,
            values,
        }
    }

    /// Keeps the given rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Covariates {
        let mut values = Vec::with_capacity(rows.len() * self.p);
        for &i in rows {
            values.extend_from_slice(self.row(i));
        }
        Covariates {
            n: rows.len(),
            p: self.p,
            values,
        }
    }

    /// Keeps the given columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Covariates> {
        if let Some(&c) = cols.iter().find(|&&c| c >= self.p) {
            return Err(NsbmError::DimensionMismatch(format!(
                "column {c} out of range for p = {}",
                self.p
            )));
        }
        let mut values = Vec::with_capacity(self.n * cols.len());
        for i in 0..self.n {
            values.extend(cols.iter().map(|&c| self.get(i, c)));
        }
        Ok(Covariates {
            n: self.n,
            p: cols.len(),
            values,
        })
    }
}

/// Hard community assignment, classes `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Labels {
    assignments: Vec<usize>,
    k: usize,
}

impl Labels {
    pub fn new(assignments: Vec<usize>, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(NsbmError::InvalidInput(format!(
                "community count must be at least 2, got {k}"
            )));
        }
        if let Some(i) = assignments.iter().position(|&c| c >= k) {
            return Err(NsbmError::InvalidInput(format!(
                "label {} at node {i} out of range for k = {k}",
                assignments[i]
            )));
        }
        Ok(Labels { assignments, k })
    }

    /// Infers `k` as `max + 1`, but at least 2.
    pub fn from_vec(assignments: Vec<usize>) -> Self {
        let k = assignments.iter().max().map_or(2, |&m| (m + 1).max(2));
        Labels { assignments, k }
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize) -> usize {
        self.assignments[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.assignments
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.assignments
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignments {
            sizes[c] += 1;
        }
        sizes
    }

    /// One-hot responsibilities.
    pub fn to_one_hot(&self) -> SoftLabels {
        SoftLabels::from_hard(self, 0.0)
    }

    pub fn select(&self, rows: &[usize]) -> Labels {
        Labels {
            assignments: rows.iter().map(|&i| self.assignments[i]).collect(),
            k: self.k,
        }
    }
}

/// Row-stochastic `n x k` responsibility matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftLabels {
    n: usize,
    k: usize,
    q: Vec<f64>,
}

impl SoftLabels {
    pub fn new(n: usize, k: usize, q: Vec<f64>) -> Result<Self> {
        if q.len() != n * k {
            return Err(NsbmError::DimensionMismatch(format!(
                "responsibility buffer has {} entries, expected {n} x {k}",
                q.len()
            )));
        }
        if k < 2 {
            return Err(NsbmError::InvalidInput(format!(
                "community count must be at least 2, got {k}"
            )));
        }
        for i in 0..n {
            let row = &q[i * k..(i + 1) * k];
            if row.iter().any(|&v| !v.is_finite() || v < 0.0) {
                return Err(NsbmError::InvalidInput(format!(
                    "row {i} has a negative or non-finite entry"
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(NsbmError::InvalidInput(format!("row {i} sums to {s}")));
            }
        }
        let mut soft = SoftLabels { n, k, q };
        soft.renormalize();
        Ok(soft)
    }

    pub fn uniform(n: usize, k: usize) -> Self {
        SoftLabels {
            n,
            k,
            q: vec![1.0 / k as f64; n * k],
        }
    }

    /// Puts mass `1 - tau` on the assigned class and spreads `tau` evenly
    /// over the rest.
    pub fn from_hard(labels: &Labels, tau: f64) -> Self {
        let k = labels.k();
        let n = labels.len();
        let off = if k > 1 { tau / (k - 1) as f64 } else { 0.0 };
        let mut q = vec![off; n * k];
        for (i, &c) in labels.as_slice().iter().enumerate() {
            q[i * k + c] = 1.0 - tau;
        }
        SoftLabels { n, k, q }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.q[i * self.k..(i + 1) * self.k]
    }

    #[inline]
    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.q[i * self.k..(i + 1) * self.k]
    }

    #[inline]
    pub fn get(&self, i: usize, a: usize) -> f64 {
        self.q[i * self.k + a]
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    /// Column sums `sum_i q_ik`.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.k];
        for i in 0..self.n {
            for (s, v) in sums.iter_mut().zip(self.row(i)) {
                *s += v;
            }
        }
        sums
    }

    fn renormalize(&mut self) {
        for i in 0..self.n {
            let row = self.row_mut(i);
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
    }

    /// Per-row argmax, ties to the lowest class index.
    pub fn argmax_labels(&self) -> Labels {
        let assignments = (0..self.n)
            .map(|i| {
                let row = self.row(i);
                let mut best = 0;
                for (a, &v) in row.iter().enumerate().skip(1) {
                    if v > row[best] {
                        best = a;
                    }
                }
                best
            })
            .collect();
        Labels {
            assignments,
            k: self.k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockMode {
    Bernoulli,
    Poisson,
}

/// Lower clamp for block rates in both modes.
pub const BLOCK_FLOOR: f64 = 1e-10;

impl BlockMode {
    pub fn clamp(self, v: f64) -> f64 {
        match self {
            BlockMode::Bernoulli => v.clamp(BLOCK_FLOOR, 1.0 - BLOCK_FLOOR),
            BlockMode::Poisson => v.max(BLOCK_FLOOR),
        }
    }

    fn in_range(self, v: f64) -> bool {
        match self {
            BlockMode::Bernoulli => v > 0.0 && v < 1.0,
            BlockMode::Poisson => v > 0.0 && v.is_finite(),
        }
    }
}

/// Symmetric `k x k` matrix of connection rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMatrix {
    k: usize,
    mode: BlockMode,
    values: Vec<f64>,
}

impl BlockMatrix {
    /// Validates symmetry and range. Entries are not clamped here; see
    /// [`BlockMatrix::clamped`].
    pub fn new(k: usize, mode: BlockMode, values: Vec<f64>) -> Result<Self> {
        if values.len() != k * k {
            return Err(NsbmError::DimensionMismatch(format!(
                "block matrix has {} entries, expected {k} x {k}",
                values.len()
            )));
        }
        for a in 0..k {
            for b in 0..k {
                let v = values[a * k + b];
                if !mode.in_range(v) {
                    return Err(NsbmError::BlockRange(format!(
                        "B[{a}][{b}] = {v} outside the {mode:?} range"
                    )));
                }
                if v != values[b * k + a] {
                    return Err(NsbmError::InvalidInput(format!(
                        "block matrix not symmetric at ({a}, {b})"
                    )));
                }
            }
        }
        Ok(BlockMatrix { k, mode, values })
    }

    /// Clamps every entry into the mode's admissible interval, then validates.
    pub fn clamped(k: usize, mode: BlockMode, mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| v.is_nan()) {
            return Err(NsbmError::NonFinite("block matrix entry".into()));
        }
        values.iter_mut().for_each(|v| *v = mode.clamp(*v));
        Self::new(k, mode, values)
    }

    pub fn constant(k: usize, mode: BlockMode, value: f64) -> Result<Self> {
        Self::new(k, mode, vec![value; k * k])
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mode(&self) -> BlockMode {
        self.mode
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.k + b]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `k x p` multi-logistic coefficients whose last row is pinned to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    k: usize,
    p: usize,
    beta: Vec<f64>,
    /// Observed information on the stacked free rows, `(k-1)p x (k-1)p`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    fisher_info: Option<Vec<f64>>,
}

impl Coefficients {
    pub fn new(k: usize, p: usize, beta: Vec<f64>) -> Result<Self> {
        if beta.len() != k * p {
            return Err(NsbmError::DimensionMismatch(format!(
                "coefficient buffer has {} entries, expected {k} x {p}",
                beta.len()
            )));
        }
        if k < 2 {
            return Err(NsbmError::InvalidInput(format!(
                "community count must be at least 2, got {k}"
            )));
        }
        if beta[(k - 1) * p..].iter().any(|&v| v != 0.0) {
            return Err(NsbmError::InvalidInput(
                "last coefficient row must be identically zero".into(),
            ));
        }
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(NsbmError::NonFinite("coefficient".into()));
        }
        Ok(Coefficients {
            k,
            p,
            beta,
            fisher_info: None,
        })
    }

    /// Builds from the `k - 1` free rows, appending the zero row.
    pub fn from_free_rows(k: usize, p: usize, free: &[f64]) -> Result<Self> {
        let mut beta = free.to_vec();
        beta.resize(k * p, 0.0);
        Self::new(k, p, beta)
    }

    pub fn zeros(k: usize, p: usize) -> Self {
        Coefficients {
            k,
            p,
            beta: vec![0.0; k * p],
            fisher_info: None,
        }
    }

    pub fn with_fisher_info(mut self, info: Vec<f64>) -> Result<Self> {
        let d = (self.k - 1) * self.p;
        if info.len() != d * d {
            return Err(NsbmError::DimensionMismatch(format!(
                "information matrix has {} entries, expected {d} x {d}",
                info.len()
            )));
        }
        self.fisher_info = Some(info);
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, a: usize) -> &[f64] {
        &self.beta[a * self.p..(a + 1) * self.p]
    }

    pub fn values(&self) -> &[f64] {
        &self.beta
    }

    /// Stacked free rows `beta_0, .., beta_{k-2}`.
    pub fn free(&self) -> &[f64] {
        &self.beta[..(self.k - 1) * self.p]
    }

    pub fn fisher_info(&self) -> Option<&[f64]> {
        self.fisher_info.as_deref()
    }

    /// `beta_a . x` for every class.
    pub fn linear_predictors(&self, x: &[f64], out: &mut [f64]) {
        for (a, o) in out.iter_mut().enumerate().take(self.k) {
            *o = self.row(a).iter().zip(x).map(|(b, v)| b * v).sum();
        }
    }
}

/// Class-conditional law for one group of covariate columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CovariateBlock {
    /// Multivariate normal with row-major covariance.
    Gaussian { mean: Vec<f64>, cov: Vec<f64> },
    Bernoulli { p: f64 },
    Uniform { low: f64, high: f64 },
}

impl CovariateBlock {
    pub fn dim(&self) -> usize {
        match self {
            CovariateBlock::Gaussian { mean, .. } => mean.len(),
            CovariateBlock::Bernoulli { .. } | CovariateBlock::Uniform { .. } => 1,
        }
    }
}

/// Law of a covariate vector: independent blocks concatenated in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateLaw {
    pub blocks: Vec<CovariateBlock>,
}

impl CovariateLaw {
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(CovariateBlock::dim).sum()
    }

    pub fn isotropic_normal(mean: Vec<f64>) -> Self {
        let d = mean.len();
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            cov[i * d + i] = 1.0;
        }
        CovariateLaw {
            blocks: vec![CovariateBlock::Gaussian { mean, cov }],
        }
    }
}

/// How community memberships relate to covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Membership {
    /// Covariates drawn from `marginal`, then `c | x` multi-logistic.
    Logistic {
        beta: Coefficients,
        marginal: CovariateLaw,
    },
    /// `c` drawn from `prior`, then `x | c` from `laws[c]`.
    ClassConditional {
        prior: Vec<f64>,
        laws: Vec<CovariateLaw>,
    },
}

/// Generative parameters: `B = rho * bbar` plus the membership model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub rho: f64,
    pub k: usize,
    /// Row-major symmetric `k x k` base connectivity.
    pub bbar: Vec<f64>,
    pub membership: Membership,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let k = self.k;
        if k < 2 {
            return Err(NsbmError::InvalidInput("k must be at least 2".into()));
        }
        if self.bbar.len() != k * k {
            return Err(NsbmError::DimensionMismatch("bbar must be k x k".into()));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(NsbmError::InvalidInput(format!(
                "rho = {} outside [0, 1]",
                self.rho
            )));
        }
        for a in 0..k {
            for b in 0..k {
                let v = self.bbar[a * k + b];
                if v < 0.0 || v != self.bbar[b * k + a] {
                    return Err(NsbmError::InvalidInput(
                        "bbar must be symmetric and non-negative".into(),
                    ));
                }
                if self.rho * v > 1.0 {
                    return Err(NsbmError::BlockRange(format!(
                        "rho * bbar[{a}][{b}] = {} exceeds 1",
                        self.rho * v
                    )));
                }
            }
        }
        match &self.membership {
            Membership::Logistic { beta, marginal } => {
                if beta.k() != k || beta.p() != marginal.dim() {
                    return Err(NsbmError::DimensionMismatch(
                        "coefficients disagree with k or the covariate law".into(),
                    ));
                }
            }
            Membership::ClassConditional { prior, laws } => {
                if prior.len() != k || laws.len() != k {
                    return Err(NsbmError::DimensionMismatch(
                        "prior and laws need one entry per class".into(),
                    ));
                }
                if (prior.iter().sum::<f64>() - 1.0).abs() > 1e-9 || prior.iter().any(|&w| w < 0.0)
                {
                    return Err(NsbmError::InvalidInput("prior must sum to 1".into()));
                }
                let d = laws[0].dim();
                if laws.iter().any(|l| l.dim() != d) {
                    return Err(NsbmError::DimensionMismatch(
                        "class-conditional laws differ in dimension".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}
