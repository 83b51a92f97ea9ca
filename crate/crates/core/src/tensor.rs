//! Interaction-tensor construction from per-model activation matrices.
//!
//! Each model's activations are reduced to their top principal components,
//! features are matched across models by the absolute Pearson correlation of
//! their scores, greedily clustered, and every datum is marked with the
//! clusters whose normalized score magnitude exceeds a data threshold.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

/// Projected columns whose largest magnitude is below this fraction of the
/// largest magnitude in the whole projection are treated as zero-variance.
const ZERO_COLUMN_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("activation matrix {model:?} must have at least 2 rows and 1 column, got {rows}x{cols}")]
    Shape { model: String, rows: usize, cols: usize },
    #[error("activation matrix {model:?} has {found} values, expected {expected}")]
    Payload { model: String, expected: usize, found: usize },
    #[error("activation matrix {0:?} contains non-finite values")]
    NonFinite(String),
    #[error("component count {k} outside 1..={max}")]
    ComponentCount { k: usize, max: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("need at least {needed} models, got {found}")]
    TooFewModels { needed: usize, found: usize },
    #[error("threshold {0} is out of range")]
    InvalidThreshold(f64),
    #[error("percentile of an empty set")]
    EmptyPercentile,
    #[error("percentile {0} outside (0, 100]")]
    InvalidPercentile(f64),
    #[error("interaction triple ({0}, {1}, {2}) is out of bounds")]
    OutOfBounds(u32, u32, u32),
}

/// Rows are data points, columns representation dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationMatrix {
    model_id: String,
    rows: usize,
    cols: usize,
    values: Vec<f32>,
}

impl ActivationMatrix {
    pub fn new(
        model_id: impl Into<String>,
        rows: usize,
        cols: usize,
        values: Vec<f32>,
    ) -> Result<Self, TensorError> {
        let model = model_id.into();
        if rows < 2 || cols < 1 {
            return Err(TensorError::Shape { model, rows, cols });
        }
        if values.len() != rows * cols {
            return Err(TensorError::Payload {
                model,
                expected: rows * cols,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(TensorError::NonFinite(model));
        }
        Ok(Self {
            model_id: model,
            rows,
            cols,
            values,
        })
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major values.
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.cols + col]
    }

    fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |r, c| f64::from(self.get(r, c)))
    }
}

/// Top principal directions of one model's centered activations.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionBasis {
    /// `d x k`, orthonormal columns.
    pub components: DMatrix<f64>,
    /// Nonincreasing.
    pub singular_values: Vec<f64>,
    pub column_means: Vec<f64>,
}

impl ProjectionBasis {
    pub fn dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn k(&self) -> usize {
        self.components.ncols()
    }
}

/// Fits the top-`k` right singular vectors of the column-centered matrix.
/// Each vector is signed so that its largest-magnitude entry is positive.
pub fn fit_pca(act: &ActivationMatrix, k: usize) -> Result<ProjectionBasis, TensorError> {
    let max = act.rows.min(act.cols);
    if k == 0 || k > max {
        return Err(TensorError::ComponentCount { k, max });
    }
    let mut x = act.to_f64();
    let means: Vec<f64> = (0..act.cols).map(|c| x.column(c).mean()).collect();
    for (c, mean) in means.iter().enumerate() {
        x.column_mut(c).add_scalar_mut(-mean);
    }
    let svd = x.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors were requested");
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));

    let mut components = DMatrix::zeros(act.cols, k);
    let mut singular_values = Vec::with_capacity(k);
    for (out, &idx) in order.iter().take(k).enumerate() {
        let mut v: DVector<f64> = v_t.row(idx).transpose();
        let mut pivot = 0;
        for i in 1..v.len() {
            if v[i].abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        components.set_column(out, &v);
        singular_values.push(sv[idx]);
    }
    Ok(ProjectionBasis {
        components,
        singular_values,
        column_means: means,
    })
}

/// Principal-component scores of one model and their per-column magnitude
/// normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedActivations {
    pub model_id: String,
    /// `N x k` scores.
    pub scores: DMatrix<f64>,
    /// `|scores|` divided by each column's largest magnitude; in `[0, 1]`.
    pub normalized: DMatrix<f64>,
    /// Columns with (numerically) no variance; their normalized values are 0.
    pub zero_columns: Vec<bool>,
}

impl ProjectedActivations {
    pub fn n(&self) -> usize {
        self.scores.nrows()
    }

    pub fn k(&self) -> usize {
        self.scores.ncols()
    }

    /// Builds a projection directly from scores, e.g. for synthetic tests.
    pub fn from_scores(model_id: impl Into<String>, scores: DMatrix<f64>) -> Self {
        let global = scores.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut normalized = DMatrix::zeros(scores.nrows(), scores.ncols());
        let mut zero_columns = vec![false; scores.ncols()];
        for c in 0..scores.ncols() {
            let col_max = scores.column(c).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if col_max == 0.0 || col_max <= ZERO_COLUMN_RTOL * global {
                zero_columns[c] = true;
                continue;
            }
            for r in 0..scores.nrows() {
                normalized[(r, c)] = scores[(r, c)].abs() / col_max;
            }
        }
        Self {
            model_id: model_id.into(),
            scores,
            normalized,
            zero_columns,
        }
    }
}

pub fn project(
    act: &ActivationMatrix,
    basis: &ProjectionBasis,
) -> Result<ProjectedActivations, TensorError> {
    if act.cols != basis.dim() {
        return Err(TensorError::DimensionMismatch {
            expected: basis.dim(),
            found: act.cols,
        });
    }
    let mut x = act.to_f64();
    for (c, mean) in basis.column_means.iter().enumerate() {
        x.column_mut(c).add_scalar_mut(-mean);
    }
    Ok(ProjectedActivations::from_scores(
        act.model_id.clone(),
        x * &basis.components,
    ))
}

/// Columns scaled to zero mean and unit population variance; zero-variance
/// columns become all zeros.
fn standardize(p: &ProjectedActivations) -> DMatrix<f64> {
    let n = p.n() as f64;
    let mut z = p.scores.clone();
    for c in 0..p.k() {
        let mut col = z.column_mut(c);
        if p.zero_columns[c] {
            col.fill(0.0);
            continue;
        }
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / n).sqrt();
        if sd > 0.0 {
            col /= sd;
        } else {
            col.fill(0.0);
        }
    }
    z
}

fn correlation_from_standardized(zp: &DMatrix<f64>, zq: &DMatrix<f64>) -> DMatrix<f64> {
    let n = zp.nrows() as f64;
    (zp.transpose() * zq).map(|v| (v / n).clamp(-1.0, 1.0))
}

/// Population Pearson correlation between every score column of `p` and
/// every score column of `q`. Zero-variance columns correlate as 0.
pub fn correlation_matrix(
    p: &ProjectedActivations,
    q: &ProjectedActivations,
) -> Result<DMatrix<f64>, TensorError> {
    if p.n() != q.n() {
        return Err(TensorError::DimensionMismatch {
            expected: p.n(),
            found: q.n(),
        });
    }
    Ok(correlation_from_standardized(&standardize(p), &standardize(q)))
}

/// `M x M x k x k` cross-model feature correlations.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTensor {
    m: usize,
    k: usize,
    values: Vec<f64>,
}

impl CorrelationTensor {
    pub fn from_blocks(m: usize, k: usize, block: impl Fn(usize, usize) -> DMatrix<f64>) -> Self {
        let mut values = vec![0.0; m * m * k * k];
        for i in 0..m {
            for j in 0..m {
                let b = block(i, j);
                for a in 0..k {
                    for c in 0..k {
                        values[((i * m + j) * k + a) * k + c] = b[(a, c)];
                    }
                }
            }
        }
        Self { m, k, values }
    }

    pub fn models(&self) -> usize {
        self.m
    }

    pub fn features(&self) -> usize {
        self.k
    }

    /// Correlation of feature `a` of model `i` with feature `b` of model `j`.
    pub fn get(&self, i: usize, j: usize, a: usize, b: usize) -> f64 {
        self.values[((i * self.m + j) * self.k + a) * self.k + b]
    }

    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.k, self.k, |a, b| self.get(i, j, a, b))
    }

    /// Absolute values of every entry in blocks with `i < j`.
    pub fn off_diagonal_magnitudes(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.m * (self.m.saturating_sub(1)) / 2 * self.k * self.k);
        for i in 0..self.m {
            for j in (i + 1)..self.m {
                for a in 0..self.k {
                    for b in 0..self.k {
                        out.push(self.get(i, j, a, b).abs());
                    }
                }
            }
        }
        out
    }
}

/// Correlation blocks for every model pair. Blocks `(j, i)` are exact
/// transposes of `(i, j)`.
pub fn build_lambda(projections: &[ProjectedActivations]) -> Result<CorrelationTensor, TensorError> {
    let m = projections.len();
    if m < 2 {
        return Err(TensorError::TooFewModels { needed: 2, found: m });
    }
    let n = projections[0].n();
    let k = projections[0].k();
    for p in projections {
        if p.n() != n {
            return Err(TensorError::DimensionMismatch { expected: n, found: p.n() });
        }
        if p.k() != k {
            return Err(TensorError::DimensionMismatch { expected: k, found: p.k() });
        }
    }
    let standardized: Vec<DMatrix<f64>> = projections.par_iter().map(standardize).collect();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
    let blocks: Vec<DMatrix<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| correlation_from_standardized(&standardized[i], &standardized[j]))
        .collect();
    let lookup = |i: usize, j: usize| -> DMatrix<f64> {
        let (lo, hi, flip) = if i <= j { (i, j, false) } else { (j, i, true) };
        let idx = pairs.iter().position(|&p| p == (lo, hi)).expect("pair enumerated");
        if flip {
            blocks[idx].transpose()
        } else {
            blocks[idx].clone()
        }
    };
    Ok(CorrelationTensor::from_blocks(m, k, lookup))
}

/// Nearest-rank percentile: the `ceil(p/100 * n)`-th smallest value.
pub fn percentile_threshold(values: &[f64], p: f64) -> Result<f64, TensorError> {
    if values.is_empty() {
        return Err(TensorError::EmptyPercentile);
    }
    if !(p > 0.0 && p <= 100.0) {
        return Err(TensorError::InvalidPercentile(p));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // Guard against p * n / 100 landing a hair above an integer.
    let rank = ((p * n as f64 / 100.0) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(n) - 1])
}

/// Default correlation threshold: percentile of `|Lambda|` over blocks of
/// distinct models.
pub fn default_gamma_corr(lambda: &CorrelationTensor, percentile: f64) -> Result<f64, TensorError> {
    percentile_threshold(&lambda.off_diagonal_magnitudes(), percentile)
}

/// Default data threshold: percentile of all normalized scores pooled over
/// models.
pub fn default_gamma_data(
    projections: &[ProjectedActivations],
    percentile: f64,
) -> Result<f64, TensorError> {
    let pooled: Vec<f64> = projections
        .iter()
        .flat_map(|p| p.normalized.iter().copied())
        .collect();
    percentile_threshold(&pooled, percentile)
}

/// Cluster id of every `(model, feature)` pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterAssignment {
    m: usize,
    k: usize,
    labels: Vec<u32>,
    num_clusters: u32,
    pub gamma_corr: f64,
}

impl ClusterAssignment {
    pub fn models(&self) -> usize {
        self.m
    }

    pub fn features(&self) -> usize {
        self.k
    }

    /// Cluster ids are contiguous from 0.
    pub fn cluster_of(&self, model: usize, feature: usize) -> u32 {
        self.labels[model * self.k + feature]
    }

    pub fn num_clusters(&self) -> u32 {
        self.num_clusters
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_clusters as usize];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    /// Members of each cluster as `(model, feature)` pairs, row-major.
    pub fn members(&self) -> Vec<Vec<(usize, usize)>> {
        let mut out = vec![Vec::new(); self.num_clusters as usize];
        for i in 0..self.m {
            for a in 0..self.k {
                out[self.cluster_of(i, a) as usize].push((i, a));
            }
        }
        out
    }
}

/// Greedy feature clustering.
///
/// Pairs are visited in row-major `(model, feature)` order. An unassigned
/// pair opens a new cluster; then every feature `q` of every other model `p`
/// joins it when `|Lambda[i][p][j][q]|` exceeds both `gamma_corr` and the best
/// correlation that pair has been claimed with so far. A later cluster can
/// therefore take over a pair with a stronger match. Ids are compacted to
/// `0..C` in order of first appearance.
pub fn cluster_features(
    lambda: &CorrelationTensor,
    gamma_corr: f64,
) -> Result<ClusterAssignment, TensorError> {
    if !(0.0..1.0).contains(&gamma_corr) {
        return Err(TensorError::InvalidThreshold(gamma_corr));
    }
    let (m, k) = (lambda.models(), lambda.features());
    let mut assignment: Vec<Option<u32>> = vec![None; m * k];
    let mut maximum = vec![-1.0f64; m * k];
    let mut current = 0u32;
    for i in 0..m {
        for j in 0..k {
            if assignment[i * k + j].is_some() {
                continue;
            }
            assignment[i * k + j] = Some(current);
            for p in (0..m).filter(|&p| p != i) {
                for q in 0..k {
                    let corr = lambda.get(i, p, j, q).abs();
                    let slot = p * k + q;
                    if corr > maximum[slot] && corr > gamma_corr {
                        assignment[slot] = Some(current);
                        maximum[slot] = corr;
                    }
                }
            }
            current += 1;
        }
    }
    let mut remap: Vec<Option<u32>> = vec![None; current as usize];
    let mut next = 0u32;
    let labels = assignment
        .into_iter()
        .map(|a| {
            let raw = a.expect("every pair is visited") as usize;
            *remap[raw].get_or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect();
    Ok(ClusterAssignment {
        m,
        k,
        labels,
        num_clusters: next,
        gamma_corr,
    })
}

/// Dense row-major boolean matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl BinaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![false; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[bool] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Column indices set in row `r`.
    pub fn row_set(&self, r: usize) -> BTreeSet<usize> {
        self.row(r)
            .iter()
            .enumerate()
            .filter_map(|(c, &v)| v.then_some(c))
            .collect()
    }

    pub fn row_count(&self, r: usize) -> usize {
        self.row(r).iter().filter(|&&v| v).count()
    }
}

/// Sparse binary `M x N x T` incidence of models, data and feature clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionTensor {
    pub m: u32,
    pub n: u32,
    pub t: u32,
    pub gamma_corr: f64,
    pub gamma_data: f64,
    entries: Vec<(u32, u32, u32)>,
}

impl InteractionTensor {
    /// Sorts and deduplicates `entries`, rejecting out-of-bounds triples.
    pub fn new(
        dims: (u32, u32, u32),
        gamma_corr: f64,
        gamma_data: f64,
        mut entries: Vec<(u32, u32, u32)>,
    ) -> Result<Self, TensorError> {
        let (m, n, t) = dims;
        if let Some(&(a, b, c)) = entries.iter().find(|&&(a, b, c)| a >= m || b >= n || c >= t) {
            return Err(TensorError::OutOfBounds(a, b, c));
        }
        entries.sort_unstable();
        entries.dedup();
        Ok(Self {
            m,
            n,
            t,
            gamma_corr,
            gamma_data,
            entries,
        })
    }

    /// Lexicographically sorted `(model, datum, feature)` triples.
    pub fn entries(&self) -> &[(u32, u32, u32)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn contains(&self, m: u32, n: u32, t: u32) -> bool {
        self.entries.binary_search(&(m, n, t)).is_ok()
    }

    /// `N x T`: datum has feature under any model.
    pub fn data_features(&self) -> BinaryMatrix {
        let mut out = BinaryMatrix::zeros(self.n as usize, self.t as usize);
        for &(_, n, t) in &self.entries {
            out.set(n as usize, t as usize, true);
        }
        out
    }

    /// `M x T`: model has feature on at least one datum.
    pub fn model_features(&self) -> BinaryMatrix {
        let mut out = BinaryMatrix::zeros(self.m as usize, self.t as usize);
        for &(m, _, t) in &self.entries {
            out.set(m as usize, t as usize, true);
        }
        out
    }
}

/// Marks `(m, n, cluster(m, a))` whenever model `m`'s normalized score
/// `|v_{m,a}(x_n)|` exceeds `gamma_data`. Zero-variance columns never fire.
/// Returns the `N x T` datum-feature matrix (OR over models) and the tensor.
pub fn assign_data_features(
    projections: &[ProjectedActivations],
    assignment: &ClusterAssignment,
    gamma_data: f64,
) -> Result<(BinaryMatrix, InteractionTensor), TensorError> {
    if !(gamma_data >= 0.0 && gamma_data.is_finite()) {
        return Err(TensorError::InvalidThreshold(gamma_data));
    }
    if projections.len() != assignment.models() {
        return Err(TensorError::DimensionMismatch {
            expected: assignment.models(),
            found: projections.len(),
        });
    }
    let n = projections.first().map_or(0, ProjectedActivations::n);
    for p in projections {
        if p.k() != assignment.features() {
            return Err(TensorError::DimensionMismatch {
                expected: assignment.features(),
                found: p.k(),
            });
        }
        if p.n() != n {
            return Err(TensorError::DimensionMismatch { expected: n, found: p.n() });
        }
    }
    let mut entries = Vec::new();
    for (m, p) in projections.iter().enumerate() {
        for a in (0..p.k()).filter(|&a| !p.zero_columns[a]) {
            let t = assignment.cluster_of(m, a);
            for row in 0..n {
                if p.normalized[(row, a)] > gamma_data {
                    entries.push((m as u32, row as u32, t));
                }
            }
        }
    }
    let tensor = InteractionTensor::new(
        (projections.len() as u32, n as u32, assignment.num_clusters()),
        assignment.gamma_corr,
        gamma_data,
        entries,
    )?;
    Ok((tensor.data_features(), tensor))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub pcs: usize,
    pub corr_percentile: f64,
    pub data_percentile: f64,
    /// Explicit thresholds override the percentile defaults.
    pub gamma_corr: Option<f64>,
    pub gamma_data: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            pcs: 50,
            corr_percentile: 90.0,
            data_percentile: 90.0,
            gamma_corr: None,
            gamma_data: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub tensor: InteractionTensor,
    pub assignment: ClusterAssignment,
    pub data_features: BinaryMatrix,
    pub projections: Vec<ProjectedActivations>,
    pub warnings: Vec<String>,
}

/// Runs PCA, correlation, clustering and data assignment end to end.
pub fn run_pipeline(
    models: &[ActivationMatrix],
    config: &PipelineConfig,
) -> Result<PipelineOutput, TensorError> {
    if models.len() < 2 {
        return Err(TensorError::TooFewModels {
            needed: 2,
            found: models.len(),
        });
    }
    let n = models[0].rows();
    if let Some(bad) = models.iter().find(|m| m.rows() != n) {
        return Err(TensorError::DimensionMismatch {
            expected: n,
            found: bad.rows(),
        });
    }
    let projections = models
        .par_iter()
        .map(|act| fit_pca(act, config.pcs).and_then(|basis| project(act, &basis)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut warnings = Vec::new();
    for p in &projections {
        for (a, &zero) in p.zero_columns.iter().enumerate() {
            if zero {
                warnings.push(format!(
                    "model {:?} component {a} has zero variance; it correlates as 0 and marks no data",
                    p.model_id
                ));
            }
        }
    }

    let lambda = build_lambda(&projections)?;
    let gamma_corr = match config.gamma_corr {
        Some(g) => g,
        None => default_gamma_corr(&lambda, config.corr_percentile)?,
    };
    let gamma_data = match config.gamma_data {
        Some(g) => g,
        None => default_gamma_data(&projections, config.data_percentile)?,
    };
    let assignment = cluster_features(&lambda, gamma_corr)?;
    let (data_features, tensor) = assign_data_features(&projections, &assignment, gamma_data)?;
    Ok(PipelineOutput {
        tensor,
        assignment,
        data_features,
        projections,
        warnings,
    })
}
