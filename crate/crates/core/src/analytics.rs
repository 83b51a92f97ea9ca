//! Observation metrics over an interaction tensor and ensemble predictions:
//! feature frequencies, confidence vs. feature counts, data/model counts per
//! feature, shared errors between model pairs, and feature-overlap
//! similarity between data.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::{num, Table};
use crate::tensor::{BinaryMatrix, InteractionTensor};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalyticsError {
    #[error("shape mismatch: {what} is {found}, expected {expected}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("label {label} outside 0..{num_classes}")]
    Label { label: u32, num_classes: u32 },
    #[error("index {index} out of range for {len} data")]
    Index { index: usize, len: usize },
    #[error("need at least 2 models, got {0}")]
    TooFewModels(usize),
    #[error("top_k must be at least 1")]
    ZeroTopK,
}

fn shape(what: &'static str, expected: usize, found: usize) -> Result<(), AnalyticsError> {
    if expected == found {
        Ok(())
    } else {
        Err(AnalyticsError::Shape {
            what,
            expected,
            found,
        })
    }
}

/// Per-model predicted labels plus the true labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    m: usize,
    n: usize,
    predictions: Vec<u32>,
    true_labels: Vec<u32>,
    num_classes: u32,
}

impl PredictionMatrix {
    pub fn new(
        predictions: Vec<Vec<u32>>,
        true_labels: Vec<u32>,
        num_classes: u32,
    ) -> Result<Self, AnalyticsError> {
        let n = true_labels.len();
        for row in &predictions {
            shape("prediction row length", n, row.len())?;
        }
        let flat: Vec<u32> = predictions.concat();
        if let Some(&label) = flat.iter().chain(&true_labels).find(|&&l| l >= num_classes) {
            return Err(AnalyticsError::Label { label, num_classes });
        }
        Ok(Self {
            m: predictions.len(),
            n,
            predictions: flat,
            true_labels,
            num_classes,
        })
    }

    pub fn models(&self) -> usize {
        self.m
    }

    pub fn data(&self) -> usize {
        self.n
    }

    pub fn num_classes(&self) -> u32 {
        self.num_classes
    }

    pub fn prediction(&self, model: usize, datum: usize) -> u32 {
        self.predictions[model * self.n + datum]
    }

    pub fn true_label(&self, datum: usize) -> u32 {
        self.true_labels[datum]
    }

    pub fn true_labels(&self) -> &[u32] {
        &self.true_labels
    }

    fn is_wrong(&self, model: usize, datum: usize) -> bool {
        self.prediction(model, datum) != self.true_labels[datum]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureCount {
    pub feature: u32,
    pub data_count: usize,
}

fn data_counts(omega: &InteractionTensor) -> Vec<usize> {
    let df = omega.data_features();
    (0..df.cols())
        .map(|t| (0..df.rows()).filter(|&n| df.get(n, t)).count())
        .collect()
}

/// Number of data carrying each feature under any model (sum over models,
/// clip to 1, sum over data), most frequent first; ties by feature id.
pub fn feature_frequency(omega: &InteractionTensor) -> Vec<FeatureCount> {
    let mut out: Vec<FeatureCount> = data_counts(omega)
        .into_iter()
        .enumerate()
        .map(|(t, data_count)| FeatureCount {
            feature: t as u32,
            data_count,
        })
        .collect();
    out.sort_by(|a, b| b.data_count.cmp(&a.data_count).then(a.feature.cmp(&b.feature)));
    out
}

/// Fraction of models predicting each datum's true label.
pub fn ensemble_confidence(preds: &PredictionMatrix) -> Vec<f64> {
    (0..preds.n)
        .map(|n| {
            if preds.m == 0 {
                return 0.0;
            }
            let correct = (0..preds.m).filter(|&m| !preds.is_wrong(m, n)).count();
            correct as f64 / preds.m as f64
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DatumRecord {
    pub datum: usize,
    pub confidence: f64,
    pub n_features: usize,
}

fn check_preds(omega: &InteractionTensor, preds: &PredictionMatrix) -> Result<(), AnalyticsError> {
    shape("prediction data count", omega.n as usize, preds.n)
}

/// `(confidence, number of features)` for every datum.
pub fn confidence_feature_table(
    omega: &InteractionTensor,
    preds: &PredictionMatrix,
) -> Result<Vec<DatumRecord>, AnalyticsError> {
    check_preds(omega, preds)?;
    let df = omega.data_features();
    Ok(ensemble_confidence(preds)
        .into_iter()
        .enumerate()
        .map(|(datum, confidence)| DatumRecord {
            datum,
            confidence,
            n_features: df.row_count(datum),
        })
        .collect())
}

/// Per-feature densities of the fully-confident data and of everything else.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitDensity {
    /// Feature ids by global frequency rank (same order as
    /// [`feature_frequency`]); `high` and `low` follow this order.
    pub order: Vec<u32>,
    pub high: Vec<f64>,
    pub low: Vec<f64>,
    pub high_size: usize,
    pub low_size: usize,
    pub warnings: Vec<String>,
}

/// Splits data into confidence 1 and the rest, and normalizes each group's
/// feature counts by the group's total feature incidences.
pub fn split_feature_density(
    omega: &InteractionTensor,
    preds: &PredictionMatrix,
) -> Result<SplitDensity, AnalyticsError> {
    check_preds(omega, preds)?;
    let df = omega.data_features();
    let conf = ensemble_confidence(preds);
    let order: Vec<u32> = feature_frequency(omega).iter().map(|f| f.feature).collect();
    let t = df.cols();
    let mut high = vec![0usize; t];
    let mut low = vec![0usize; t];
    let (mut high_size, mut low_size) = (0, 0);
    for (n, &c) in conf.iter().enumerate() {
        let (counts, size) = if c == 1.0 {
            (&mut high, &mut high_size)
        } else {
            (&mut low, &mut low_size)
        };
        *size += 1;
        for (f, count) in counts.iter_mut().enumerate() {
            if df.get(n, f) {
                *count += 1;
            }
        }
    }
    let mut warnings = Vec::new();
    let mut normalize = |counts: &[usize], name: &str| -> Vec<f64> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            warnings.push(format!("{name}-confidence group has no feature incidences; density set to 0"));
            return vec![0.0; order.len()];
        }
        order
            .iter()
            .map(|&f| counts[f as usize] as f64 / total as f64)
            .collect()
    };
    let high = normalize(&high, "high");
    let low = normalize(&low, "low");
    Ok(SplitDensity {
        order,
        high,
        low,
        high_size,
        low_size,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FeatureCounts {
    pub feature: u32,
    pub data_count: usize,
    pub model_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataModelCounts {
    pub records: Vec<FeatureCounts>,
    /// Pearson correlation of data and model counts over features present in
    /// at least one datum; `None` when undefined.
    pub correlation: Option<f64>,
    pub warnings: Vec<String>,
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Data and model counts per feature, in feature-id order.
pub fn data_model_counts(omega: &InteractionTensor) -> DataModelCounts {
    let mf = omega.model_features();
    let records: Vec<FeatureCounts> = data_counts(omega)
        .into_iter()
        .enumerate()
        .map(|(t, data_count)| FeatureCounts {
            feature: t as u32,
            data_count,
            model_count: (0..mf.rows()).filter(|&m| mf.get(m, t)).count(),
        })
        .collect();
    let present: Vec<&FeatureCounts> = records.iter().filter(|r| r.data_count > 0).collect();
    let xs: Vec<f64> = present.iter().map(|r| r.data_count as f64).collect();
    let ys: Vec<f64> = present.iter().map(|r| r.model_count as f64).collect();
    let correlation = pearson(&xs, &ys);
    let mut warnings = Vec::new();
    if correlation.is_none() {
        warnings.push(
            "data/model count correlation undefined: fewer than 2 features or no variation".into(),
        );
    }
    DataModelCounts {
        records,
        correlation,
        warnings,
    }
}

/// What counts as a shared mistake.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MistakeMode {
    /// Both wrong with the same predicted label.
    #[default]
    Identical,
    /// Both wrong, whatever they predicted.
    Joint,
}

impl std::str::FromStr for MistakeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identical" => Ok(Self::Identical),
            "joint" => Ok(Self::Joint),
            other => Err(format!("unknown mistake mode {other:?} (expected identical or joint)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairRecord {
    pub model_i: usize,
    pub model_j: usize,
    pub shared_features: usize,
    /// Shared mistakes over the mean of the two error counts; `None` when
    /// neither model makes a mistake.
    pub shared_error: Option<f64>,
}

/// Shared features and normalized shared error for one model pair.
pub fn shared_error_pair(
    model_features: &BinaryMatrix,
    preds: &PredictionMatrix,
    mode: MistakeMode,
    i: usize,
    j: usize,
) -> PairRecord {
    let shared_features = (0..model_features.cols())
        .filter(|&t| model_features.get(i, t) && model_features.get(j, t))
        .count();
    let errors_i = (0..preds.n).filter(|&n| preds.is_wrong(i, n)).count();
    let errors_j = (0..preds.n).filter(|&n| preds.is_wrong(j, n)).count();
    let shared = (0..preds.n)
        .filter(|&n| preds.is_wrong(i, n) && preds.is_wrong(j, n))
        .filter(|&n| match mode {
            MistakeMode::Identical => preds.prediction(i, n) == preds.prediction(j, n),
            MistakeMode::Joint => true,
        })
        .count();
    let mean_errors = (errors_i + errors_j) as f64 / 2.0;
    PairRecord {
        model_i: i,
        model_j: j,
        shared_features,
        shared_error: (mean_errors > 0.0).then(|| shared as f64 / mean_errors),
    }
}

/// Records for every pair `i < j`.
pub fn shared_error_table(
    model_features: &BinaryMatrix,
    preds: &PredictionMatrix,
    mode: MistakeMode,
) -> Result<(Vec<PairRecord>, Vec<String>), AnalyticsError> {
    let m = preds.m;
    if m < 2 {
        return Err(AnalyticsError::TooFewModels(m));
    }
    shape("model feature rows", m, model_features.rows())?;
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            let r = shared_error_pair(model_features, preds, mode, i, j);
            if r.shared_error.is_none() {
                warnings.push(format!("models {i} and {j} make no mistakes; shared error undefined"));
            }
            records.push(r);
        }
    }
    Ok((records, warnings))
}

/// Dice overlap `2|a ∩ b| / (|a| + |b|)`; two empty sets give 0.
pub fn feature_similarity(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> f64 {
    let total = a.len() + b.len();
    if total == 0 {
        return 0.0;
    }
    2.0 * a.intersection(b).count() as f64 / total as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Neighbor {
    pub datum: usize,
    pub similarity: f64,
}

/// The `top_k` other data most similar to `index`, by descending similarity
/// then ascending index.
pub fn nearest_neighbors(
    data_features: &BinaryMatrix,
    index: usize,
    top_k: usize,
) -> Result<Vec<Neighbor>, AnalyticsError> {
    let n = data_features.rows();
    if index >= n {
        return Err(AnalyticsError::Index { index, len: n });
    }
    if top_k == 0 {
        return Err(AnalyticsError::ZeroTopK);
    }
    let query = data_features.row_set(index);
    let mut all: Vec<Neighbor> = (0..n)
        .filter(|&d| d != index)
        .map(|d| Neighbor {
            datum: d,
            similarity: feature_similarity(&query, &data_features.row_set(d)),
        })
        .collect();
    all.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then(a.datum.cmp(&b.datum))
    });
    all.truncate(top_k);
    Ok(all)
}

/// `counts[t][c]`: data of class `c` carrying feature `t`.
pub fn per_class_frequency(
    data_features: &BinaryMatrix,
    true_labels: &[u32],
    num_classes: u32,
) -> Result<Vec<Vec<usize>>, AnalyticsError> {
    shape("label count", data_features.rows(), true_labels.len())?;
    if let Some(&label) = true_labels.iter().find(|&&l| l >= num_classes) {
        return Err(AnalyticsError::Label { label, num_classes });
    }
    let mut counts = vec![vec![0usize; num_classes as usize]; data_features.cols()];
    for (n, &label) in true_labels.iter().enumerate() {
        for (t, row) in counts.iter_mut().enumerate() {
            if data_features.get(n, t) {
                row[label as usize] += 1;
            }
        }
    }
    Ok(counts)
}

// CSV renderings.

pub fn frequency_table(omega: &InteractionTensor) -> Table {
    let mut t = Table::new(["feature_id", "data_count"]);
    for f in feature_frequency(omega) {
        t.push(vec![f.feature.to_string(), f.data_count.to_string()]);
    }
    t
}

pub fn confidence_table(records: &[DatumRecord]) -> Table {
    let mut t = Table::new(["datum", "confidence", "n_features"]);
    for r in records {
        t.push(vec![r.datum.to_string(), num(r.confidence), r.n_features.to_string()]);
    }
    t
}

pub fn density_table(split: &SplitDensity) -> Table {
    let mut t = Table::new(["rank", "feature_id", "high_density", "low_density"]);
    for (rank, &f) in split.order.iter().enumerate() {
        t.push(vec![
            rank.to_string(),
            f.to_string(),
            num(split.high[rank]),
            num(split.low[rank]),
        ]);
    }
    t.warnings = split.warnings.clone();
    t
}

pub fn counts_table(counts: &DataModelCounts) -> Table {
    let mut t = Table::new(["feature_id", "data_count", "model_count"]);
    for r in &counts.records {
        t.push(vec![
            r.feature.to_string(),
            r.data_count.to_string(),
            r.model_count.to_string(),
        ]);
    }
    t.warnings = counts.warnings.clone();
    if let Some(c) = counts.correlation {
        t.warnings.insert(0, format!("pearson_correlation={}", num(c)));
    }
    t
}

pub fn shared_error_csv(records: &[PairRecord], warnings: &[String]) -> Table {
    let mut t = Table::new(["model_i", "model_j", "shared_features", "shared_error"]);
    for r in records {
        t.push(vec![
            r.model_i.to_string(),
            r.model_j.to_string(),
            r.shared_features.to_string(),
            r.shared_error.map(num).unwrap_or_default(),
        ]);
    }
    t.warnings = warnings.to_vec();
    t
}

pub fn neighbors_table(neighbors: &[Neighbor]) -> Table {
    let mut t = Table::new(["rank", "datum", "similarity"]);
    for (rank, nb) in neighbors.iter().enumerate() {
        t.push(vec![rank.to_string(), nb.datum.to_string(), num(nb.similarity)]);
    }
    t
}

pub fn per_class_table(counts: &[Vec<usize>], num_classes: u32) -> Table {
    let header = std::iter::once("feature_id".to_string())
        .chain((0..num_classes).map(|c| format!("class_{c}")));
    let mut t = Table::new(header);
    for (f, row) in counts.iter().enumerate() {
        t.push(
            std::iter::once(f.to_string())
                .chain(row.iter().map(usize::to_string))
                .collect(),
        );
    }
    t
}
