//! Design-matrix construction from snapshots.
//!
//! Columns follow the snapshot CSV schema order. Distribution metrics become
//! one numeric column each (or are dropped) according to a
//! [`DistributionPolicy`]; empty cells stay as [`MISSING`] until
//! [`impute_median`] fills them from training rows.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Distribution, Metric, MetricSnapshot};
use crate::matrix::{is_missing, Matrix, MISSING};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("row {row} ({project}): target `{target}` is missing")]
    MissingTarget {
        row: usize,
        project: String,
        target: TargetKind,
    },
    #[error("{metric}: weighted sum needs numeric labels, found `{label}`")]
    Policy { metric: Metric, label: String },
    #[error("inconsistent design matrix: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// The sqale index (code-smell remediation minutes).
    Maintainability,
    /// Bug remediation minutes.
    Reliability,
}

impl TargetKind {
    pub fn name(self) -> &'static str {
        match self {
            TargetKind::Maintainability => "maintainability",
            TargetKind::Reliability => "reliability",
        }
    }

    pub fn caption(self) -> &'static str {
        match self {
            TargetKind::Maintainability => "Maintainability remediation effort vs All Metrics",
            TargetKind::Reliability => "Reliability remediation effort vs All Metrics",
        }
    }

    pub fn of(self, snapshot: &MetricSnapshot) -> Option<f64> {
        match self {
            TargetKind::Maintainability => snapshot.sqale_index,
            TargetKind::Reliability => snapshot.reliability_remediation_effort,
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TargetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "maintainability" => Ok(TargetKind::Maintainability),
            "reliability" => Ok(TargetKind::Reliability),
            other => Err(format!("unsupported target `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionPolicy {
    /// Σ label × value; the language distribution falls back to `Total`.
    #[default]
    WeightedSum,
    /// Σ value.
    Total,
    /// Exclude distribution metrics from the matrix.
    Drop,
}

impl FromStr for DistributionPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "weighted_sum" | "weighted-sum" => Ok(DistributionPolicy::WeightedSum),
            "total" => Ok(DistributionPolicy::Total),
            "drop" => Ok(DistributionPolicy::Drop),
            other => Err(format!("unknown distribution policy `{other}`")),
        }
    }
}

/// Reduces one distribution cell to a scalar. `Ok(None)` means the feature is dropped.
pub fn reduce_distribution(
    dist: &Distribution,
    policy: DistributionPolicy,
    metric: Metric,
) -> Result<Option<f64>, FeatureError> {
    let total = || dist.entries().iter().map(|(_, v)| v).sum::<f64>();
    match policy {
        DistributionPolicy::Drop => Ok(None),
        DistributionPolicy::Total => Ok(Some(total())),
        DistributionPolicy::WeightedSum if metric == Metric::NclocLanguageDistribution => {
            Ok(Some(total()))
        }
        DistributionPolicy::WeightedSum => {
            let mut sum = 0.0;
            for (label, value) in dist.entries() {
                let bound: f64 = label.parse().map_err(|_| FeatureError::Policy {
                    metric,
                    label: label.clone(),
                })?;
                sum += bound * value;
            }
            Ok(Some(sum))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    feature_names: Vec<String>,
    rows: Matrix,
    target: Vec<f64>,
    target_kind: TargetKind,
    groups: Vec<String>,
}

impl DesignMatrix {
    pub fn new(
        feature_names: Vec<String>,
        rows: Matrix,
        target: Vec<f64>,
        target_kind: TargetKind,
        groups: Vec<String>,
    ) -> Result<Self, FeatureError> {
        if feature_names.len() != rows.cols() {
            return Err(FeatureError::Shape(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                rows.cols()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = feature_names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(FeatureError::Shape(format!("duplicate feature name `{dup}`")));
        }
        if target.len() != rows.rows() || groups.len() != rows.rows() {
            return Err(FeatureError::Shape(format!(
                "{} rows, {} targets, {} groups",
                rows.rows(),
                target.len(),
                groups.len()
            )));
        }
        if let Some(bad) = target.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::Shape(format!("target at row {bad} is not finite")));
        }
        Ok(DesignMatrix {
            feature_names,
            rows,
            target,
            target_kind,
            groups,
        })
    }

    /// Unnamed features `x0..x{P-1}`, every row in group `"all"`.
    pub fn from_xy(rows: Matrix, target: Vec<f64>) -> Result<Self, FeatureError> {
        let names = (0..rows.cols()).map(|i| format!("x{i}")).collect();
        let groups = vec!["all".to_owned(); rows.rows()];
        DesignMatrix::new(names, rows, target, TargetKind::Maintainability, groups)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn target_kind(&self) -> TargetKind {
        self.target_kind
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn n_rows(&self) -> usize {
        self.rows.rows()
    }

    pub fn n_features(&self) -> usize {
        self.rows.cols()
    }

    pub fn with_groups(mut self, groups: Vec<String>) -> Result<Self, FeatureError> {
        if groups.len() != self.n_rows() {
            return Err(FeatureError::Shape("group count differs from row count".into()));
        }
        self.groups = groups;
        Ok(self)
    }

    /// Keeps the listed columns, in the listed order.
    pub fn select_columns(&self, columns: &[usize]) -> DesignMatrix {
        DesignMatrix {
            feature_names: columns.iter().map(|&c| self.feature_names[c].clone()).collect(),
            rows: self.rows.select_columns(columns),
            target: self.target.clone(),
            target_kind: self.target_kind,
            groups: self.groups.clone(),
        }
    }

    pub fn without_column(&self, column: usize) -> DesignMatrix {
        let keep: Vec<usize> = (0..self.n_features()).filter(|&c| c != column).collect();
        self.select_columns(&keep)
    }

    pub fn select_rows(&self, indices: &[usize]) -> DesignMatrix {
        DesignMatrix {
            feature_names: self.feature_names.clone(),
            rows: self.rows.select_rows(indices),
            target: indices.iter().map(|&i| self.target[i]).collect(),
            target_kind: self.target_kind,
            groups: indices.iter().map(|&i| self.groups[i].clone()).collect(),
        }
    }
}

/// Feature names produced under `policy`, in column order.
pub fn feature_names(policy: DistributionPolicy) -> Vec<String> {
    Metric::ALL
        .iter()
        .filter(|m| !(m.is_distribution() && policy == DistributionPolicy::Drop))
        .map(|m| m.key().to_owned())
        .collect()
}

/// One row per snapshot, columns in schema order.
pub fn build_matrix(
    snapshots: &[MetricSnapshot],
    target_kind: TargetKind,
    policy: DistributionPolicy,
) -> Result<DesignMatrix, FeatureError> {
    if snapshots.is_empty() {
        return Err(FeatureError::Precondition("no snapshots".into()));
    }
    let names = feature_names(policy);
    let mut data = Vec::with_capacity(snapshots.len() * names.len());
    let mut target = Vec::with_capacity(snapshots.len());
    for (row, snap) in snapshots.iter().enumerate() {
        for metric in Metric::ALL {
            if !metric.is_distribution() {
                data.push(snap.metric(metric).unwrap_or(MISSING));
                continue;
            }
            if policy == DistributionPolicy::Drop {
                continue;
            }
            let value = match snap.distribution(metric) {
                Some(d) => reduce_distribution(d, policy, metric)?.unwrap_or(MISSING),
                None => MISSING,
            };
            data.push(value);
        }
        target.push(target_kind.of(snap).ok_or_else(|| FeatureError::MissingTarget {
            row,
            project: snap.project_id.clone(),
            target: target_kind,
        })?);
    }
    let rows = Matrix::new(snapshots.len(), names.len(), data)
        .map_err(|e| FeatureError::Shape(e.to_string()))?;
    let groups = snapshots.iter().map(|s| s.project_id.clone()).collect();
    DesignMatrix::new(names, rows, target, target_kind, groups)
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    })
}

/// Median of each column over `rows`, ignoring missing cells; 0 for a column
/// with no observed value.
pub fn column_medians(x: &Matrix, rows: &[usize]) -> Vec<f64> {
    (0..x.cols())
        .map(|c| {
            let mut observed: Vec<f64> = rows
                .iter()
                .map(|&r| x.get(r, c))
                .filter(|v| !is_missing(*v))
                .collect();
            median(&mut observed).unwrap_or(0.0)
        })
        .collect()
}

/// Replaces every missing cell of column `c` with `fills[c]`.
pub fn fill_missing(x: &Matrix, fills: &[f64]) -> Matrix {
    debug_assert_eq!(fills.len(), x.cols());
    let mut filled = x.clone();
    for r in 0..filled.rows() {
        for (c, fill) in fills.iter().enumerate() {
            if is_missing(filled.get(r, c)) {
                filled.set(r, c, *fill);
            }
        }
    }
    filled
}

/// Fills every missing cell with its column median over `train_rows` only.
/// A column with no observed training value is filled with 0.
pub fn impute_median(matrix: &DesignMatrix, train_rows: &[usize]) -> DesignMatrix {
    if !matrix.rows.has_missing() {
        return matrix.clone();
    }
    let fills = column_medians(&matrix.rows, train_rows);
    DesignMatrix {
        rows: fill_missing(&matrix.rows, &fills),
        ..matrix.clone()
    }
}
