//! Drop-column importance and the exhaustive feature-subset search it is
//! checked against.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{cross_validate, EvalError, FoldPlan, ReportRow};
use crate::features::DesignMatrix;
use crate::regress::{RegressorConfig, RegressorKind};

pub const DEFAULT_MAX_P: usize = 12;
pub const BASELINE_LABEL: &str = "__baseline__";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DropColError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("exhaustive search over {p} features needs 2^{p} - 1 = {evaluations} cross-validations; limit is {max_p} features")]
    Guard { p: usize, max_p: usize, evaluations: u128 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetScore {
    pub mae: f64,
    pub r2: f64,
}

impl From<&ReportRow> for SubsetScore {
    fn from(r: &ReportRow) -> Self {
        SubsetScore { mae: r.mae, r2: r.r2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    /// mae without the feature − baseline mae; positive means the feature helps.
    pub mae_delta: f64,
    /// baseline r2 − r2 without the feature; positive means the feature helps.
    pub r2_delta: f64,
    /// Scores of the matrix with this feature removed.
    pub without: SubsetScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub kind: RegressorKind,
    pub baseline: SubsetScore,
    /// One entry per feature, in matrix column order.
    pub entries: Vec<ImportanceEntry>,
    pub k: usize,
    pub seed: u64,
}

/// Retrains once per feature with that column removed, under the same plan
/// and seeds as the full-matrix baseline.
pub fn drop_column_importance(
    config: &RegressorConfig,
    matrix: &DesignMatrix,
    plan: &FoldPlan,
) -> Result<ImportanceReport, DropColError> {
    let p = matrix.n_features();
    if p < 2 {
        return Err(DropColError::Precondition(format!(
            "drop-column needs at least 2 features, got {p}"
        )));
    }
    let baseline = SubsetScore::from(&cross_validate(config, matrix, plan)?);
    let entries = (0..p)
        .into_par_iter()
        .map(|j| {
            let without = SubsetScore::from(&cross_validate(config, &matrix.without_column(j), plan)?);
            Ok(ImportanceEntry {
                feature: matrix.feature_names()[j].clone(),
                mae_delta: without.mae - baseline.mae,
                r2_delta: baseline.r2 - without.r2,
                without,
            })
        })
        .collect::<Result<Vec<_>, DropColError>>()?;
    Ok(ImportanceReport {
        kind: config.kind,
        baseline,
        entries,
        k: plan.k(),
        seed: plan.seed(),
    })
}

impl ImportanceReport {
    /// `feature,mae_delta,r2_delta`; the first row carries the baseline mae and r2.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,mae_delta,r2_delta\n");
        let _ = writeln!(out, "{BASELINE_LABEL},{},{}", self.baseline.mae, self.baseline.r2);
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{}", e.feature, e.mae_delta, e.r2_delta);
        }
        out
    }
}

pub type SubsetMap = BTreeMap<Vec<String>, SubsetScore>;

/// Cross-validates every non-empty feature subset (2^P − 1 fits of the plan).
/// Keys are the subset's feature names sorted ascending; columns keep matrix
/// order when fitting.
pub fn exhaustive_search(
    config: &RegressorConfig,
    matrix: &DesignMatrix,
    plan: &FoldPlan,
    max_p: usize,
) -> Result<SubsetMap, DropColError> {
    let p = matrix.n_features();
    if p > max_p || p >= 64 {
        return Err(DropColError::Guard {
            p,
            max_p,
            evaluations: (1u128 << p.min(127)) - 1,
        });
    }
    if p == 0 {
        return Err(DropColError::Precondition("matrix has no features".into()));
    }
    let scored = (1u64..(1u64 << p))
        .into_par_iter()
        .map(|mask| {
            let columns: Vec<usize> = (0..p).filter(|j| mask >> j & 1 == 1).collect();
            let sub = matrix.select_columns(&columns);
            let score = SubsetScore::from(&cross_validate(config, &sub, plan)?);
            let mut key = sub.feature_names().to_vec();
            key.sort();
            Ok((key, score))
        })
        .collect::<Result<Vec<_>, DropColError>>()?;
    Ok(scored.into_iter().collect())
}

/// `features,n_features,mae,r2` with subset members joined by `|`, in key order.
pub fn subsets_to_csv(map: &SubsetMap) -> String {
    let mut out = String::from("features,n_features,mae,r2\n");
    for (key, s) in map {
        let _ = writeln!(out, "{},{},{},{}", key.join("|"), key.len(), s.mae, s.r2);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{make_folds, Grouping};
    use crate::matrix::Matrix;

    fn fixture(y_of: impl Fn(&[f64]) -> f64, p: usize) -> DesignMatrix {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| (0..p).map(|j| ((i * (j + 3) * 7 + j) % 23) as f64 + 0.1 * i as f64).collect())
            .collect();
        let y = rows.iter().map(|r| y_of(r)).collect();
        DesignMatrix::from_xy(Matrix::from_rows(&rows).unwrap(), y).unwrap()
    }

    #[test]
    fn only_the_informative_feature_matters() {
        let m = fixture(|r| 3.0 * r[0], 3);
        let plan = make_folds(40, 5, 2, Grouping::RowShuffle, None).unwrap();
        let rep = drop_column_importance(&RegressorConfig::new(RegressorKind::LinearRegression, 0), &m, &plan).unwrap();
        assert_eq!(rep.entries.len(), 3);
        assert!(rep.entries[0].mae_delta > 1.0);
        assert!(rep.entries[1].mae_delta.abs() < 1e-6);
        assert!(rep.entries[2].mae_delta.abs() < 1e-6);
        let csv = rep.to_csv();
        assert!(csv.lines().nth(1).unwrap().starts_with("__baseline__,"));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn duplicated_column_twins_compensate() {
        let base = fixture(|r| 2.0 * r[0] + r[1], 2);
        let x = base.rows().select_columns(&[0, 0, 1]);
        let m = DesignMatrix::from_xy(x, base.target().to_vec()).unwrap();
        let plan = make_folds(40, 4, 9, Grouping::RowShuffle, None).unwrap();
        let rep = drop_column_importance(&RegressorConfig::new(RegressorKind::LinearRegression, 0), &m, &plan).unwrap();
        assert!(rep.entries[0].mae_delta.abs() < 1e-6);
        assert!(rep.entries[1].mae_delta.abs() < 1e-6);
        assert!(rep.entries[2].mae_delta > 0.1);
    }

    #[test]
    fn subset_counts_and_guard() {
        let cfg = RegressorConfig::new(RegressorKind::LinearRegression, 0);
        let m2 = fixture(|r| r[0] + r[1], 2);
        let plan = make_folds(40, 4, 1, Grouping::RowShuffle, None).unwrap();
        assert_eq!(exhaustive_search(&cfg, &m2, &plan, DEFAULT_MAX_P).unwrap().len(), 3);
        let m1 = m2.select_columns(&[0]);
        assert_eq!(exhaustive_search(&cfg, &m1, &plan, DEFAULT_MAX_P).unwrap().len(), 1);
        assert!(drop_column_importance(&cfg, &m1, &plan).is_err());
        let m13 = fixture(|r| r[0], 13);
        let err = exhaustive_search(&cfg, &m13, &plan, DEFAULT_MAX_P).unwrap_err();
        assert!(err.to_string().contains("8191"), "{err}");
    }

    #[test]
    fn drop_column_matches_exhaustive_subsets() {
        let m = fixture(|r| r[0] * r[1] - 3.0 * r[2] + r[3].sqrt(), 4);
        let plan = make_folds(40, 4, 3, Grouping::RowShuffle, None).unwrap();
        let cfg = RegressorConfig::new(RegressorKind::ExtraTrees, 5).with("n_estimators", 10);
        let rep = drop_column_importance(&cfg, &m, &plan).unwrap();
        let all = exhaustive_search(&cfg, &m, &plan, DEFAULT_MAX_P).unwrap();
        assert_eq!(all.len(), 15);
        let mut full: Vec<String> = m.feature_names().to_vec();
        full.sort();
        assert_eq!(all[&full].mae.to_bits(), rep.baseline.mae.to_bits());
        for (j, e) in rep.entries.iter().enumerate() {
            let mut key: Vec<String> = m.without_column(j).feature_names().to_vec();
            key.sort();
            assert_eq!(all[&key].mae.to_bits(), e.without.mae.to_bits());
            assert_eq!(all[&key].r2.to_bits(), e.without.r2.to_bits());
        }
    }
}
