//! Cross-validated scoring: fold plans, per-regressor MAE/R² rows and the
//! report renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{impute_median, DesignMatrix, TargetKind};
use crate::regress::{fit, RegressError, RegressorConfig, RegressorKind};
use crate::rng::{derive_seed, rng_from_seed};

pub const DEFAULT_FOLDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("undefined score: {0}")]
    UndefinedScore(String),
    #[error("fold plan: {0}")]
    Fold(String),
    #[error(transparent)]
    Regress(#[from] RegressError),
}

fn check_pair(actual: &[f64], predicted: &[f64], min_len: usize) -> Result<(), EvalError> {
    if actual.len() != predicted.len() {
        return Err(EvalError::Precondition(format!(
            "{} actual values but {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.len() < min_len {
        return Err(EvalError::Precondition(format!(
            "need at least {min_len} values, got {}",
            actual.len()
        )));
    }
    if actual.iter().chain(predicted).any(|v| !v.is_finite()) {
        return Err(EvalError::Precondition("non-finite value".into()));
    }
    Ok(())
}

/// Σ|actual − predicted| / n.
pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    check_pair(actual, predicted, 1)?;
    let total: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).abs()).sum();
    Ok(total / actual.len() as f64)
}

/// 1 − SS_res / SS_tot. Negative when worse than predicting the mean.
pub fn r_squared(actual: &[f64], predicted: &[f64]) -> Result<f64, EvalError> {
    check_pair(actual, predicted, 2)?;
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(EvalError::UndefinedScore("actual values have zero variance".into()));
    }
    let ss_res: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    #[default]
    RowShuffle,
    ByProject,
}

impl FromStr for Grouping {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "row" | "row_shuffle" => Ok(Grouping::RowShuffle),
            "project" | "by_project" => Ok(Grouping::ByProject),
            other => Err(format!("unknown grouping `{other}` (expected row or project)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    k: usize,
    assignments: Vec<usize>,
    seed: u64,
    grouping: Grouping,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn grouping(&self) -> Grouping {
        self.grouping
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    /// Held-out rows of fold `f`, ascending.
    pub fn test_rows(&self, f: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignments[i] == f).collect()
    }

    /// Training rows of fold `f`, ascending.
    pub fn train_rows(&self, f: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignments[i] != f).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    /// Seed handed to the regressor trained on fold `f`.
    pub fn fold_seed(&self, f: usize, config_seed: u64) -> u64 {
        derive_seed(derive_seed(self.seed, f as u64), config_seed)
    }
}

/// Assigns `n` rows to `k` folds.
///
/// `RowShuffle` deals a seeded permutation round-robin. `ByProject` visits
/// groups by descending size (ties in seeded order of the sorted labels) and
/// puts each into the fold with the fewest rows, lowest index first, so the
/// plan depends on the group labels and not on row order.
pub fn make_folds(
    n: usize,
    k: usize,
    seed: u64,
    grouping: Grouping,
    groups: Option<&[String]>,
) -> Result<FoldPlan, EvalError> {
    if k < 2 {
        return Err(EvalError::Fold(format!("k must be at least 2, got {k}")));
    }
    let mut rng = rng_from_seed(seed);
    let assignments = match grouping {
        Grouping::RowShuffle => {
            if n < k {
                return Err(EvalError::Fold(format!("{n} rows cannot fill {k} folds")));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut a = vec![0; n];
            for (pos, &row) in order.iter().enumerate() {
                a[row] = pos % k;
            }
            a
        }
        Grouping::ByProject => {
            let groups = groups.ok_or_else(|| EvalError::Fold("project grouping needs group labels".into()))?;
            if groups.len() != n {
                return Err(EvalError::Fold(format!("{} group labels for {n} rows", groups.len())));
            }
            let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, g) in groups.iter().enumerate() {
                members.entry(g.as_str()).or_default().push(i);
            }
            if members.len() < k {
                return Err(EvalError::Fold(format!(
                    "{} distinct projects cannot fill {k} folds",
                    members.len()
                )));
            }
            let mut labels: Vec<&str> = members.keys().copied().collect();
            labels.shuffle(&mut rng);
            labels.sort_by_key(|l| std::cmp::Reverse(members[l].len()));
            let mut load = vec![0usize; k];
            let mut a = vec![0; n];
            for label in labels {
                let fold = (0..k).min_by_key(|&f| (load[f], f)).expect("k >= 2");
                for &row in &members[label] {
                    a[row] = fold;
                }
                load[fold] += members[label].len();
            }
            a
        }
    };
    Ok(FoldPlan {
        k,
        assignments,
        seed,
        grouping,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub mae: f64,
    /// Absent when the fold's held-out targets have zero variance.
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub kind: RegressorKind,
    pub mae: f64,
    pub mae_std: f64,
    pub r2: f64,
    pub r2_std: f64,
    pub folds: Vec<FoldScore>,
}

impl ReportRow {
    /// Folds that contributed to the R² columns.
    pub fn r2_folds(&self) -> usize {
        self.folds.iter().filter(|f| f.r2.is_some()).count()
    }
}

/// Mean and unbiased (n − 1) standard deviation; a single value has std 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn score_fold(
    config: &RegressorConfig,
    matrix: &DesignMatrix,
    plan: &FoldPlan,
    f: usize,
) -> Result<FoldScore, EvalError> {
    let train = plan.train_rows(f);
    let test = plan.test_rows(f);
    let filled = impute_median(matrix, &train);
    let train_m = filled.select_rows(&train);
    let test_m = filled.select_rows(&test);
    let cfg = config.clone().with_seed(plan.fold_seed(f, config.seed));
    let model = fit(&cfg, train_m.rows(), train_m.target(), Some(matrix.feature_names()))?;
    let predicted = model.predict(test_m.rows())?;
    let actual = test_m.target();
    let fold_mae = mae(actual, &predicted)?;
    let r2 = match r_squared(actual, &predicted) {
        Ok(v) => Some(v),
        Err(EvalError::UndefinedScore(_)) => {
            log::warn!("{}: fold {f} has constant held-out targets; excluded from R2", config.kind);
            None
        }
        Err(EvalError::Precondition(_)) if actual.len() == 1 => {
            log::warn!("{}: fold {f} holds a single row; excluded from R2", config.kind);
            None
        }
        Err(e) => return Err(e),
    };
    Ok(FoldScore { mae: fold_mae, r2 })
}

/// Scores `config` on every fold of `plan`. Each fold imputes from its own
/// training rows and trains with a seed derived from the plan seed and fold index.
pub fn cross_validate(
    config: &RegressorConfig,
    matrix: &DesignMatrix,
    plan: &FoldPlan,
) -> Result<ReportRow, EvalError> {
    if plan.n() != matrix.n_rows() {
        return Err(EvalError::Precondition(format!(
            "plan covers {} rows, matrix has {}",
            plan.n(),
            matrix.n_rows()
        )));
    }
    let folds = (0..plan.k())
        .into_par_iter()
        .map(|f| score_fold(config, matrix, plan, f))
        .collect::<Result<Vec<_>, _>>()?;

    let maes: Vec<f64> = folds.iter().map(|f| f.mae).collect();
    let r2s: Vec<f64> = folds.iter().filter_map(|f| f.r2).collect();
    if r2s.is_empty() {
        return Err(EvalError::UndefinedScore(format!(
            "{}: no fold has held-out targets with nonzero variance",
            config.kind
        )));
    }
    let (mae, mae_std) = mean_std(&maes);
    let (r2, r2_std) = mean_std(&r2s);
    Ok(ReportRow {
        kind: config.kind,
        mae,
        mae_std,
        r2,
        r2_std,
        folds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub target_kind: TargetKind,
    pub k: usize,
    pub seed: u64,
    pub grouping: Grouping,
    pub rows: Vec<ReportRow>,
}

/// Cross-validates every config on the same plan; rows keep config order.
pub fn evaluate_all(
    configs: &[RegressorConfig],
    matrix: &DesignMatrix,
    plan: &FoldPlan,
) -> Result<EvalReport, EvalError> {
    if configs.is_empty() {
        return Err(EvalError::Precondition("no regressors requested".into()));
    }
    let rows = configs
        .par_iter()
        .map(|c| cross_validate(c, matrix, plan))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport {
        target_kind: matrix.target_kind(),
        k: plan.k(),
        seed: plan.seed(),
        grouping: plan.grouping(),
        rows,
    })
}

impl EvalReport {
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "### {}\n", self.target_kind.caption());
        out.push_str("| Regressor | MAE | MAE_std | R2 | R2_std |\n");
        out.push_str("|---|---:|---:|---:|---:|\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "| {} | {:.3} | {:.3} | {:.3} | {:.3} |",
                r.kind.display_name(),
                r.mae,
                r.mae_std,
                r.r2,
                r.r2_std
            );
        }
        out
    }

    /// Full-precision rows; `r2_folds` counts folds that entered the R² columns.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("regressor,mae,mae_std,r2,r2_std,r2_folds\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.kind.key(),
                r.mae,
                r.mae_std,
                r.r2,
                r.r2_std,
                r.r2_folds()
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use proptest::prelude::*;

    fn linear_matrix(n: usize) -> DesignMatrix {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, ((i * 7) % 11) as f64]).collect();
        let y = rows.iter().map(|r| 4.0 + 2.0 * r[0] - 0.5 * r[1]).collect();
        DesignMatrix::from_xy(Matrix::from_rows(&rows).unwrap(), y).unwrap()
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0, 10.0], &[5.0, 5.0]).unwrap(), 5.0);
        assert_eq!(mae(&[-2.0], &[2.0]).unwrap(), 4.0);
        assert!(mae(&[], &[]).is_err());
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn r2_examples() {
        let a = [3.0, 1.0, 4.0, 1.0, 5.0];
        assert_eq!(r_squared(&a, &a).unwrap(), 1.0);
        let m = a.iter().sum::<f64>() / 5.0;
        assert_eq!(r_squared(&a, &[m; 5]).unwrap(), 0.0);
        assert_eq!(r_squared(&[0.0, 1.0, 2.0], &[2.0, 1.0, 0.0]).unwrap(), -3.0);
        assert!(matches!(r_squared(&[2.0, 2.0], &[1.0, 2.0]), Err(EvalError::UndefinedScore(_))));
    }

    #[test]
    fn fold_examples() {
        let p = make_folds(10, 10, 3, Grouping::RowShuffle, None).unwrap();
        assert_eq!(p.fold_sizes(), vec![1; 10]);
        let a = make_folds(4, 2, 9, Grouping::RowShuffle, None).unwrap();
        assert_eq!(a, make_folds(4, 2, 9, Grouping::RowShuffle, None).unwrap());

        let groups: Vec<String> = ["A", "A", "B", "B", "C", "C"].iter().map(|s| s.to_string()).collect();
        let p = make_folds(6, 3, 1, Grouping::ByProject, Some(&groups)).unwrap();
        assert_eq!(p.fold_sizes(), vec![2, 2, 2]);
        for pair in p.assignments().chunks(2) {
            assert_eq!(pair[0], pair[1]);
        }

        assert!(make_folds(5, 1, 0, Grouping::RowShuffle, None).is_err());
        assert!(make_folds(3, 4, 0, Grouping::RowShuffle, None).is_err());
        assert!(make_folds(6, 4, 0, Grouping::ByProject, Some(&groups)).is_err());
        assert!(make_folds(6, 2, 0, Grouping::ByProject, None).is_err());
    }

    #[test]
    fn perfect_linear_cv() {
        let m = linear_matrix(40);
        let plan = make_folds(40, 5, 42, Grouping::RowShuffle, None).unwrap();
        let row = cross_validate(&RegressorConfig::new(RegressorKind::LinearRegression, 0), &m, &plan).unwrap();
        assert!(row.mae < 1e-9, "{}", row.mae);
        assert!((row.r2 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mean_predictor_scores_non_positive() {
        let n = 30;
        let mut rng = rng_from_seed(77);
        let mut y: Vec<f64> = (0..n).map(|i| (i * i % 17) as f64).collect();
        y.shuffle(&mut rng);
        let x = Matrix::from_rows(&(0..n).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let m = DesignMatrix::from_xy(x, y).unwrap();
        let plan = make_folds(n, 5, 1, Grouping::RowShuffle, None).unwrap();
        let cfg = RegressorConfig::new(RegressorKind::DecisionTree, 0).with("min_samples_leaf", n);
        let row = cross_validate(&cfg, &m, &plan).unwrap();
        for f in &row.folds {
            assert!(f.r2.unwrap() <= 0.0, "{f:?}");
        }
    }

    #[test]
    fn mirrored_folds_have_zero_std() {
        let base = linear_matrix(10);
        let rows = base.rows().vstack(base.rows()).unwrap();
        let mut y = base.target().to_vec();
        y.extend_from_slice(base.target());
        let y: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + ((i % 10) as f64).sin()).collect();
        let m = DesignMatrix::from_xy(rows, y).unwrap();
        let plan = FoldPlan {
            k: 2,
            assignments: (0..20).map(|i| usize::from(i >= 10)).collect(),
            seed: 0,
            grouping: Grouping::RowShuffle,
        };
        let row = cross_validate(&RegressorConfig::new(RegressorKind::LinearRegression, 0), &m, &plan).unwrap();
        assert_eq!(row.folds[0], row.folds[1]);
        assert_eq!(row.mae_std, 0.0);
    }

    #[test]
    fn report_is_reproducible_and_ordered() {
        let m = linear_matrix(30);
        let plan = make_folds(30, 3, 5, Grouping::RowShuffle, None).unwrap();
        let cfg = RegressorConfig::new(RegressorKind::RandomForest, 1).with("n_estimators", 8);
        let configs = vec![cfg.clone(), RegressorConfig::new(RegressorKind::LinearRegression, 1), cfg];
        let a = evaluate_all(&configs, &m, &plan).unwrap();
        let b = evaluate_all(&configs, &m, &plan).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.to_markdown(), b.to_markdown());
        assert_eq!(a.rows[0], a.rows[2]);
        assert_eq!(a.rows[1].kind, RegressorKind::LinearRegression);
        assert!(evaluate_all(&[], &m, &plan).is_err());
    }

    #[test]
    fn markdown_layout() {
        let m = linear_matrix(20);
        let plan = make_folds(20, 2, 5, Grouping::RowShuffle, None).unwrap();
        let r = evaluate_all(&[RegressorConfig::new(RegressorKind::LinearRegression, 0)], &m, &plan).unwrap();
        let md = r.to_markdown();
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines[2], "| Regressor | MAE | MAE_std | R2 | R2_std |");
        assert!(lines[4].starts_with("| Linear Regression | 0.000 |"));
    }

    fn streaming_mae(a: &[f64], p: &[f64]) -> f64 {
        let mut m = 0.0;
        for (i, (x, y)) in a.iter().zip(p).enumerate() {
            m += ((x - y).abs() - m) / (i + 1) as f64;
        }
        m
    }

    fn streaming_r2(a: &[f64], p: &[f64]) -> f64 {
        let (mut mean, mut m2, mut sse) = (0.0, 0.0, 0.0);
        for (i, (x, y)) in a.iter().zip(p).enumerate() {
            let d = x - mean;
            mean += d / (i + 1) as f64;
            m2 += d * (x - mean);
            sse += (x - y) * (x - y);
        }
        1.0 - sse / m2
    }

    proptest! {
        #[test]
        fn scores_match_streaming_oracle(
            pairs in proptest::collection::vec((-1e4f64..1e4, -1e4f64..1e4), 2..1000)
        ) {
            let (a, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let m = mae(&a, &p).unwrap();
            prop_assert!((m - streaming_mae(&a, &p)).abs() <= 1e-9 * m.max(1.0));
            let r = r_squared(&a, &p).unwrap();
            let o = streaming_r2(&a, &p);
            prop_assert!((r - o).abs() <= 1e-9 * r.abs().max(1.0), "{} vs {}", r, o);
        }

        #[test]
        fn every_row_tested_once(n in 2usize..200, k in 2usize..12, seed in any::<u64>(), by_project in any::<bool>()) {
            let groups: Vec<String> = (0..n).map(|i| format!("p{}", i % 13)).collect();
            let grouping = if by_project { Grouping::ByProject } else { Grouping::RowShuffle };
            let Ok(plan) = make_folds(n, k, seed, grouping, Some(&groups)) else {
                return Ok(());
            };
            let mut seen = vec![0; n];
            for f in 0..k {
                let test = plan.test_rows(f);
                prop_assert!(!test.is_empty());
                for r in test {
                    seen[r] += 1;
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            if !by_project {
                let sizes = plan.fold_sizes();
                prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            } else {
                for i in 0..n {
                    for j in 0..n {
                        if groups[i] == groups[j] {
                            prop_assert_eq!(plan.assignments()[i], plan.assignments()[j]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn project_plan_ignores_row_order() {
        let groups: Vec<String> = (0..24).map(|i| format!("g{}", i % 6)).collect();
        let perm: Vec<usize> = (0..24).rev().collect();
        let permuted: Vec<String> = perm.iter().map(|&i| groups[i].clone()).collect();
        let a = make_folds(24, 3, 8, Grouping::ByProject, Some(&groups)).unwrap();
        let b = make_folds(24, 3, 8, Grouping::ByProject, Some(&permuted)).unwrap();
        for (new_pos, &old) in perm.iter().enumerate() {
            assert_eq!(b.assignments()[new_pos], a.assignments()[old]);
        }

        let m = linear_matrix(24).with_groups(groups).unwrap();
        let pm = m.select_rows(&perm);
        let cfg = RegressorConfig::new(RegressorKind::LinearRegression, 0);
        let ra = cross_validate(&cfg, &m, &a).unwrap();
        let rb = cross_validate(&cfg, &pm, &b).unwrap();
        assert!((ra.mae - rb.mae).abs() < 1e-9);
        assert!((ra.r2 - rb.r2).abs() < 1e-9);
    }
}
