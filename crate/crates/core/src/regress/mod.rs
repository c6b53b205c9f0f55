//! The eight regression families behind one fit/predict contract.
//!
//! A [`RegressorConfig`] is a kind, a fully resolved hyperparameter map and a
//! seed. [`fit`] validates the map, trains, and returns an immutable
//! [`FittedModel`] that can be saved with [`FittedModel::to_json`].
//!
//! Defaults (all overridable; see [`RegressorConfig::new`]):
//!
//! | kind | defaults |
//! |---|---|
//! | `linear_regression` | `fit_intercept = true` |
//! | `decision_tree` | `max_depth = 0` (unbounded), `min_samples_leaf = 1`, `max_features = 0` (all), `threshold_mode = "best"` |
//! | `random_forest` | `n_estimators = 100`, `bootstrap = true`, `max_features = 0` (⌈P/3⌉), `threshold_mode = "best"` |
//! | `extra_trees` | `n_estimators = 100`, `bootstrap = false`, `max_features = 0` (P), `threshold_mode = "random"` |
//! | `bagging` | `n_estimators = 100`, `bootstrap = true`, `max_features = 0` (P), `threshold_mode = "best"` |
//! | `gradient_boost` | `n_estimators = 100`, `learning_rate = 0.1`, `max_depth = 3`, `leaf_estimate = "median"` |
//! | `adaboost` | `n_estimators = 50`, `learning_rate = 1.0`, `max_depth = 3`, `loss = "linear"` |
//! | `svm` | `c = 1.0`, `epsilon = 0.1`, `max_iter = 1000000`, `tol = 0.001`, `standardize = true` |

pub mod adaboost;
pub mod boost;
pub mod forest;
pub mod linear;
pub mod svr;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
use adaboost::{fit_adaboost, AdaBoostModel, AdaBoostParams, AdaLoss};
use boost::{fit_gradient_boost, BoostParams, GradientBoostModel, LeafEstimate};
use forest::{fit_forest, Forest, ForestParams};
use linear::{fit_linear, LinearModel};
use svr::{fit_svr, SvrModel, SvrParams};
use tree::{fit_cart, RegressionTree, ThresholdMode, TreeParams};

pub use tree::fit_cart as fit_tree;

pub const MODEL_FORMAT: &str = "debtcast-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegressError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("model format: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressorKind {
    LinearRegression,
    RandomForest,
    GradientBoost,
    ExtraTrees,
    DecisionTree,
    Bagging,
    AdaBoost,
    Svm,
}

impl RegressorKind {
    /// Report order.
    pub const ALL: [RegressorKind; 8] = [
        RegressorKind::LinearRegression,
        RegressorKind::RandomForest,
        RegressorKind::GradientBoost,
        RegressorKind::ExtraTrees,
        RegressorKind::DecisionTree,
        RegressorKind::Bagging,
        RegressorKind::AdaBoost,
        RegressorKind::Svm,
    ];

    pub fn key(self) -> &'static str {
        match self {
            RegressorKind::LinearRegression => "linear_regression",
            RegressorKind::RandomForest => "random_forest",
            RegressorKind::GradientBoost => "gradient_boost",
            RegressorKind::ExtraTrees => "extra_trees",
            RegressorKind::DecisionTree => "decision_tree",
            RegressorKind::Bagging => "bagging",
            RegressorKind::AdaBoost => "adaboost",
            RegressorKind::Svm => "svm",
        }
    }

    /// Row label in markdown reports.
    pub fn display_name(self) -> &'static str {
        match self {
            RegressorKind::LinearRegression => "Linear Regression",
            RegressorKind::RandomForest => "Random Forest",
            RegressorKind::GradientBoost => "Gradient Boost",
            RegressorKind::ExtraTrees => "Extra Trees",
            RegressorKind::DecisionTree => "Decision Trees",
            RegressorKind::Bagging => "Bagging",
            RegressorKind::AdaBoost => "AdaBoost",
            RegressorKind::Svm => "SVM",
        }
    }

    pub fn is_tree_ensemble(self) -> bool {
        matches!(
            self,
            RegressorKind::RandomForest | RegressorKind::ExtraTrees | RegressorKind::Bagging
        )
    }
}

impl fmt::Display for RegressorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for RegressorKind {
    type Err = RegressError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        let alias = match norm.as_str() {
            "linear" | "lr" => "linear_regression",
            "rf" => "random_forest",
            "gb" | "gbm" => "gradient_boost",
            "et" => "extra_trees",
            "dt" | "tree" | "decision_trees" => "decision_tree",
            "svr" => "svm",
            other => other,
        };
        RegressorKind::ALL
            .into_iter()
            .find(|k| k.key() == alias)
            .ok_or_else(|| RegressError::Config(format!("unknown regressor `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

impl From<bool> for ParamValue {
    fn from(v: bool) -> Self {
        ParamValue::Bool(v)
    }
}
impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}
impl From<i32> for ParamValue {
    fn from(v: i32) -> Self {
        ParamValue::Int(i64::from(v))
    }
}
impl From<usize> for ParamValue {
    fn from(v: usize) -> Self {
        ParamValue::Int(v as i64)
    }
}
impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Float(v)
    }
}
impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Text(v.to_owned())
    }
}

pub type Hyperparameters = BTreeMap<String, ParamValue>;

fn defaults(kind: RegressorKind) -> Hyperparameters {
    let mut h = Hyperparameters::new();
    let mut put = |k: &str, v: ParamValue| {
        h.insert(k.to_owned(), v);
    };
    let tree_common = |put: &mut dyn FnMut(&str, ParamValue), depth: i64| {
        put("max_depth", depth.into());
        put("min_samples_leaf", 1.into());
    };
    match kind {
        RegressorKind::LinearRegression => put("fit_intercept", true.into()),
        RegressorKind::DecisionTree => {
            tree_common(&mut put, 0);
            put("max_features", 0.into());
            put("threshold_mode", "best".into());
        }
        RegressorKind::RandomForest | RegressorKind::ExtraTrees | RegressorKind::Bagging => {
            tree_common(&mut put, 0);
            put("n_estimators", 100.into());
            put("max_features", 0.into());
            put("bootstrap", (kind != RegressorKind::ExtraTrees).into());
            put(
                "threshold_mode",
                if kind == RegressorKind::ExtraTrees { "random" } else { "best" }.into(),
            );
        }
        RegressorKind::GradientBoost => {
            tree_common(&mut put, 3);
            put("n_estimators", 100.into());
            put("learning_rate", 0.1.into());
            put("leaf_estimate", "median".into());
        }
        RegressorKind::AdaBoost => {
            put("max_depth", 3.into());
            put("n_estimators", 50.into());
            put("learning_rate", 1.0.into());
            put("loss", "linear".into());
        }
        RegressorKind::Svm => {
            put("c", 1.0.into());
            put("epsilon", 0.1.into());
            put("max_iter", 1_000_000.into());
            put("tol", 1e-3.into());
            put("standardize", true.into());
        }
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorConfig {
    pub kind: RegressorKind,
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
}

impl RegressorConfig {
    /// The kind's default hyperparameters, fully spelled out.
    pub fn new(kind: RegressorKind, seed: u64) -> Self {
        RegressorConfig {
            kind,
            hyperparameters: defaults(kind),
            seed,
        }
    }

    /// All eight kinds in report order, with defaults.
    pub fn all_defaults(seed: u64) -> Vec<RegressorConfig> {
        RegressorKind::ALL.iter().map(|&k| RegressorConfig::new(k, seed)).collect()
    }

    pub fn with(mut self, name: &str, value: impl Into<ParamValue>) -> Self {
        self.hyperparameters.insert(name.to_owned(), value.into());
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn reader(&self) -> Result<ParamReader<'_>, RegressError> {
        let known = defaults(self.kind);
        if let Some(unknown) = self.hyperparameters.keys().find(|k| !known.contains_key(*k)) {
            return Err(RegressError::Config(format!(
                "{} has no hyperparameter `{unknown}`",
                self.kind
            )));
        }
        Ok(ParamReader {
            kind: self.kind,
            given: &self.hyperparameters,
            defaults: known,
        })
    }
}

struct ParamReader<'a> {
    kind: RegressorKind,
    given: &'a Hyperparameters,
    defaults: Hyperparameters,
}

impl ParamReader<'_> {
    fn value(&self, name: &str) -> &ParamValue {
        self.given
            .get(name)
            .or_else(|| self.defaults.get(name))
            .expect("hyperparameter names are checked against defaults")
    }

    fn err(&self, name: &str, want: &str) -> RegressError {
        RegressError::Config(format!(
            "{}.{name} = {} ({want})",
            self.kind,
            self.value(name)
        ))
    }

    fn float(&self, name: &str) -> Result<f64, RegressError> {
        match self.value(name) {
            ParamValue::Float(v) if v.is_finite() => Ok(*v),
            ParamValue::Int(v) => Ok(*v as f64),
            _ => Err(self.err(name, "expected a finite number")),
        }
    }

    fn count(&self, name: &str) -> Result<usize, RegressError> {
        match self.value(name) {
            ParamValue::Int(v) if *v >= 0 => Ok(*v as usize),
            ParamValue::Float(v) if *v >= 0.0 && v.fract() == 0.0 => Ok(*v as usize),
            _ => Err(self.err(name, "expected a non-negative integer")),
        }
    }

    fn positive_count(&self, name: &str) -> Result<usize, RegressError> {
        match self.count(name)? {
            0 => Err(self.err(name, "must be >= 1")),
            v => Ok(v),
        }
    }

    fn flag(&self, name: &str) -> Result<bool, RegressError> {
        match self.value(name) {
            ParamValue::Bool(b) => Ok(*b),
            _ => Err(self.err(name, "expected true or false")),
        }
    }

    fn text(&self, name: &str) -> Result<&str, RegressError> {
        match self.value(name) {
            ParamValue::Text(s) => Ok(s),
            _ => Err(self.err(name, "expected a string")),
        }
    }

    fn threshold_mode(&self) -> Result<ThresholdMode, RegressError> {
        match self.text("threshold_mode")? {
            "best" => Ok(ThresholdMode::BestSplit),
            "random" => Ok(ThresholdMode::Random),
            _ => Err(self.err("threshold_mode", "expected \"best\" or \"random\"")),
        }
    }

    fn depth(&self) -> Result<Option<usize>, RegressError> {
        Ok(match self.count("max_depth")? {
            0 => None,
            d => Some(d),
        })
    }

    fn tree(&self, n_features: usize, default_features: usize) -> Result<TreeParams, RegressError> {
        let max_features = match self.count("max_features")? {
            0 => default_features,
            k => k.min(n_features),
        };
        Ok(TreeParams {
            max_depth: self.depth()?,
            min_samples_leaf: self.positive_count("min_samples_leaf")?,
            feature_subsample: (max_features < n_features).then_some(max_features),
            threshold_mode: self.threshold_mode()?,
            seed: 0,
        })
    }
}

/// Trained parameters of one of the eight families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum LearnedParameters {
    Linear(LinearModel),
    Tree(RegressionTree),
    Forest(Forest),
    GradientBoost(GradientBoostModel),
    AdaBoost(AdaBoostModel),
    Svr(SvrModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    format: String,
    version: u32,
    kind: RegressorKind,
    feature_names: Vec<String>,
    hyperparameters: Hyperparameters,
    seed: u64,
    parameters: LearnedParameters,
    /// Per-column values substituted for missing cells at prediction time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fill_values: Option<Vec<f64>>,
}

/// Trains `config` on `x`/`y`. Feature names default to `x0..` when `names` is `None`.
pub fn fit(
    config: &RegressorConfig,
    x: &Matrix,
    y: &[f64],
    names: Option<&[String]>,
) -> Result<FittedModel, RegressError> {
    let (n, p) = (x.rows(), x.cols());
    if n < 2 {
        return Err(RegressError::Precondition(format!("need at least 2 rows, got {n}")));
    }
    if y.len() != n {
        return Err(RegressError::Shape(format!("{n} rows but {} targets", y.len())));
    }
    if x.has_missing() {
        return Err(RegressError::Precondition("design matrix has missing cells".into()));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(RegressError::Precondition(format!("target {i} is not finite")));
    }
    let feature_names: Vec<String> = match names {
        Some(names) if names.len() == p => names.to_vec(),
        Some(names) => {
            return Err(RegressError::Shape(format!("{} names for {p} columns", names.len())))
        }
        None => (0..p).map(|i| format!("x{i}")).collect(),
    };

    let r = config.reader()?;
    let parameters = match config.kind {
        RegressorKind::LinearRegression => {
            LearnedParameters::Linear(fit_linear(x, y, r.flag("fit_intercept")?))
        }
        RegressorKind::DecisionTree => {
            let tree = TreeParams {
                seed: single_tree_seed(config.seed),
                ..r.tree(p, p)?
            };
            LearnedParameters::Tree(fit_cart(x, y, &tree))
        }
        RegressorKind::RandomForest | RegressorKind::ExtraTrees | RegressorKind::Bagging => {
            let default_features = if config.kind == RegressorKind::RandomForest {
                p.div_ceil(3).max(1)
            } else {
                p
            };
            let params = ForestParams {
                n_estimators: r.positive_count("n_estimators")?,
                bootstrap: r.flag("bootstrap")?,
                tree: r.tree(p, default_features)?,
            };
            LearnedParameters::Forest(fit_forest(x, y, &params, config.seed))
        }
        RegressorKind::GradientBoost => {
            let learning_rate = r.float("learning_rate")?;
            if learning_rate < 0.0 {
                return Err(r.err("learning_rate", "must be >= 0"));
            }
            let leaf_estimate = match r.text("leaf_estimate")? {
                "median" => LeafEstimate::Median,
                "mean" => LeafEstimate::Mean,
                _ => return Err(r.err("leaf_estimate", "expected \"median\" or \"mean\"")),
            };
            let params = BoostParams {
                n_estimators: r.positive_count("n_estimators")?,
                learning_rate,
                tree: TreeParams {
                    max_depth: r.depth()?,
                    min_samples_leaf: r.positive_count("min_samples_leaf")?,
                    ..TreeParams::default()
                },
                leaf_estimate,
            };
            LearnedParameters::GradientBoost(fit_gradient_boost(x, y, &params))
        }
        RegressorKind::AdaBoost => {
            let learning_rate = r.float("learning_rate")?;
            if learning_rate <= 0.0 {
                return Err(r.err("learning_rate", "must be > 0"));
            }
            let loss = match r.text("loss")? {
                "linear" => AdaLoss::Linear,
                "square" => AdaLoss::Square,
                "exponential" => AdaLoss::Exponential,
                _ => return Err(r.err("loss", "expected linear, square or exponential")),
            };
            let params = AdaBoostParams {
                n_estimators: r.positive_count("n_estimators")?,
                learning_rate,
                loss,
                tree: TreeParams {
                    max_depth: r.depth()?,
                    ..TreeParams::default()
                },
            };
            LearnedParameters::AdaBoost(fit_adaboost(x, y, &params, config.seed))
        }
        RegressorKind::Svm => {
            let c = r.float("c")?;
            let epsilon = r.float("epsilon")?;
            let tol = r.float("tol")?;
            if c < 0.0 {
                return Err(r.err("c", "must be >= 0"));
            }
            if epsilon < 0.0 {
                return Err(r.err("epsilon", "must be >= 0"));
            }
            if tol <= 0.0 {
                return Err(r.err("tol", "must be > 0"));
            }
            let params = SvrParams {
                c,
                epsilon,
                max_iter: r.positive_count("max_iter")?,
                tol,
                standardize: r.flag("standardize")?,
            };
            let model = fit_svr(x, y, &params);
            if !model.converged {
                log::warn!("svm stopped after {} iterations without converging", model.iterations);
            }
            LearnedParameters::Svr(model)
        }
    };

    let mut hyperparameters = defaults(config.kind);
    hyperparameters.extend(config.hyperparameters.clone());
    Ok(FittedModel {
        format: MODEL_FORMAT.to_owned(),
        version: MODEL_FORMAT_VERSION,
        kind: config.kind,
        feature_names,
        hyperparameters,
        seed: config.seed,
        parameters,
        fill_values: None,
    })
}

/// A lone decision tree uses the seed an ensemble would give its first member,
/// so a one-tree ensemble without subsampling reproduces it exactly.
pub fn single_tree_seed(seed: u64) -> u64 {
    let member = ForestParams {
        n_estimators: 1,
        bootstrap: false,
        tree: TreeParams::default(),
    };
    forest::member_setup(0, &member, seed, 0).1.seed
}

impl FittedModel {
    pub fn kind(&self) -> RegressorKind {
        self.kind
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hyperparameters
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn parameters(&self) -> &LearnedParameters {
        &self.parameters
    }

    /// Attaches imputation values (one per feature), typically training medians.
    pub fn with_fill_values(mut self, fills: Vec<f64>) -> Result<Self, RegressError> {
        if fills.len() != self.feature_names.len() || fills.iter().any(|v| !v.is_finite()) {
            return Err(RegressError::Shape(format!(
                "{} finite fill values needed, got {}",
                self.feature_names.len(),
                fills.len()
            )));
        }
        self.fill_values = Some(fills);
        Ok(self)
    }

    pub fn fill_values(&self) -> Option<&[f64]> {
        self.fill_values.as_deref()
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>, RegressError> {
        if x.cols() != self.feature_names.len() {
            return Err(RegressError::Shape(format!(
                "model expects {} columns, got {}",
                self.feature_names.len(),
                x.cols()
            )));
        }
        if x.has_missing() {
            return Err(RegressError::Precondition("prediction input has missing cells".into()));
        }
        Ok(match &self.parameters {
            LearnedParameters::Linear(m) => m.predict(x),
            LearnedParameters::Tree(m) => m.predict(x),
            LearnedParameters::Forest(m) => m.predict(x),
            LearnedParameters::GradientBoost(m) => m.predict(x),
            LearnedParameters::AdaBoost(m) => m.predict(x),
            LearnedParameters::Svr(m) => m.predict(x),
        })
    }

    /// Like [`predict`](Self::predict) but also requires matching feature names, in order.
    pub fn predict_named(&self, names: &[String], x: &Matrix) -> Result<Vec<f64>, RegressError> {
        if names != self.feature_names.as_slice() {
            return Err(RegressError::Shape(format!(
                "feature names differ: model has [{}], input has [{}]",
                self.feature_names.join(","),
                names.join(",")
            )));
        }
        self.predict(x)
    }

    /// Self-describing JSON; byte-stable for equal models.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models contain only finite numbers")
    }

    pub fn from_json(text: &str) -> Result<Self, RegressError> {
        let model: FittedModel =
            serde_json::from_str(text).map_err(|e| RegressError::Format(e.to_string()))?;
        if model.format != MODEL_FORMAT {
            return Err(RegressError::Format(format!("not a model file (format `{}`)", model.format)));
        }
        if model.version != MODEL_FORMAT_VERSION {
            return Err(RegressError::Format(format!(
                "unsupported model version {} (this build reads {MODEL_FORMAT_VERSION})",
                model.version
            )));
        }
        Ok(model)
    }
}
