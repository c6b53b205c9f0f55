//! Stagewise gradient boosting with shallow CART learners.
//!
//! Each stage fits a least-squares tree to the current residuals. With
//! `LeafEstimate::Median` the leaf values are then replaced by the median
//! residual of the training rows in each leaf, which makes the training
//! absolute error non-increasing stage by stage for learning rates in
//! `[0, 1]` (each leaf moves its rows along a convex absolute-loss path
//! toward its minimiser).

use serde::{Deserialize, Serialize};

use super::tree::{fit_cart, Node, RegressionTree, TreeParams};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafEstimate {
    Mean,
    Median,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub tree: TreeParams,
    pub leaf_estimate: LeafEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoostModel {
    init: f64,
    learning_rate: f64,
    stages: Vec<RegressionTree>,
}

pub(crate) fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        (values[mid - 1] + values[mid]) / 2.0
    }
}

pub fn fit_gradient_boost(x: &Matrix, y: &[f64], params: &BoostParams) -> GradientBoostModel {
    let n = y.len();
    let init = y.iter().sum::<f64>() / n as f64;
    let mut current = vec![init; n];
    let mut stages = Vec::with_capacity(params.n_estimators);

    for _ in 0..params.n_estimators {
        let residuals: Vec<f64> = y.iter().zip(&current).map(|(t, f)| t - f).collect();
        let mut tree = fit_cart(x, &residuals, &params.tree);

        if params.leaf_estimate == LeafEstimate::Median {
            let mut members: Vec<Vec<f64>> = vec![Vec::new(); tree.nodes().len()];
            for (i, row) in x.iter_rows().enumerate() {
                members[tree.leaf_of(row)].push(residuals[i]);
            }
            for (node, values) in members.iter_mut().enumerate() {
                if matches!(tree.nodes()[node], Node::Leaf { .. }) && !values.is_empty() {
                    tree.set_leaf_value(node, median_of(values));
                }
            }
        }

        for (i, row) in x.iter_rows().enumerate() {
            current[i] += params.learning_rate * tree.predict_row(row);
        }
        stages.push(tree);
    }

    GradientBoostModel {
        init,
        learning_rate: params.learning_rate,
        stages,
    }
}

impl GradientBoostModel {
    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn initial_prediction(&self) -> f64 {
        self.init
    }

    /// Prediction using only the first `stages` learners.
    pub fn predict_row_staged(&self, row: &[f64], stages: usize) -> f64 {
        let mut value = self.init;
        for tree in self.stages.iter().take(stages) {
            value += self.learning_rate * tree.predict_row(row);
        }
        value
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.predict_row_staged(row, self.stages.len())
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }

    pub fn predict_staged(&self, x: &Matrix, stages: usize) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_row_staged(r, stages)).collect()
    }
}
