//! Averaged tree ensembles: random forests, extra trees and bagging differ
//! only in row bootstrapping, per-node feature subsampling and threshold mode.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_cart_on, RegressionTree, TreeParams};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, rng_from_seed};

const BOOTSTRAP_STREAM: u64 = 0;
const TREE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub bootstrap: bool,
    /// Per-tree settings; the seed field is replaced per estimator.
    pub tree: TreeParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<RegressionTree>,
}

/// Seed of estimator `index` in an ensemble seeded with `seed`.
pub fn estimator_seed(seed: u64, index: usize) -> u64 {
    derive_seed(seed, index as u64)
}

/// Rows and tree settings used by estimator `index`.
pub(crate) fn member_setup(
    n_rows: usize,
    params: &ForestParams,
    seed: u64,
    index: usize,
) -> (Vec<usize>, TreeParams) {
    let member = estimator_seed(seed, index);
    let rows = if params.bootstrap {
        let mut rng = rng_from_seed(derive_seed(member, BOOTSTRAP_STREAM));
        (0..n_rows).map(|_| rng.gen_range(0..n_rows)).collect()
    } else {
        (0..n_rows).collect()
    };
    let tree = TreeParams {
        seed: derive_seed(member, TREE_STREAM),
        ..params.tree.clone()
    };
    (rows, tree)
}

/// Grows `n_estimators` trees in parallel; the result does not depend on the
/// thread count because each member derives its own seed from its index.
pub fn fit_forest(x: &Matrix, y: &[f64], params: &ForestParams, seed: u64) -> Forest {
    let trees = (0..params.n_estimators)
        .into_par_iter()
        .map(|i| {
            let (rows, tree) = member_setup(x.rows(), params, seed, i);
            fit_cart_on(x, y, &rows, &tree)
        })
        .collect();
    Forest { trees }
}

impl Forest {
    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        sum / self.trees.len() as f64
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }
}
