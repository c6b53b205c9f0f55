//! AdaBoost.R2: each stage trains a tree on a weighted resample of the rows,
//! measures its normalised loss on the full training set, and reweights rows
//! toward the ones it got wrong. Predictions are the weighted median of the
//! stage predictions.

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use super::tree::{fit_cart_on, RegressionTree, TreeParams};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaLoss {
    Linear,
    Square,
    Exponential,
}

impl AdaLoss {
    fn apply(self, scaled_error: f64) -> f64 {
        match self {
            AdaLoss::Linear => scaled_error,
            AdaLoss::Square => scaled_error * scaled_error,
            AdaLoss::Exponential => 1.0 - (-scaled_error).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaBoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub loss: AdaLoss,
    pub tree: TreeParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostStage {
    pub tree: RegressionTree,
    pub weight: f64,
    pub average_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    stages: Vec<AdaBoostStage>,
}

/// Stops early once a stage's average loss reaches 0.5; that stage is
/// discarded unless it is the only one.
pub fn fit_adaboost(x: &Matrix, y: &[f64], params: &AdaBoostParams, seed: u64) -> AdaBoostModel {
    let n = y.len();
    let mut weights = vec![1.0 / n as f64; n];
    let mut stages: Vec<AdaBoostStage> = Vec::new();

    for m in 0..params.n_estimators {
        let stage_seed = derive_seed(seed, m as u64);
        let mut rng = rng_from_seed(derive_seed(stage_seed, 0));
        let sampler = match WeightedIndex::new(&weights) {
            Ok(s) => s,
            Err(_) => break,
        };
        let sample: Vec<usize> = (0..n).map(|_| sampler.sample(&mut rng)).collect();
        let tree_params = TreeParams {
            seed: derive_seed(stage_seed, 1),
            ..params.tree.clone()
        };
        let tree = fit_cart_on(x, y, &sample, &tree_params);

        let errors: Vec<f64> = x
            .iter_rows()
            .zip(y)
            .map(|(row, t)| (tree.predict_row(row) - t).abs())
            .collect();
        let max_error = errors.iter().copied().fold(0.0, f64::max);
        if max_error <= 0.0 {
            stages.push(AdaBoostStage {
                tree,
                weight: 1.0,
                average_loss: 0.0,
            });
            break;
        }
        let losses: Vec<f64> = errors.iter().map(|e| params.loss.apply(e / max_error)).collect();
        let average_loss: f64 = losses.iter().zip(&weights).map(|(l, w)| l * w).sum();

        if average_loss >= 0.5 {
            if stages.is_empty() {
                stages.push(AdaBoostStage {
                    tree,
                    weight: 1.0,
                    average_loss,
                });
            }
            break;
        }
        if average_loss <= 0.0 {
            stages.push(AdaBoostStage {
                tree,
                weight: 1.0,
                average_loss,
            });
            break;
        }

        let beta = average_loss / (1.0 - average_loss);
        let weight = params.learning_rate * (1.0 / beta).ln();
        for (w, l) in weights.iter_mut().zip(&losses) {
            *w *= beta.powf((1.0 - l) * params.learning_rate);
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        stages.push(AdaBoostStage {
            tree,
            weight,
            average_loss,
        });
    }

    AdaBoostModel { stages }
}

impl AdaBoostModel {
    pub fn stages(&self) -> &[AdaBoostStage] {
        &self.stages
    }

    /// Smallest stage prediction whose cumulative weight reaches half the total.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut preds: Vec<(f64, f64)> = self
            .stages
            .iter()
            .map(|s| (s.tree.predict_row(row), s.weight))
            .collect();
        preds.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = preds.iter().map(|p| p.1).sum();
        let mut cumulative = 0.0;
        for (value, weight) in &preds {
            cumulative += weight;
            if cumulative >= 0.5 * total {
                return *value;
            }
        }
        preds.last().map_or(0.0, |p| p.0)
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }
}
