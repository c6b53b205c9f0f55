//! Ordinary least squares via SVD. Rank-deficient systems get the
//! minimum-norm solution instead of an error.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

pub fn fit_linear(x: &Matrix, y: &[f64], fit_intercept: bool) -> LinearModel {
    let (n, p) = (x.rows(), x.cols());
    let (x_mean, y_mean) = if fit_intercept {
        let means: Vec<f64> = (0..p)
            .map(|c| x.iter_rows().map(|r| r[c]).sum::<f64>() / n as f64)
            .collect();
        (means, y.iter().sum::<f64>() / n as f64)
    } else {
        (vec![0.0; p], 0.0)
    };
    if p == 0 {
        return LinearModel {
            intercept: y_mean,
            coefficients: Vec::new(),
        };
    }

    let design = DMatrix::from_fn(n, p, |i, j| x.get(i, j) - x_mean[j]);
    let rhs = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let svd = design.svd(true, true);
    let largest = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = largest * n.max(p) as f64 * f64::EPSILON;
    let coefficients: Vec<f64> = match svd.solve(&rhs, cutoff) {
        Ok(w) => w.iter().copied().collect(),
        Err(_) => vec![0.0; p],
    };
    let intercept = y_mean
        - coefficients
            .iter()
            .zip(&x_mean)
            .map(|(w, m)| w * m)
            .sum::<f64>();
    LinearModel {
        intercept,
        coefficients,
    }
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(row)
                .map(|(w, v)| w * v)
                .sum::<f64>()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }
}
