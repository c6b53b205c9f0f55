//! Linear epsilon-insensitive support vector regression.
//!
//! Minimises `½‖w‖² + C·Σ max(0, |w·xᵢ + b − yᵢ| − ε)` with an unregularised
//! bias by solving the dual with sequential minimal optimisation: the
//! standard 2n-variable formulation with second-order working-set selection.
//! The kernel is linear, so the primal weight vector is kept explicitly and
//! gradients are refreshed from it in `O(n·P)` per step.

use serde::{Deserialize, Serialize};

use super::boost::median_of;
use crate::matrix::Matrix;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub standardize: bool,
}

impl Default for SvrParams {
    fn default() -> Self {
        SvrParams {
            c: 1.0,
            epsilon: 0.1,
            max_iter: 1_000_000,
            tol: 1e-3,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    means: Vec<f64>,
    scales: Vec<f64>,
    weights: Vec<f64>,
    bias: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn scaler(x: &Matrix, standardize: bool) -> (Vec<f64>, Vec<f64>) {
    let (n, p) = (x.rows(), x.cols());
    if !standardize {
        return (vec![0.0; p], vec![1.0; p]);
    }
    let means: Vec<f64> = (0..p)
        .map(|c| x.iter_rows().map(|r| r[c]).sum::<f64>() / n as f64)
        .collect();
    let scales = (0..p)
        .map(|c| {
            let var = x.iter_rows().map(|r| (r[c] - means[c]).powi(2)).sum::<f64>() / n as f64;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    (means, scales)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn fit_svr(x: &Matrix, y: &[f64], params: &SvrParams) -> SvrModel {
    let (n, p) = (x.rows(), x.cols());
    let (means, scales) = scaler(x, params.standardize);
    let points: Vec<Vec<f64>> = x
        .iter_rows()
        .map(|r| (0..p).map(|c| (r[c] - means[c]) / scales[c]).collect())
        .collect();

    if params.c <= 0.0 || n == 0 {
        let mut ys = y.to_vec();
        let bias = if ys.is_empty() { 0.0 } else { median_of(&mut ys) };
        return SvrModel {
            means,
            scales,
            weights: vec![0.0; p],
            bias,
            converged: true,
            iterations: 0,
        };
    }

    let c = params.c;
    let len = 2 * n;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let point = |t: usize| if t < n { t } else { t - n };
    let diag: Vec<f64> = points.iter().map(|v| dot(v, v)).collect();

    let mut alpha = vec![0.0; len];
    let mut grad: Vec<f64> = (0..len)
        .map(|t| {
            if t < n {
                params.epsilon - y[t]
            } else {
                params.epsilon + y[t - n]
            }
        })
        .collect();
    let mut w = vec![0.0; p];
    let mut kernel_row = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_iter {
        // i: most violating index moving "up".
        let mut g_max = f64::NEG_INFINITY;
        let mut sel_i = None;
        for t in 0..len {
            if sign(t) > 0.0 {
                if alpha[t] < c && -grad[t] >= g_max {
                    g_max = -grad[t];
                    sel_i = Some(t);
                }
            } else if alpha[t] > 0.0 && grad[t] >= g_max {
                g_max = grad[t];
                sel_i = Some(t);
            }
        }
        let Some(i) = sel_i else {
            converged = true;
            break;
        };
        let pi = point(i);
        for (q, v) in points.iter().enumerate() {
            kernel_row[q] = dot(&points[pi], v);
        }

        // j: second-order choice among indices moving "down".
        let mut g_max2 = f64::NEG_INFINITY;
        let mut sel_j = None;
        let mut obj_min = f64::INFINITY;
        for t in 0..len {
            let q = point(t);
            let grad_diff = if sign(t) > 0.0 {
                if alpha[t] <= 0.0 {
                    continue;
                }
                g_max2 = g_max2.max(grad[t]);
                g_max + grad[t]
            } else {
                if alpha[t] >= c {
                    continue;
                }
                g_max2 = g_max2.max(-grad[t]);
                g_max - grad[t]
            };
            if grad_diff > 0.0 {
                let quad = diag[pi] + diag[q] - 2.0 * kernel_row[q];
                let quad = if quad > 0.0 { quad } else { TAU };
                let obj = -(grad_diff * grad_diff) / quad;
                if obj <= obj_min {
                    obj_min = obj;
                    sel_j = Some(t);
                }
            }
        }
        if g_max + g_max2 < params.tol {
            converged = true;
            break;
        }
        let Some(j) = sel_j else {
            converged = true;
            break;
        };
        iterations += 1;

        let pj = point(j);
        let q_ij = sign(i) * sign(j) * kernel_row[pj];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if sign(i) != sign(j) {
            let quad = diag[pi] + diag[pj] + 2.0 * q_ij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = diag[pi] + diag[pj] - 2.0 * q_ij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let step_i = sign(i) * (alpha[i] - old_i);
        let step_j = sign(j) * (alpha[j] - old_j);
        let delta_w: Vec<f64> = (0..p)
            .map(|k| step_i * points[pi][k] + step_j * points[pj][k])
            .collect();
        for k in 0..p {
            w[k] += delta_w[k];
        }
        for (q, v) in points.iter().enumerate() {
            let d = dot(v, &delta_w);
            grad[q] += d;
            grad[q + n] -= d;
        }
    }

    // Bias from the KKT conditions: average over free variables when any exist.
    let (mut upper, mut lower) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut free_sum) = (0usize, 0.0);
    for t in 0..len {
        let yg = sign(t) * grad[t];
        if alpha[t] >= c {
            if sign(t) < 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if sign(t) > 0.0 {
                upper = upper.min(yg);
            } else {
                lower = lower.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        (upper + lower) / 2.0
    };

    SvrModel {
        means,
        scales,
        weights: w,
        bias: -rho,
        converged,
        iterations,
    }
}

impl SvrModel {
    /// Weights and intercept expressed on the original feature scale.
    pub fn coefficients(&self) -> (Vec<f64>, f64) {
        let coef: Vec<f64> = self.weights.iter().zip(&self.scales).map(|(w, s)| w / s).collect();
        let intercept = self.bias - coef.iter().zip(&self.means).map(|(c, m)| c * m).sum::<f64>();
        (coef, intercept)
    }

    /// Weights on the standardised scale (the ones the regulariser sees).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.bias
            + self
                .weights
                .iter()
                .enumerate()
                .map(|(k, w)| w * (row[k] - self.means[k]) / self.scales[k])
                .sum::<f64>()
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }
}
