//! CART regression trees split by minimum total child sum of squared
//! deviations.
//!
//! Candidate splits are scanned feature-ascending, threshold-ascending and a
//! candidate replaces the incumbent only when strictly better, which gives the
//! lowest-feature, smallest-threshold tie-break. In `Random` mode each
//! candidate feature gets one threshold drawn uniformly from its node range
//! (the Extra-Trees rule).

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    BestSplit,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features sampled per node; `None` uses all of them.
    pub feature_subsample: Option<usize>,
    pub threshold_mode: ThresholdMode,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
            feature_subsample: None,
            threshold_mode: ThresholdMode::BestSplit,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    n_features: usize,
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    cost: f64,
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    params: &'a TreeParams,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

/// Fits a tree on every row of `x`.
pub fn fit_cart(x: &Matrix, y: &[f64], params: &TreeParams) -> RegressionTree {
    let rows: Vec<usize> = (0..x.rows()).collect();
    fit_cart_on(x, y, &rows, params)
}

/// Fits a tree on the (possibly repeated) row indices in `sample`.
pub fn fit_cart_on(x: &Matrix, y: &[f64], sample: &[usize], params: &TreeParams) -> RegressionTree {
    assert_eq!(x.rows(), y.len(), "target length differs from row count");
    let mut builder = Builder {
        x,
        y,
        params,
        rng: rng_from_seed(params.seed),
        nodes: Vec::new(),
    };
    if sample.is_empty() {
        builder.nodes.push(Node::Leaf { value: 0.0 });
    } else {
        builder.grow(sample.to_vec(), 0);
    }
    RegressionTree {
        n_features: x.cols(),
        nodes: builder.nodes,
    }
}

fn leaf_value(y: &[f64], rows: &[usize]) -> f64 {
    let first = y[rows[0]];
    if rows.iter().all(|&r| y[r] == first) {
        first
    } else {
        rows.iter().map(|&r| y[r]).sum::<f64>() / rows.len() as f64
    }
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: leaf_value(self.y, &rows),
        });

        let min_leaf = self.params.min_samples_leaf.max(1);
        let first = self.y[rows[0]];
        let pure = rows.iter().all(|&r| self.y[r] == first);
        let depth_reached = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || rows.len() < 2 * min_leaf {
            return id;
        }

        let Some(best) = self.best_split(&rows, min_leaf) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.x.get(r, best.feature) <= best.threshold);
        drop(rows);

        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.x.cols();
        match self.params.feature_subsample {
            Some(k) if k < p => {
                let mut chosen = index::sample(&mut self.rng, p, k.max(1)).into_vec();
                chosen.sort_unstable();
                chosen
            }
            _ => (0..p).collect(),
        }
    }

    fn best_split(&mut self, rows: &[usize], min_leaf: usize) -> Option<Candidate> {
        let n = rows.len();
        // Centre the targets: sums of squares stay well-conditioned for large minutes.
        let centre = rows.iter().map(|&r| self.y[r]).sum::<f64>() / n as f64;
        let mut best: Option<Candidate> = None;
        let keep = |c: Candidate, best: &mut Option<Candidate>| {
            if best.as_ref().is_none_or(|b| c.cost < b.cost) {
                *best = Some(c);
            }
        };

        for feature in self.candidate_features() {
            match self.params.threshold_mode {
                ThresholdMode::BestSplit => {
                    let mut pairs: Vec<(f64, f64)> = rows
                        .iter()
                        .map(|&r| (self.x.get(r, feature), self.y[r] - centre))
                        .collect();
                    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                    let total: f64 = pairs.iter().map(|p| p.1).sum();
                    let total_sq: f64 = pairs.iter().map(|p| p.1 * p.1).sum();
                    let (mut sum_l, mut sq_l) = (0.0, 0.0);
                    for i in 0..n - 1 {
                        sum_l += pairs[i].1;
                        sq_l += pairs[i].1 * pairs[i].1;
                        let n_l = i + 1;
                        let n_r = n - n_l;
                        if pairs[i].0 == pairs[i + 1].0 || n_l < min_leaf || n_r < min_leaf {
                            continue;
                        }
                        let sum_r = total - sum_l;
                        let sq_r = total_sq - sq_l;
                        let cost = (sq_l - sum_l * sum_l / n_l as f64)
                            + (sq_r - sum_r * sum_r / n_r as f64);
                        keep(
                            Candidate {
                                feature,
                                threshold: midpoint(pairs[i].0, pairs[i + 1].0),
                                cost,
                            },
                            &mut best,
                        );
                    }
                }
                ThresholdMode::Random => {
                    let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                        let v = self.x.get(r, feature);
                        (lo.min(v), hi.max(v))
                    });
                    if lo >= hi {
                        continue;
                    }
                    let threshold = self.rng.gen_range(lo..hi);
                    let (mut n_l, mut sum_l, mut sq_l) = (0usize, 0.0, 0.0);
                    let (mut sum_r, mut sq_r) = (0.0, 0.0);
                    for &r in rows {
                        let d = self.y[r] - centre;
                        if self.x.get(r, feature) <= threshold {
                            n_l += 1;
                            sum_l += d;
                            sq_l += d * d;
                        } else {
                            sum_r += d;
                            sq_r += d * d;
                        }
                    }
                    let n_r = n - n_l;
                    if n_l < min_leaf || n_r < min_leaf {
                        continue;
                    }
                    let cost =
                        (sq_l - sum_l * sum_l / n_l as f64) + (sq_r - sum_r * sum_r / n_r as f64);
                    keep(Candidate { feature, threshold, cost }, &mut best);
                }
            }
        }
        best
    }
}

/// A threshold strictly below `hi` that still sends `lo` left.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

impl RegressionTree {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Index of the leaf node `row` falls into.
    pub fn leaf_of(&self, row: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match self.nodes[id] {
                Node::Leaf { .. } => return id,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_of(row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_of returned a split node"),
        }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }

    /// Overwrites a leaf's prediction. Panics if `node` is a split.
    pub fn set_leaf_value(&mut self, node: usize, value: f64) {
        match &mut self.nodes[node] {
            Node::Leaf { value: v } => *v = value,
            Node::Split { .. } => panic!("node {node} is not a leaf"),
        }
    }

    /// Root split `(feature, threshold)`, if the tree is not a single leaf.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => Some((feature, threshold)),
            Node::Leaf { .. } => None,
        }
    }
}
