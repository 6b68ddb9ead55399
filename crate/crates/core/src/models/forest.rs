use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{midpoint, Node, Tree};
use crate::rng::{stream, Purpose};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub bootstrap: bool,
    /// Features tried per split; `None` means round(sqrt(p)).
    pub max_features: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 100,
            max_depth: 8,
            min_leaf: 5,
            bootstrap: true,
            max_features: None,
        }
    }
}

/// Trees whose leaves vote 0 or 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest<T> {
    pub trees: Vec<Tree<T>>,
}

impl<T: Scalar> Forest<T> {
    /// Fraction of trees voting positive.
    pub fn score(&self, x: &[T]) -> T {
        let votes = self.trees.iter().map(|t| t.predict(x)).sum::<T>();
        votes / T::from_usize_lossy(self.trees.len())
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

pub(crate) struct BestSplit<T> {
    pub feature: usize,
    pub threshold: T,
    /// Size-weighted child impurity.
    pub impurity: f64,
}

/// Lowest weighted Gini split over `features` with both children holding at
/// least `min_leaf` rows. Earlier features and lower thresholds win ties.
pub(crate) fn best_gini_split<T: Scalar>(
    x: &[Vec<T>],
    y: &[u8],
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<BestSplit<T>> {
    let n = rows.len();
    let total_pos = rows.iter().filter(|&&i| y[i] == 1).count();
    let mut best: Option<BestSplit<T>> = None;
    let mut sorted = rows.to_vec();
    for &f in features {
        sorted.sort_by(|&a, &b| x[a][f].partial_cmp(&x[b][f]).expect("finite features"));
        let mut left_pos = 0;
        for k in 1..n {
            left_pos += usize::from(y[sorted[k - 1]] == 1);
            let (lo, hi) = (x[sorted[k - 1]][f], x[sorted[k]][f]);
            if k < min_leaf || n - k < min_leaf || lo == hi {
                continue;
            }
            let impurity =
                (k as f64 * gini(left_pos, k) + (n - k) as f64 * gini(total_pos - left_pos, n - k)) / n as f64;
            if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                best = Some(BestSplit {
                    feature: f,
                    threshold: midpoint(lo, hi),
                    impurity,
                });
            }
        }
    }
    best
}

struct Builder<'a, T> {
    x: &'a [Vec<T>],
    y: &'a [u8],
    cfg: &'a ForestConfig,
    per_split: usize,
    rng: ChaCha8Rng,
    tree: Tree<T>,
}

impl<T: Scalar> Builder<'_, T> {
    fn grow(&mut self, slot: usize, rows: Vec<usize>, depth: usize) {
        let n = rows.len();
        let pos = rows.iter().filter(|&&i| self.y[i] == 1).count();
        let vote = if 2 * pos > n { T::one() } else { T::zero() };
        if depth >= self.cfg.max_depth || n < 2 * self.cfg.min_leaf.max(1) || pos == 0 || pos == n {
            self.tree.nodes[slot] = Node::Leaf { value: vote };
            return;
        }
        let p = self.x[0].len();
        let features = sample(&mut self.rng, p, self.per_split).into_vec();
        let split = best_gini_split(self.x, self.y, &rows, &features, self.cfg.min_leaf.max(1));
        let Some(split) = split.filter(|s| s.impurity < gini(pos, n)) else {
            self.tree.nodes[slot] = Node::Leaf { value: vote };
            return;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| self.x[i][split.feature] <= split.threshold);
        let left = self.tree.push_placeholder();
        let right = self.tree.push_placeholder();
        self.tree.nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        self.grow(left, left_rows, depth + 1);
        self.grow(right, right_rows, depth + 1);
    }
}

/// Bagged CART classifiers; tree `k` draws its randomness from stream `k`.
pub fn fit_forest<T: Scalar>(x: &[Vec<T>], y: &[u8], cfg: &ForestConfig, seed: u64) -> Forest<T> {
    let p = x[0].len();
    let per_split = cfg
        .max_features
        .unwrap_or_else(|| (p as f64).sqrt().round() as usize)
        .clamp(1, p);
    let trees = (0..cfg.trees)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, Purpose::Model, k as u64);
            let rows: Vec<usize> = if cfg.bootstrap {
                (0..x.len()).map(|_| rng.random_range(0..x.len())).collect()
            } else {
                (0..x.len()).collect()
            };
            let mut b = Builder {
                x,
                y,
                cfg,
                per_split,
                rng,
                tree: Tree::leaf(T::zero()),
            };
            b.grow(0, rows, 0);
            b.tree
        })
        .collect();
    Forest { trees }
}
