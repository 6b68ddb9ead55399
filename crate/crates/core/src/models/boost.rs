use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{midpoint, Node, Tree};
use crate::scalar::{sigmoid, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostConfig {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Minimum hessian sum per child.
    pub min_child_weight: f64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            rounds: 100,
            max_depth: 3,
            learning_rate: 0.1,
            lambda: 1.0,
            min_child_weight: 1.0,
        }
    }
}

/// Additive trees on the log-odds scale. Leaves hold raw second-order
/// weights; the learning rate is applied when scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Booster<T> {
    pub base_score: T,
    pub learning_rate: T,
    pub trees: Vec<Tree<T>>,
}

impl<T: Scalar> Booster<T> {
    pub fn margin(&self, x: &[T]) -> T {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.predict(x)).sum::<T>()
    }

    pub fn score(&self, x: &[T]) -> T {
        sigmoid(self.margin(x))
    }
}

struct Candidate<T> {
    gain: T,
    feature: usize,
    threshold: T,
}

struct Grower<'a, T> {
    x: &'a [Vec<T>],
    order: &'a [Vec<usize>],
    g: Vec<T>,
    h: Vec<T>,
    lambda: T,
    min_child: T,
    max_depth: usize,
    tree: Tree<T>,
}

impl<T: Scalar> Grower<'_, T> {
    fn score_term(&self, g: T, h: T) -> T {
        g * g / (h + self.lambda)
    }

    /// Best positive-gain split of the rows flagged in `member`.
    fn best_split(&self, member: &[bool], g_sum: T, h_sum: T) -> Option<Candidate<T>> {
        let parent = self.score_term(g_sum, h_sum);
        let half = T::lit(0.5);
        let per_feature: Vec<Option<Candidate<T>>> = self
            .order
            .par_iter()
            .enumerate()
            .map(|(f, order)| {
                let rows: Vec<usize> = order.iter().copied().filter(|&i| member[i]).collect();
                let (mut gl, mut hl) = (T::zero(), T::zero());
                let mut best: Option<Candidate<T>> = None;
                for k in 0..rows.len().saturating_sub(1) {
                    gl += self.g[rows[k]];
                    hl += self.h[rows[k]];
                    let (lo, hi) = (self.x[rows[k]][f], self.x[rows[k + 1]][f]);
                    let hr = h_sum - hl;
                    if lo == hi || hl < self.min_child || hr < self.min_child {
                        continue;
                    }
                    let gain = half * (self.score_term(gl, hl) + self.score_term(g_sum - gl, hr) - parent);
                    if gain > T::zero() && best.as_ref().is_none_or(|b| gain > b.gain) {
                        best = Some(Candidate {
                            gain,
                            feature: f,
                            threshold: midpoint(lo, hi),
                        });
                    }
                }
                best
            })
            .collect();
        // lowest feature index wins ties, independent of thread timing
        per_feature
            .into_iter()
            .flatten()
            .fold(None, |acc: Option<Candidate<T>>, c| match acc {
                Some(a) if a.gain >= c.gain => Some(a),
                _ => Some(c),
            })
    }

    fn grow(&mut self, slot: usize, rows: Vec<usize>, depth: usize, member: &mut Vec<bool>) {
        let g_sum = rows.iter().map(|&i| self.g[i]).sum::<T>();
        let h_sum = rows.iter().map(|&i| self.h[i]).sum::<T>();
        let leaf = Node::Leaf {
            value: -g_sum / (h_sum + self.lambda),
        };
        if depth >= self.max_depth || rows.len() < 2 {
            self.tree.nodes[slot] = leaf;
            return;
        }
        for &i in &rows {
            member[i] = true;
        }
        let split = self.best_split(member, g_sum, h_sum);
        for &i in &rows {
            member[i] = false;
        }
        let Some(split) = split else {
            self.tree.nodes[slot] = leaf;
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
        self.grow(left, left_rows, depth + 1, member);
        self.grow(right, right_rows, depth + 1, member);
    }
}

/// Gradient boosting on logistic loss with exact greedy splits.
pub fn fit_boost<T: Scalar>(x: &[Vec<T>], y: &[u8], cfg: &BoostConfig) -> Booster<T> {
    let n = x.len();
    let p = x[0].len();
    let pos = y.iter().filter(|&&l| l == 1).count() as f64;
    let rate = (pos / n as f64).clamp(1e-6, 1.0 - 1e-6);
    let mut booster = Booster {
        base_score: T::lit((rate / (1.0 - rate)).ln()),
        learning_rate: T::lit(cfg.learning_rate),
        trees: Vec::with_capacity(cfg.rounds),
    };
    let order: Vec<Vec<usize>> = (0..p)
        .map(|f| {
            let mut o: Vec<usize> = (0..n).collect();
            o.sort_by(|&a, &b| x[a][f].partial_cmp(&x[b][f]).expect("finite features"));
            o
        })
        .collect();
    let mut margin = vec![booster.base_score; n];
    let mut member = vec![false; n];
    for _ in 0..cfg.rounds {
        let prob: Vec<T> = margin.iter().map(|&m| sigmoid(m)).collect();
        let g = prob.iter().zip(y).map(|(&q, &l)| q - T::from_u8(l).expect("0 or 1")).collect();
        let h = prob.iter().map(|&q| q * (T::one() - q)).collect();
        let mut grower = Grower {
            x,
            order: &order,
            g,
            h,
            lambda: T::lit(cfg.lambda),
            min_child: T::lit(cfg.min_child_weight),
            max_depth: cfg.max_depth,
            tree: Tree::leaf(T::zero()),
        };
        grower.grow(0, (0..n).collect(), 0, &mut member);
        let tree = grower.tree;
        for (m, row) in margin.iter_mut().zip(x) {
            *m += booster.learning_rate * tree.predict(row);
        }
        booster.trees.push(tree);
    }
    booster
}
