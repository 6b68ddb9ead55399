use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_classes, ModelError, ModelKind, Trace};
use crate::rng::{stream, Purpose};
use crate::scalar::{sigmoid, Scalar};

/// Row chunk for parallel gradient sums. Fixed so sums are reproducible.
const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel<T> {
    pub w: Vec<T>,
    pub b: T,
}

impl<T: Scalar> LinearModel<T> {
    pub fn zeros(p: usize) -> Self {
        LinearModel {
            w: vec![T::zero(); p],
            b: T::zero(),
        }
    }

    pub fn margin(&self, x: &[T]) -> T {
        self.w.iter().zip(x).map(|(&w, &v)| w * v).sum::<T>() + self.b
    }

    pub fn score(&self, x: &[T]) -> T {
        sigmoid(self.margin(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogitConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub l2: f64,
    /// Stops once the gradient's largest component falls below this.
    pub tolerance: f64,
}

impl Default for LogitConfig {
    fn default() -> Self {
        LogitConfig {
            learning_rate: 0.1,
            max_epochs: 2000,
            l2: 1e-4,
            tolerance: 1e-6,
        }
    }
}

/// `log(1 + e^z) - y z` without overflow.
pub(crate) fn log_loss<T: Scalar>(z: T, y: u8) -> T {
    let softplus = z.max(T::zero()) + (-z.abs()).exp().ln_1p();
    if y == 1 {
        softplus - z
    } else {
        softplus
    }
}

/// Mean log-loss plus `l2 * |w|^2` and its gradient `(dw, db)`.
fn objective<T: Scalar>(m: &LinearModel<T>, x: &[Vec<T>], y: &[u8], l2: T) -> (T, Vec<T>, T) {
    let p = m.w.len();
    let partial: Vec<(T, Vec<T>, T)> = x
        .par_chunks(CHUNK)
        .zip(y.par_chunks(CHUNK))
        .map(|(xs, ys)| {
            let mut loss = T::zero();
            let mut gw = vec![T::zero(); p];
            let mut gb = T::zero();
            for (row, &label) in xs.iter().zip(ys) {
                let z = m.margin(row);
                loss += log_loss(z, label);
                let r = sigmoid(z) - T::from_u8(label).expect("0 or 1");
                for (g, &v) in gw.iter_mut().zip(row) {
                    *g += r * v;
                }
                gb += r;
            }
            (loss, gw, gb)
        })
        .collect();
    let n = T::from_usize_lossy(x.len());
    let mut loss = T::zero();
    let mut gw = vec![T::zero(); p];
    let mut gb = T::zero();
    for (l, g, b) in partial {
        loss += l;
        for (a, v) in gw.iter_mut().zip(g) {
            *a += v;
        }
        gb += b;
    }
    let two = T::lit(2.0);
    let penalty = m.w.iter().map(|&w| w * w).sum::<T>() * l2;
    for (g, &w) in gw.iter_mut().zip(&m.w) {
        *g = *g / n + two * l2 * w;
    }
    (loss / n + penalty, gw, gb / n)
}

/// Full-batch gradient descent on L2-regularized log-loss. Returns the model
/// and the loss at the start of every epoch run.
pub fn fit_logit<T: Scalar>(
    x: &[Vec<T>],
    y: &[u8],
    cfg: &LogitConfig,
) -> Result<(LinearModel<T>, Vec<T>), ModelError> {
    check_classes(y)?;
    let mut m = LinearModel::zeros(x[0].len());
    let lr = T::lit(cfg.learning_rate);
    let l2 = T::lit(cfg.l2);
    let tol = T::lit(cfg.tolerance);
    let mut history = Vec::new();
    for epoch in 0..cfg.max_epochs {
        let (loss, gw, gb) = objective(&m, x, y, l2);
        if !loss.is_finite() {
            return Err(ModelError::NonFiniteLoss {
                model: ModelKind::Logit,
                epoch,
            });
        }
        history.push(loss);
        let largest = gw.iter().fold(gb.abs(), |acc, g| acc.max(g.abs()));
        if largest < tol {
            break;
        }
        for (w, g) in m.w.iter_mut().zip(gw) {
            *w -= lr * g;
        }
        m.b -= lr * gb;
    }
    Ok((m, history))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvcConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
}

impl Default for SvcConfig {
    fn default() -> Self {
        SvcConfig {
            learning_rate: 0.01,
            l2: 1e-3,
            epochs: 50,
        }
    }
}

/// Linear SVM by per-sample subgradient steps on hinge loss plus
/// `l2 * |w|^2`, visiting samples in a seeded shuffle each pass.
pub fn fit_svc<T: Scalar>(
    x: &[Vec<T>],
    y: &[u8],
    cfg: &SvcConfig,
    seed: u64,
) -> Result<(LinearModel<T>, Trace), ModelError> {
    check_classes(y)?;
    let mut m = LinearModel::zeros(x[0].len());
    let lr = T::lit(cfg.learning_rate);
    let decay = T::one() - T::lit(2.0 * cfg.learning_rate * cfg.l2);
    let mut rng = stream(seed, Purpose::Model, 0);
    let mut order: Vec<usize> = (0..x.len()).collect();
    let sign = |l: u8| if l == 1 { T::one() } else { -T::one() };
    let mut last = None;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let s = sign(y[i]);
            let active = s * m.margin(&x[i]) < T::one();
            for (w, &v) in m.w.iter_mut().zip(&x[i]) {
                *w = *w * decay + if active { lr * s * v } else { T::zero() };
            }
            if active {
                m.b += lr * s;
            }
        }
        let hinge = x
            .iter()
            .zip(y)
            .map(|(r, &l)| (T::one() - sign(l) * m.margin(r)).max(T::zero()))
            .sum::<T>()
            / T::from_usize_lossy(x.len())
            + T::lit(cfg.l2) * m.w.iter().map(|&w| w * w).sum::<T>();
        if !hinge.is_finite() {
            return Err(ModelError::NonFiniteLoss {
                model: ModelKind::Svc,
                epoch,
            });
        }
        last = Some(hinge.to_f64_lossy());
    }
    Ok((m, (Some(cfg.epochs), last)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn recovers_generating_slope() {
        let mut rng = stream(1, Purpose::Fixture, 0);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..2000 {
            let v: f64 = StandardNormal.sample(&mut rng);
            x.push(vec![v]);
            y.push(u8::from(rng.random::<f64>() < sigmoid(3.0 * v)));
        }
        let (m, history) = fit_logit(&x, &y, &LogitConfig::default()).unwrap();
        // one dimension: cosine similarity with [3] is the sign of w
        assert!(m.w[0] > 0.0);
        assert!((m.w[0] - 3.0).abs() < 0.6, "w = {}", m.w[0]);
        assert!(m.b.abs() < 0.2);
        assert!(history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn identical_inputs_give_base_rate() {
        let x = vec![vec![0.0f64, 0.0]; 100];
        let y: Vec<u8> = (0..100).map(|i| u8::from(i < 30)).collect();
        let (m, _) = fit_logit(&x, &y, &LogitConfig::default()).unwrap();
        assert_eq!(m.w, vec![0.0, 0.0]);
        assert!((m.score(&x[0]) - 0.3).abs() < 0.02);
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let x = vec![vec![1.0], vec![-1.0]];
        let cfg = LogitConfig {
            learning_rate: 0.0,
            max_epochs: 1,
            ..Default::default()
        };
        let (m, h) = fit_logit(&x, &[1, 0], &cfg).unwrap();
        assert_eq!(m, LinearModel::zeros(1));
        assert_eq!(h.len(), 1);
    }

    #[test]
    fn overflow_reports_epoch() {
        let x = vec![vec![1e300], vec![-1e300]];
        let cfg = LogitConfig {
            learning_rate: 1e300,
            ..Default::default()
        };
        match fit_logit(&x, &[1, 0], &cfg) {
            Err(ModelError::NonFiniteLoss { epoch, .. }) => assert!(epoch >= 1),
            other => panic!("{other:?}"),
        }
    }

    fn separable(seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut rng = stream(seed, Purpose::Fixture, 0);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..200 {
            let label = (i % 2) as u8;
            let c = if label == 1 { 2.5 } else { -2.5 };
            x.push(vec![c + rng.random_range(-1.0..1.0), -c + rng.random_range(-1.0..1.0)]);
            y.push(label);
        }
        (x, y)
    }

    #[test]
    fn svc_separates_blobs() {
        let (x, y) = separable(2);
        let (m, _) = fit_svc(&x, &y, &SvcConfig::default(), 3).unwrap();
        let correct = x.iter().zip(&y).filter(|(r, &l)| u8::from(m.score(r) > 0.5) == l).count();
        assert_eq!(correct, x.len());
    }

    #[test]
    fn svc_flipped_labels_negate_direction() {
        let (x, y) = separable(4);
        let flipped: Vec<u8> = y.iter().map(|l| 1 - l).collect();
        let (a, _) = fit_svc(&x, &y, &SvcConfig::default(), 5).unwrap();
        let (b, _) = fit_svc(&x, &flipped, &SvcConfig::default(), 5).unwrap();
        let dot: f64 = a.w.iter().zip(&b.w).map(|(p, q)| p * q).sum();
        let norm = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>().sqrt();
        assert!(dot / (norm(&a.w) * norm(&b.w)) < -0.9);
    }

    #[test]
    fn svc_requires_both_classes() {
        let x = vec![vec![1.0]; 3];
        assert!(matches!(
            fit_svc(&x, &[0, 0, 0], &SvcConfig::default(), 0),
            Err(ModelError::MissingClass(1))
        ));
    }
}
