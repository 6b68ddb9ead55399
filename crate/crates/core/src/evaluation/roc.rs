use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::scalar::Scalar;

/// Points of the vertical-averaging FPR grid.
pub const MEAN_ROC_POINTS: usize = 101;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve<T> {
    /// `(fpr, tpr)` from (0, 0) to (1, 1), fpr non-decreasing.
    pub points: Vec<(T, T)>,
    pub auc: T,
}

pub fn trapezoid<T: Scalar>(points: &[(T, T)]) -> T {
    let half = T::lit(0.5);
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) * half)
        .sum()
}

/// ROC over descending score thresholds. Tied scores form one step, a
/// diagonal segment when the tie mixes classes.
pub fn roc<T: Scalar>(y_true: &[u8], scores: &[T]) -> Result<RocCurve<T>, EvalError> {
    if y_true.len() != scores.len() {
        return Err(EvalError::LengthMismatch {
            truth: y_true.len(),
            other: scores.len(),
        });
    }
    let p = y_true.iter().filter(|&&l| l == 1).count();
    let n = y_true.len() - p;
    if p == 0 || n == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal));
    let (pt, nt) = (T::from_usize_lossy(p), T::from_usize_lossy(n));
    let mut points = vec![(T::zero(), T::zero())];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if y_true[order[k]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        points.push((T::from_usize_lossy(fp) / nt, T::from_usize_lossy(tp) / pt));
    }
    let auc = trapezoid(&points);
    Ok(RocCurve { points, auc })
}

impl<T: Scalar> RocCurve<T> {
    /// TPR at `fpr`: the top of a vertical segment at exactly `fpr`, else
    /// linear interpolation between the neighbouring points.
    pub fn tpr_at(&self, fpr: T) -> T {
        let pts = &self.points;
        let upto = pts.partition_point(|&(x, _)| x <= fpr);
        if upto == 0 {
            return pts[0].1;
        }
        let (x0, y0) = pts[upto - 1];
        if x0 == fpr || upto == pts.len() {
            return y0;
        }
        let (x1, y1) = pts[upto];
        y0 + (y1 - y0) * (fpr - x0) / (x1 - x0)
    }
}

/// Vertical averaging on a 101-point FPR grid, with (0, 0) prepended.
pub fn mean_roc<T: Scalar>(curves: &[RocCurve<T>]) -> RocCurve<T> {
    let k = T::from_usize_lossy(curves.len());
    let last = T::from_usize_lossy(MEAN_ROC_POINTS - 1);
    let mut points = vec![(T::zero(), T::zero())];
    for i in 0..MEAN_ROC_POINTS {
        let fpr = T::from_usize_lossy(i) / last;
        // offsets from the first curve keep identical curves exact
        let first = curves[0].tpr_at(fpr);
        let tpr = first + curves.iter().map(|c| c.tpr_at(fpr) - first).sum::<T>() / k;
        points.push((fpr, tpr));
    }
    let auc = trapezoid(&points);
    RocCurve { points, auc }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use proptest::prelude::*;
    use rand::Rng;

    /// Fraction of (positive, negative) pairs ranked correctly, ties worth half.
    fn pairwise_auc(y: &[u8], s: &[f64]) -> f64 {
        let mut credit = 0.0;
        let mut pairs = 0.0;
        for i in 0..y.len() {
            for j in 0..y.len() {
                if y[i] == 1 && y[j] == 0 {
                    pairs += 1.0;
                    if s[i] > s[j] {
                        credit += 1.0;
                    } else if s[i] == s[j] {
                        credit += 0.5;
                    }
                }
            }
        }
        credit / pairs
    }

    #[test]
    fn uninformative_and_perfect() {
        let y = [1, 0, 1, 0, 0];
        let flat = roc(&y, &[0.3; 5]).unwrap();
        assert_eq!(flat.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(flat.auc, 0.5);
        let perfect = roc(&y, &[0.9, 0.1, 0.8, 0.2, 0.3]).unwrap();
        assert_eq!(perfect.auc, 1.0);
    }

    #[test]
    fn single_class_is_error() {
        assert!(matches!(roc(&[1, 1], &[0.2, 0.4]), Err(EvalError::SingleClass)));
    }

    #[test]
    fn small_random_fixture_matches_pair_count() {
        let mut rng = stream(1, Purpose::Fixture, 0);
        let y = [1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0];
        let s: Vec<f64> = (0..12).map(|_| rng.random::<f64>()).collect();
        assert!((roc(&y, &s).unwrap().auc - pairwise_auc(&y, &s)).abs() < 1e-9);
    }

    #[test]
    fn averaging_examples() {
        let diag = roc(&[1, 0], &[0.5f64, 0.5]).unwrap();
        let perfect = roc(&[1, 0], &[0.9, 0.1]).unwrap();
        let avg = mean_roc(&[diag.clone(), perfect]);
        assert_eq!(avg.points.len(), MEAN_ROC_POINTS + 1);
        assert_eq!(avg.points[1], (0.0, 0.5));
        let same = mean_roc(&[diag.clone(), diag.clone(), diag.clone()]);
        assert_eq!(same, mean_roc(std::slice::from_ref(&diag)));
        for &(x, y) in &mean_roc(&[diag]).points {
            assert!((x - y).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn trapezoid_equals_pairwise(
            data in proptest::collection::vec((0u8..2, 0u8..8), 2..200),
        ) {
            let y: Vec<u8> = data.iter().map(|d| d.0).collect();
            prop_assume!(y.contains(&0) && y.contains(&1));
            // coarse scores force plenty of ties
            let s: Vec<f64> = data.iter().map(|d| f64::from(d.1) / 8.0).collect();
            let curve = roc(&y, &s).unwrap();
            prop_assert!((curve.auc - pairwise_auc(&y, &s)).abs() < 1e-9);
            prop_assert_eq!(curve.points[0], (0.0, 0.0));
            prop_assert_eq!(*curve.points.last().unwrap(), (1.0, 1.0));
            prop_assert!(curve.points.windows(2).all(|w| w[0].0 <= w[1].0));
        }

        #[test]
        fn single_curve_is_reproduced_on_grid(
            data in proptest::collection::vec((0u8..2, 0.0..1.0f64), 2..60),
        ) {
            let y: Vec<u8> = data.iter().map(|d| d.0).collect();
            prop_assume!(y.contains(&0) && y.contains(&1));
            let s: Vec<f64> = data.iter().map(|d| d.1).collect();
            let curve = roc(&y, &s).unwrap();
            let avg = mean_roc(std::slice::from_ref(&curve));
            for &(x, t) in &avg.points[1..] {
                prop_assert_eq!(t, curve.tpr_at(x));
            }
        }
    }
}
