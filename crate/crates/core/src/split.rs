//! Gini impurity and exhaustive threshold search.
//!
//! Candidate splits are compared in exact integer arithmetic so that the
//! tie-breaking rule is not at the mercy of rounding: among equal decreases
//! the feature listed first in `candidate_features` wins, then the lowest
//! threshold. Trees pass their features in random draw order, so ties do not
//! favour low column indices.

use std::cmp::Ordering;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// `sum_d p_d (1 - p_d)` over the class proportions of `class_counts`.
pub fn gini_node(class_counts: &[u64]) -> Result<f64> {
    let total: u64 = class_counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidParameter(
            "gini of an empty node is undefined".into(),
        ));
    }
    Ok(gini_from_counts(class_counts, total))
}

pub(crate) fn gini_from_counts(class_counts: &[u64], total: u64) -> f64 {
    let t = total as f64;
    class_counts
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            p * (1.0 - p)
        })
        .sum()
}

/// A split chosen by [`best_split`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    /// Weighted Gini decrease `G(t) - (N_l/N) G(l) - (N_r/N) G(r)`.
    pub decrease: f64,
    /// Inbag weight sent left (`x <= threshold`).
    pub n_left: u64,
    pub n_right: u64,
}

/// Split gain as the exact fraction `num / den`, where
/// `num / den = sum_l c^2 / n_l + sum_r c^2 / n_r - sum c^2 / N`.
#[derive(Debug, Clone, Copy)]
struct Gain {
    num: i128,
    den: i128,
}

impl Gain {
    fn new(left: &[u64], right: &[u64], n_left: u64, n_right: u64) -> Self {
        let sq = |v: &[u64]| -> i128 { v.iter().map(|&c| (c as i128) * (c as i128)).sum() };
        let sl = sq(left);
        let sr = sq(right);
        let sp: i128 = left
            .iter()
            .zip(right)
            .map(|(&a, &b)| {
                let c = (a + b) as i128;
                c * c
            })
            .sum();
        let (nl, nr) = (n_left as i128, n_right as i128);
        let n = nl + nr;
        Gain {
            num: sl * nr * n + sr * nl * n - sp * nl * nr,
            den: nl * nr * n,
        }
    }

    fn cmp(&self, other: &Gain) -> Ordering {
        match (
            self.num.checked_mul(other.den),
            other.num.checked_mul(self.den),
        ) {
            (Some(a), Some(b)) => a.cmp(&b),
            _ => self.as_f64().total_cmp(&other.as_f64()),
        }
    }

    fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Best threshold split of the given inbag samples.
///
/// `samples` holds `(row, multiplicity)` pairs; every count is weighted by
/// multiplicity. Thresholds are midpoints between adjacent distinct values.
/// Returns `None` when no split leaves `min_leaf` inbag weight on both sides
/// with a strictly positive decrease.
pub fn best_split(
    data: &Dataset,
    samples: &[(usize, u32)],
    candidate_features: &[usize],
    min_leaf: u64,
) -> Option<SplitCandidate> {
    let d = data.n_classes();
    let labels = data.labels();
    let mut parent = vec![0u64; d];
    for &(i, m) in samples {
        parent[labels[i]] += m as u64;
    }
    let total: u64 = parent.iter().sum();
    if total < 2 || parent.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    let min_leaf = min_leaf.max(1);


    let mut best: Option<(Gain, SplitCandidate)> = None;
    let mut order: Vec<(f64, usize, u64)> = Vec::with_capacity(samples.len());
    let mut left = vec![0u64; d];
    let mut right = vec![0u64; d];
    for &feature in candidate_features {
        order.clear();
        order.extend(
            samples
                .iter()
                .map(|&(i, m)| (data.value(i, feature), labels[i], m as u64)),
        );
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        if order.first().map(|o| o.0) == order.last().map(|o| o.0) {
            continue;
        }
        left.iter_mut().for_each(|c| *c = 0);
        right.copy_from_slice(&parent);
        let mut n_left = 0u64;
        for k in 0..order.len() - 1 {
            let (v, y, m) = order[k];
            left[y] += m;
            right[y] -= m;
            n_left += m;
            let next = order[k + 1].0;
            if next == v {
                continue;
            }
            let n_right = total - n_left;
            if n_left < min_leaf {
                continue;
            }
            if n_right < min_leaf {
                break;
            }
            let gain = Gain::new(&left, &right, n_left, n_right);
            if gain.num <= 0 {
                continue;
            }
            let better = match &best {
                None => true,
                Some((b, _)) => gain.cmp(b) == Ordering::Greater,
            };
            if better {
                let mut threshold = v + (next - v) / 2.0;
                if threshold >= next {
                    threshold = v;
                }
                best = Some((
                    gain,
                    SplitCandidate {
                        feature,
                        threshold,
                        decrease: gain.as_f64() / total as f64,
                        n_left,
                        n_right,
                    },
                ));
            }
        }
    }
    best.map(|(_, s)| s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Arity;

    fn dataset(cols: Vec<Vec<f64>>, y: Vec<usize>) -> Dataset {
        let n = y.len();
        let p = cols.len();
        let rows = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        Dataset::new(
            rows,
            y,
            2,
            (0..p).map(|j| format!("x{j}")).collect(),
            vec![Arity::Continuous; p],
        )
        .unwrap()
    }

    fn all(n: usize) -> Vec<(usize, u32)> {
        (0..n).map(|i| (i, 1)).collect()
    }

    /// Weighted decrease for a given threshold, straight from the definition.
    fn decrease_oracle(x: &[f64], y: &[usize], thr: f64) -> f64 {
        let g = |ys: &[usize]| {
            let n = ys.len() as f64;
            let p1 = ys.iter().filter(|&&v| v == 1).count() as f64 / n;
            2.0 * p1 * (1.0 - p1)
        };
        let l: Vec<usize> = x.iter().zip(y).filter(|(v, _)| **v <= thr).map(|(_, &c)| c).collect();
        let r: Vec<usize> = x.iter().zip(y).filter(|(v, _)| **v > thr).map(|(_, &c)| c).collect();
        let n = y.len() as f64;
        g(y) - l.len() as f64 / n * g(&l) - r.len() as f64 / n * g(&r)
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini_node(&[5, 5]).unwrap(), 0.5);
        assert_eq!(gini_node(&[10, 0]).unwrap(), 0.0);
        assert_eq!(gini_node(&[3, 1]).unwrap(), 0.375);
        assert!(gini_node(&[0, 0]).is_err());
    }

    #[test]
    fn gini_upper_bound() {
        let g = gini_node(&[4, 4, 4]).unwrap();
        assert!((g - (1.0 - 1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn separable_four_points() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let y = vec![0, 0, 1, 1];
        // enumerate the three candidate thresholds with the oracle
        let candidates = [1.5, 2.5, 3.5];
        let dec: Vec<f64> = candidates.iter().map(|&t| decrease_oracle(&x, &y, t)).collect();
        let (best_i, _) = dec
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert_eq!(candidates[best_i], 2.5);
        assert!((dec[best_i] - 0.5).abs() < 1e-15);

        let ds = dataset(vec![x], y);
        let s = best_split(&ds, &all(4), &[0], 1).unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.threshold, 2.5);
        assert!((s.decrease - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pure_node_has_no_split() {
        let ds = dataset(vec![vec![1.0, 2.0, 3.0]], vec![1, 1, 1]);
        assert!(best_split(&ds, &all(3), &[0], 1).is_none());
    }

    #[test]
    fn constant_feature_has_no_split() {
        let ds = dataset(vec![vec![7.0; 4]], vec![0, 1, 0, 1]);
        assert!(best_split(&ds, &all(4), &[0], 1).is_none());
    }

    #[test]
    fn min_leaf_is_respected() {
        let ds = dataset(vec![vec![1.0, 2.0, 3.0, 4.0]], vec![0, 1, 1, 1]);
        let s = best_split(&ds, &all(4), &[0], 1).unwrap();
        assert_eq!(s.threshold, 1.5);
        let s = best_split(&ds, &all(4), &[0], 2).unwrap();
        assert_eq!(s.threshold, 2.5);
        assert!(best_split(&ds, &all(4), &[0], 3).is_none());
    }

    #[test]
    fn multiplicity_counts() {
        // row 0 drawn three times makes the left side heavier
        let ds = dataset(vec![vec![1.0, 2.0, 3.0]], vec![0, 1, 1]);
        let s = best_split(&ds, &[(0, 3), (1, 1), (2, 1)], &[0], 1).unwrap();
        assert_eq!((s.n_left, s.n_right), (3, 2));
        assert!((s.decrease - 2.0 * 0.6 * 0.4).abs() < 1e-15);
        // right side needs weight 3 which only the 3-fold row provides on the left
        assert!(best_split(&ds, &[(0, 3), (1, 1), (2, 1)], &[0], 3).is_none());
    }

    #[test]
    fn ties_go_to_first_candidate_then_lowest_threshold() {
        // identical columns: whichever is listed first wins
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let ds = dataset(vec![x.clone(), x], vec![0, 0, 1, 1]);
        assert_eq!(best_split(&ds, &all(4), &[1, 0], 1).unwrap().feature, 1);
        assert_eq!(best_split(&ds, &all(4), &[0, 1], 1).unwrap().feature, 0);
        // symmetric labels: thresholds 1.5 and 3.5 tie, lower wins
        let ds = dataset(vec![vec![1.0, 2.0, 3.0, 4.0]], vec![1, 0, 0, 1]);
        let s = best_split(&ds, &all(4), &[0], 1).unwrap();
        assert_eq!(s.threshold, 1.5);
    }

    #[test]
    fn no_zero_decrease_split() {
        // every threshold leaves child proportions equal to the parent's
        let ds = dataset(vec![vec![1.0, 1.0, 2.0, 2.0]], vec![0, 1, 0, 1]);
        assert!(best_split(&ds, &all(4), &[0], 1).is_none());
    }

    proptest::proptest! {
        #[test]
        fn matches_exhaustive_enumeration(
            xs in proptest::collection::vec(0u8..6, 4..24),
            ys in proptest::collection::vec(0usize..2, 24),
        ) {
            let n = xs.len();
            let x: Vec<f64> = xs.iter().map(|&v| v as f64).collect();
            let y: Vec<usize> = ys[..n].to_vec();
            let ds = dataset(vec![x.clone()], y.clone());
            let mut vals = x.clone();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            let best_oracle = vals
                .windows(2)
                .map(|w| decrease_oracle(&x, &y, (w[0] + w[1]) / 2.0))
                .fold(0.0f64, f64::max);
            match best_split(&ds, &all(n), &[0], 1) {
                Some(s) => proptest::prop_assert!((s.decrease - best_oracle).abs() < 1e-12),
                None => proptest::prop_assert!(best_oracle < 1e-12),
            }
        }
    }
}
