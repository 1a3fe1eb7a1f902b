use crate::error::{Error, Result};

/// Area under the ROC curve of `scores` against 0/1 `relevant` labels:
/// `P(score_relevant > score_noise) + P(tie) / 2`, via average ranks.
pub fn auc(scores: &[f64], relevant: &[bool]) -> Result<f64> {
    if scores.len() != relevant.len() {
        return Err(Error::InvalidParameter("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Numeric("NaN score".into()));
    }
    let n1 = relevant.iter().filter(|&&r| r).count();
    let n0 = relevant.len() - n1;
    if n1 == 0 || n0 == 0 {
        return Err(Error::InvalidParameter("AUC needs both relevant and noise features".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    let r1: f64 = ranks.iter().zip(relevant).filter(|(_, &r)| r).map(|(r, _)| r).sum();
    let n1f = n1 as f64;
    Ok((r1 - n1f * (n1f + 1.0) / 2.0) / (n1f * n0 as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Pairwise definition.
    fn auc_pairs(scores: &[f64], relevant: &[bool]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (i, &ri) in relevant.iter().enumerate() {
            for (j, &rj) in relevant.iter().enumerate() {
                if ri && !rj {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn examples() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(auc(&s, &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auc(&s, &[true, true, false, false]).unwrap(), 0.0);
        assert_eq!(auc(&s, &[false, true, false, true]).unwrap(), 0.75);
        assert_eq!(auc(&[7.0; 6], &[true, false, true, false, false, false]).unwrap(), 0.5);
        assert!(auc(&s, &[true; 4]).is_err());
        assert!(auc(&[f64::NAN, 1.0], &[true, false]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn matches_pairwise_definition(
            scores in proptest::collection::vec(0u8..6, 2..30),
            labels in proptest::collection::vec(proptest::bool::ANY, 30),
        ) {
            let s: Vec<f64> = scores.iter().map(|&v| v as f64).collect();
            let l = &labels[..s.len()];
            proptest::prop_assume!(l.iter().any(|&b| b) && l.iter().any(|&b| !b));
            let a = auc(&s, l).unwrap();
            proptest::prop_assert!((a - auc_pairs(&s, l)).abs() < 1e-12);
        }

        #[test]
        fn invariant_under_monotone_maps(
            scores in proptest::collection::vec(-5.0f64..5.0, 2..30),
            labels in proptest::collection::vec(proptest::bool::ANY, 30),
            a in 0.1f64..10.0,
            b in -3.0f64..3.0,
        ) {
            let l = &labels[..scores.len()];
            proptest::prop_assume!(l.iter().any(|&v| v) && l.iter().any(|&v| !v));
            let base = auc(&scores, l).unwrap();
            let maps: [&dyn Fn(f64) -> f64; 3] = [
                &|x| a * x + b,
                &|x| x.exp(),
                &|x| x.powi(3) + x,
            ];
            for f in maps {
                let t: Vec<f64> = scores.iter().map(|&x| f(x)).collect();
                proptest::prop_assert_eq!(auc(&t, l).unwrap(), base);
            }
        }
    }
}
