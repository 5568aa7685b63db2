use serde::Serialize;

use crate::error::{Error, Result};

/// ROC curve and area. Thresholds run from the highest score down, so both
/// rates are non-decreasing along them; a frame is called speech when its
/// score is `>=` the threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocResult {
    pub thresholds: Vec<f64>,
    pub tpr: Vec<f64>,
    pub fpr: Vec<f64>,
    pub auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// Order of `scores`, ascending. NaN is rejected beforehand.
fn sorted_order(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    idx
}

fn check(scores: &[f64], labels: &[i8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores vs {} labels", scores.len(), labels.len())));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::InvalidArgument(format!("score {i} is NaN")));
    }
    let n_pos = labels.iter().filter(|&&l| l > 0).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateLabels { n_pos, n_neg });
    }
    Ok((n_pos, n_neg))
}

/// Twice the Mann–Whitney U of the positives, from doubled midranks so
/// every quantity stays an integer.
fn doubled_u(scores: &[f64], labels: &[i8], order: &[usize], n_pos: usize) -> u128 {
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j share the midrank (i+1+j)/2
        let mid2 = (i + 1 + j) as u128;
        let pos = order[i..j].iter().filter(|&&k| labels[k] > 0).count() as u128;
        rank_sum2 += mid2 * pos;
        i = j;
    }
    let p = n_pos as u128;
    rank_sum2 - p * (p + 1)
}

/// Rank-based AUC alone, skipping the curve.
pub fn auc_value(scores: &[f64], labels: &[i8]) -> Result<f64> {
    let (n_pos, n_neg) = check(scores, labels)?;
    let order = sorted_order(scores);
    let u2 = doubled_u(scores, labels, &order, n_pos);
    Ok(u2 as f64 / (2 * n_pos as u128 * n_neg as u128) as f64)
}

/// Area under the ROC curve with ties counted half, plus the curve points.
pub fn auc(scores: &[f64], labels: &[i8]) -> Result<RocResult> {
    let (n_pos, n_neg) = check(scores, labels)?;
    let order = sorted_order(scores);
    let u2 = doubled_u(scores, labels, &order, n_pos);
    let (mut thresholds, mut tpr, mut fpr) = (Vec::new(), Vec::new(), Vec::new());
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut j = order.len();
    while j > 0 {
        let s = scores[order[j - 1]];
        while j > 0 && scores[order[j - 1]] == s {
            if labels[order[j - 1]] > 0 {
                tp += 1;
            } else {
                fp += 1;
            }
            j -= 1;
        }
        thresholds.push(s);
        tpr.push(tp as f64 / n_pos as f64);
        fpr.push(fp as f64 / n_neg as f64);
    }
    Ok(RocResult {
        thresholds,
        tpr,
        fpr,
        auc: u2 as f64 / (2 * n_pos as u128 * n_neg as u128) as f64,
        n_pos,
        n_neg,
    })
}

#[cfg(test)]
pub(crate) fn brute_force_auc(scores: &[f64], labels: &[i8]) -> f64 {
    let (mut num2, mut pairs) = (0u128, 0u128);
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] <= 0 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] > 0 {
                continue;
            }
            pairs += 1;
            num2 += if si > sj { 2 } else if si == sj { 1 } else { 0 };
        }
    }
    num2 as f64 / (2 * pairs) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixtures() {
        let r = auc(&[0.8, 0.35, 0.4, 0.1], &[1, 1, -1, -1]).unwrap();
        assert_eq!(r.auc, 0.75);
        assert_eq!((r.n_pos, r.n_neg), (2, 2));
        assert_eq!(r.thresholds, vec![0.8, 0.4, 0.35, 0.1]);
        assert_eq!(r.tpr, vec![0.5, 0.5, 1.0, 1.0]);
        assert_eq!(r.fpr, vec![0.0, 0.5, 0.5, 1.0]);
        assert_eq!(auc_value(&[0.9, 0.8, 0.1, -0.3], &[1, 1, -1, -1]).unwrap(), 1.0);
        assert_eq!(auc_value(&[0.2; 6], &[1, -1, 1, -1, -1, -1]).unwrap(), 0.5);
    }

    #[test]
    fn trapezoid_agrees_with_rank_form() {
        let s = [0.3, 0.3, 0.1, 0.9, 0.5, 0.5, 0.2];
        let l = [1, -1, -1, 1, 1, -1, -1];
        let r = auc(&s, &l).unwrap();
        let (mut area, mut px, mut py) = (0.0, 0.0, 0.0);
        for (x, y) in r.fpr.iter().zip(&r.tpr) {
            area += (x - px) * (y + py) / 2.0;
            (px, py) = (*x, *y);
        }
        assert!((area - r.auc).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(auc(&[0.1, 0.2], &[1, 1]), Err(Error::DegenerateLabels { n_pos: 2, n_neg: 0 })));
        assert!(matches!(auc(&[0.1], &[1, -1]), Err(Error::Shape(_))));
        assert!(matches!(auc(&[f64::NAN, 0.0], &[1, -1]), Err(Error::InvalidArgument(_))));
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<i8>)> {
        (2usize..300).prop_flat_map(|n| {
            (
                // coarse grid so ties are common
                prop::collection::vec((-20i32..20).prop_map(|v| v as f64 / 10.0), n),
                prop::collection::vec(prop::bool::ANY.prop_map(|b| if b { 1i8 } else { -1 }), n),
            )
        })
    }

    proptest! {
        #[test]
        fn equals_brute_force((s, l) in instance()) {
            prop_assume!(l.contains(&1) && l.contains(&-1));
            prop_assert_eq!(auc_value(&s, &l).unwrap(), brute_force_auc(&s, &l));
        }

        #[test]
        fn monotone_transform_invariant((s, l) in instance()) {
            prop_assume!(l.contains(&1) && l.contains(&-1));
            let a = auc_value(&s, &l).unwrap();
            let t: Vec<f64> = s.iter().map(|v| (3.0 * v).tanh() * 2.0 + 7.0).collect();
            prop_assert_eq!(auc_value(&t, &l).unwrap(), a);
        }

        #[test]
        fn negation_complements(l in prop::collection::vec(prop::bool::ANY, 2..200)) {
            let labels: Vec<i8> = l.iter().map(|&b| if b { 1 } else { -1 }).collect();
            prop_assume!(labels.contains(&1) && labels.contains(&-1));
            // distinct scores, no ties
            let s: Vec<f64> = (0..labels.len()).map(|i| ((i * 7919) % 1009) as f64).collect();
            let neg: Vec<f64> = s.iter().map(|v| -v).collect();
            let a = auc_value(&s, &labels).unwrap();
            prop_assert!((auc_value(&neg, &labels).unwrap() - (1.0 - a)).abs() < 1e-12);
        }

        #[test]
        fn roc_is_monotone((s, l) in instance()) {
            prop_assume!(l.contains(&1) && l.contains(&-1));
            let r = auc(&s, &l).unwrap();
            prop_assert!(r.tpr.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(r.fpr.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(r.thresholds.windows(2).all(|w| w[0] > w[1]));
            prop_assert_eq!(*r.tpr.last().unwrap(), 1.0);
            prop_assert!((0.0..=1.0).contains(&r.auc));
        }
    }
}
