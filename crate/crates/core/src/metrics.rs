//! Pearson correlation and rank-based AUROC.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Sample Pearson correlation. Undefined for fewer than two points or a
/// constant input.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { expected: x.len(), found: y.len() });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Undefined("pearson needs at least two points"));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("pearson of a zero-variance input"));
    }
    Ok((sxy / math::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Probability that a random positive scores above a random negative, ties
/// counting one half (Mann-Whitney U / (n_pos n_neg)).
pub fn auroc(labels: &[bool], scores: &[f64]) -> Result<f64> {
    if labels.len() != scores.len() {
        return Err(Error::LengthMismatch { expected: labels.len(), found: scores.len() });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Undefined("auroc with NaN scores"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Undefined("auroc needs both classes"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    // Sum of midranks (1-based) of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_tie = order[i..=j].iter().filter(|&&k| labels[k]).count();
        rank_sum += midrank * pos_in_tie as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn brute_auroc(labels: &[bool], scores: &[f64]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    pairs += 1.0;
                    wins += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn pearson_reference_values() {
        let x = [1.0, 2.0, 3.0, 4.5];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.981_980_506_061_965_6).abs() < 1e-12);
        assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(pearson(&[1.0], &[2.0]).is_err());
    }

    #[test]
    fn auroc_reference_values() {
        let labels = [true, false, true, false];
        assert_eq!(auroc(&labels, &[0.9, 0.1, 0.8, 0.2]).unwrap(), 1.0);
        assert_eq!(auroc(&labels, &[0.3; 4]).unwrap(), 0.5);
        let scores = [0.9, 0.8, 0.7, 0.1];
        assert_eq!(brute_auroc(&labels, &scores), 0.75);
        assert_eq!(auroc(&labels, &scores).unwrap(), 0.75);
        assert!(auroc(&[true, true], &[0.1, 0.2]).is_err());
    }

    proptest! {
        #[test]
        fn auroc_matches_pairwise_count(
            data in proptest::collection::vec((any::<bool>(), 0u8..6), 2..40)
        ) {
            let labels: Vec<bool> = data.iter().map(|d| d.0).collect();
            let scores: Vec<f64> = data.iter().map(|d| d.1 as f64 / 5.0).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let fast = auroc(&labels, &scores).unwrap();
            prop_assert!((fast - brute_auroc(&labels, &scores)).abs() < 1e-12);
        }

        #[test]
        fn auroc_invariant_under_monotone_transform(
            data in proptest::collection::vec((any::<bool>(), -3.0f64..3.0), 2..40)
        ) {
            let labels: Vec<bool> = data.iter().map(|d| d.0).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let scores: Vec<f64> = data.iter().map(|d| d.1).collect();
            let squashed: Vec<f64> = scores.iter().map(|&s| math::sigmoid(2.0 * s) * 7.0 - 1.0).collect();
            prop_assert_eq!(auroc(&labels, &scores).unwrap(), auroc(&labels, &squashed).unwrap());
        }

        #[test]
        fn pearson_invariant_under_positive_affine(
            xy in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..30),
            scale in 0.1f64..10.0,
            shift in -10.0f64..10.0,
        ) {
            let x: Vec<f64> = xy.iter().map(|p| p.0).collect();
            let y: Vec<f64> = xy.iter().map(|p| p.1).collect();
            if let Ok(r) = pearson(&x, &y) {
                let x2: Vec<f64> = x.iter().map(|v| v * scale + shift).collect();
                prop_assert!((pearson(&x2, &y).unwrap() - r).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn vec_macro_in_scope() {
        let _ = vec![0u8];
    }
}
