//! Point-error metrics and the concordance index.
//!
//! Point metrics use observed samples only, since a censored time is just
//! a lower bound. The concordance index uses every sample: a censored one
//! can still be the later member of a comparable pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccAt {
    pub threshold: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mae: f64,
    pub mre: f64,
    pub rmse: f64,
    pub msle: f64,
    pub mdae: f64,
    pub acc_at: Vec<AccAt>,
    pub ci: Option<f64>,
    /// Number of observed samples the point metrics were computed over.
    pub n_observed: usize,
}

impl EvalReport {
    pub fn csv_header(&self) -> String {
        let mut cols: Vec<String> = ["mae", "mre", "rmse", "msle", "mdae", "ci", "n_observed"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        cols.extend(self.acc_at.iter().map(|a| format!("acc@{}", a.threshold)));
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols = vec![
            self.mae.to_string(),
            self.mre.to_string(),
            self.rmse.to_string(),
            self.msle.to_string(),
            self.mdae.to_string(),
            self.ci.map_or(String::new(), |c| c.to_string()),
            self.n_observed.to_string(),
        ];
        cols.extend(self.acc_at.iter().map(|a| a.value.to_string()));
        cols.join(",")
    }
}

fn check_lengths(truth: &[(f64, bool)], predicted: &[f64]) -> Result<()> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} truth rows but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    if predicted.iter().any(|p| p.is_nan()) {
        return Err(Error::InvalidArgument("prediction is NaN".into()));
    }
    Ok(())
}

/// Even-length slices take the mean of the two middle values.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Point metrics over observed samples; `ci` is left unset.
pub fn point_metrics(truth: &[(f64, bool)], predicted: &[f64], thresholds: &[f64]) -> Result<EvalReport> {
    check_lengths(truth, predicted)?;
    let pairs: Vec<(f64, f64)> = truth
        .iter()
        .zip(predicted)
        .filter(|((_, y), _)| *y)
        .map(|(&(t, _), &p)| (t, p))
        .collect();
    if pairs.is_empty() {
        return Err(Error::NoObservedSamples);
    }
    let n = pairs.len() as f64;
    let abs: Vec<f64> = pairs.iter().map(|(t, p)| (t - p).abs()).collect();
    let mean = |f: &dyn Fn(&(f64, f64)) -> f64| pairs.iter().map(f).sum::<f64>() / n;
    let mut thresholds = thresholds.to_vec();
    thresholds.sort_by(f64::total_cmp);
    Ok(EvalReport {
        mae: abs.iter().sum::<f64>() / n,
        mre: mean(&|(t, p)| ((t - p) / t).abs()),
        rmse: mean(&|(t, p)| (t - p) * (t - p)).sqrt(),
        msle: mean(&|(t, p)| (t.ln_1p() - p.ln_1p()).powi(2)),
        mdae: median(&abs),
        acc_at: thresholds
            .into_iter()
            .map(|th| AccAt {
                threshold: th,
                value: abs.iter().filter(|&&e| e < th).count() as f64 / n,
            })
            .collect(),
        ci: None,
        n_observed: pairs.len(),
    })
}

/// Fenwick tree over prediction ranks.
struct Fenwick(Vec<u64>);

impl Fenwick {
    fn add(&mut self, i: usize) {
        let mut i = i + 1;
        while i < self.0.len() {
            self.0[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted ranks `< i`.
    fn prefix(&self, i: usize) -> u64 {
        let mut i = i;
        let mut s = 0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

/// Harrell's concordance: over pairs with `t_i < t_j` and sample `i`
/// observed, the fraction with `pred_i < pred_j`, ties counting one half.
/// Runs in `O(N log N)`.
pub fn concordance_index(truth: &[(f64, bool)], predicted: &[f64]) -> Result<f64> {
    let (half_units, pairs) = concordance_counts(truth, predicted)?;
    if pairs == 0 {
        return Err(Error::InvalidArgument("no comparable pairs".into()));
    }
    Ok(half_units as f64 / (2 * pairs) as f64)
}

/// `(2 * concordant + tied, comparable)` pair counts.
pub fn concordance_counts(truth: &[(f64, bool)], predicted: &[f64]) -> Result<(u64, u64)> {
    check_lengths(truth, predicted)?;
    let n = truth.len();
    let mut sorted_preds = predicted.to_vec();
    sorted_preds.sort_by(f64::total_cmp);
    sorted_preds.dedup();
    let rank = |p: f64| sorted_preds.partition_point(|&q| q < p);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| truth[b].0.total_cmp(&truth[a].0));

    let mut tree = Fenwick(vec![0; sorted_preds.len() + 1]);
    let mut inserted = 0u64;
    let (mut half_units, mut pairs) = (0u64, 0u64);
    let mut start = 0;
    while start < n {
        let t = truth[order[start]].0;
        let end = start + order[start..].iter().take_while(|&&i| truth[i].0 == t).count();
        for &i in &order[start..end] {
            if !truth[i].1 {
                continue;
            }
            let r = rank(predicted[i]);
            let below_or_equal = tree.prefix(r + 1);
            let ties = below_or_equal - tree.prefix(r);
            half_units += 2 * (inserted - below_or_equal) + ties;
            pairs += inserted;
        }
        for &i in &order[start..end] {
            tree.add(rank(predicted[i]));
            inserted += 1;
        }
        start = end;
    }
    Ok((half_units, pairs))
}

/// Point metrics plus the concordance index.
pub fn evaluate(truth: &[(f64, bool)], predicted: &[f64], thresholds: &[f64]) -> Result<EvalReport> {
    let mut report = point_metrics(truth, predicted, thresholds)?;
    report.ci = concordance_index(truth, predicted).ok();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_counts(truth: &[(f64, bool)], pred: &[f64]) -> (u64, u64) {
        let (mut h, mut p) = (0, 0);
        for i in 0..truth.len() {
            for j in 0..truth.len() {
                if truth[i].1 && truth[i].0 < truth[j].0 {
                    p += 1;
                    if pred[i] < pred[j] {
                        h += 2;
                    } else if pred[i] == pred[j] {
                        h += 1;
                    }
                }
            }
        }
        (h, p)
    }

    #[test]
    fn two_point_arithmetic() {
        let truth = [(1.0, true), (2.0, true)];
        let r = point_metrics(&truth, &[2.0, 4.0], &[1.0, 2.5]).unwrap();
        assert_eq!(r.mae, 1.5);
        assert_eq!(r.mre, 1.0);
        assert!((r.rmse - 2.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.mdae, 1.5);
        assert_eq!(r.acc_at[0].value, 0.0);
        assert_eq!(r.acc_at[1].value, 1.0);
    }

    #[test]
    fn perfect_predictions() {
        let truth = [(1.0, true), (3.0, true), (7.0, false)];
        let r = evaluate(&truth, &[1.0, 3.0, 9.0], &[0.1, 1.0]).unwrap();
        assert_eq!((r.mae, r.mre, r.rmse, r.msle, r.mdae), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert!(r.acc_at.iter().all(|a| a.value == 1.0));
        assert_eq!(r.n_observed, 2);
        assert_eq!(r.ci, Some(1.0));
    }

    #[test]
    fn msle_plug_in() {
        let r = point_metrics(&[(std::f64::consts::E - 1.0, true)], &[0.0], &[]).unwrap();
        assert!((r.msle - 1.0).abs() < 1e-15);
    }

    #[test]
    fn point_metrics_need_observed() {
        assert_eq!(point_metrics(&[(1.0, false)], &[1.0], &[]), Err(Error::NoObservedSamples));
        assert!(point_metrics(&[(1.0, true)], &[1.0, 2.0], &[]).is_err());
    }

    #[test]
    fn ordered_and_reversed() {
        let truth: Vec<(f64, bool)> = (1..=5).map(|i| (i as f64, true)).collect();
        let up: Vec<f64> = (1..=5).map(|i| i as f64 * 10.0).collect();
        let down: Vec<f64> = up.iter().rev().copied().collect();
        assert_eq!(concordance_index(&truth, &up).unwrap(), 1.0);
        assert_eq!(concordance_index(&truth, &down).unwrap(), 0.0);
        assert_eq!(concordance_index(&truth, &[1.0; 5]).unwrap(), 0.5);
    }

    #[test]
    fn no_comparable_pairs() {
        assert!(concordance_index(&[(1.0, false), (2.0, false)], &[1.0, 2.0]).is_err());
        assert!(concordance_index(&[(1.0, true), (1.0, true)], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn csv_row_has_header_width() {
        let r = evaluate(&[(1.0, true), (2.0, true)], &[1.5, 2.5], &[0.5, 1.0]).unwrap();
        assert_eq!(r.csv_header().split(',').count(), r.csv_row().split(',').count());
    }

    proptest! {
        #[test]
        fn matches_pair_enumeration(
            rows in proptest::collection::vec((0u8..8, any::<bool>(), 0u8..6), 2..40)
        ) {
            let truth: Vec<(f64, bool)> = rows.iter().map(|&(t, y, _)| (t as f64, y)).collect();
            let pred: Vec<f64> = rows.iter().map(|&(_, _, p)| p as f64).collect();
            prop_assert_eq!(concordance_counts(&truth, &pred).unwrap(), brute_counts(&truth, &pred));
        }

        #[test]
        fn invariant_under_monotone_transform(
            rows in proptest::collection::vec((0.1f64..10.0, any::<bool>(), -5.0f64..5.0), 2..30)
        ) {
            let truth: Vec<(f64, bool)> = rows.iter().map(|&(t, y, _)| (t, y)).collect();
            let pred: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let moved: Vec<f64> = pred.iter().map(|p| p.exp() * 3.0 + 1.0).collect();
            prop_assert_eq!(concordance_counts(&truth, &pred).unwrap(), concordance_counts(&truth, &moved).unwrap());
        }

        #[test]
        fn acc_is_monotone(
            errs in proptest::collection::vec(0.0f64..5.0, 1..20),
            mut th in proptest::collection::vec(0.0f64..6.0, 1..6)
        ) {
            let truth: Vec<(f64, bool)> = errs.iter().map(|_| (1.0, true)).collect();
            let pred: Vec<f64> = errs.iter().map(|e| 1.0 + e).collect();
            th.sort_by(f64::total_cmp);
            let r = point_metrics(&truth, &pred, &th).unwrap();
            prop_assert!(r.acc_at.windows(2).all(|w| w[0].value <= w[1].value));
        }
    }
}
