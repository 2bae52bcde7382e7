//! Detection scoring.
//!
//! Solver outputs are turned into per-atom scores (`|θ_i|` for CPA, row norms
//! for the baselines) and scored against the true active set with the
//! F-measure at the threshold that maximizes it for that trial.

use std::collections::BTreeSet;

use crate::signal::ActiveSet;
use crate::{Error, Result};

/// Fraction of the peak score an atom must exceed to count toward
/// [`DensityReport::support_fraction`].
pub const SUPPORT_CUTOFF: f64 = 0.1;

/// Precision, recall and F-measure of one detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrfResult {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    /// Score threshold that produced the detection, when one was scanned.
    pub threshold: Option<f64>,
}

impl PrfResult {
    fn from_counts(hits: usize, n_detected: usize, n_truth: usize) -> Self {
        let (precision, recall) = if n_detected == 0 && n_truth == 0 {
            (1.0, 1.0)
        } else {
            let ratio = |den: usize| if den == 0 { 0.0 } else { hits as f64 / den as f64 };
            (ratio(n_detected), ratio(n_truth))
        };
        let f_measure = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        PrfResult {
            precision,
            recall,
            f_measure,
            threshold: None,
        }
    }
}

/// How sparse a score vector is.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityReport {
    /// Fraction of atoms scoring above [`SUPPORT_CUTOFF`] times the peak.
    pub support_fraction: f64,
    pub peak_score: f64,
    /// `Σ|s| / (√M ‖s‖₂)`: `1/√M` for a one-hot vector, 1 for a constant one.
    pub l1_l2_ratio: f64,
}

/// Mean and sample standard deviation over trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSummary {
    pub mean: f64,
    /// Zero when `n == 1`.
    pub std: f64,
    pub n: usize,
}

/// F-measure of an arbitrary detected set against an arbitrary reference set.
///
/// Both empty counts as a perfect detection. Otherwise precision is
/// `|D ∩ T| / |D|` and recall `|D ∩ T| / |T|`, each 0 when its denominator is.
pub fn f_measure_sets(detected: &[usize], truth: &[usize]) -> PrfResult {
    let d: BTreeSet<usize> = detected.iter().copied().collect();
    let t: BTreeSet<usize> = truth.iter().copied().collect();
    let hits = d.intersection(&t).count();
    PrfResult::from_counts(hits, d.len(), t.len())
}

pub fn f_measure(detected: &[usize], truth: &ActiveSet) -> PrfResult {
    f_measure_sets(detected, truth.indices())
}

/// Best F-measure over all thresholds on `|score|`.
///
/// Candidate thresholds are one above the largest absolute score, the midpoints
/// between consecutive distinct sorted absolute scores, and one below the
/// smallest. An atom is detected when its absolute score exceeds the
/// threshold. Among equally good thresholds the one detecting fewer atoms wins.
pub fn best_threshold_f(scores: &[f64], truth: &ActiveSet) -> Result<PrfResult> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::arg("scores must be finite"));
    }
    let m = scores.len();
    if let Some(&bad) = truth.indices().iter().find(|&&i| i >= m) {
        return Err(Error::arg(format!("truth index {bad} >= {m} scores")));
    }
    let mut is_true = vec![false; m];
    for &i in truth.indices() {
        is_true[i] = true;
    }
    let n_truth = truth.k();

    let mut order: Vec<(f64, usize)> = scores.iter().map(|s| s.abs()).zip(0..).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));

    let top = order.first().map_or(0.0, |o| o.0);
    let mut best = PrfResult::from_counts(0, 0, n_truth);
    best.threshold = Some(top + 1.0);

    let mut hits = 0;
    for j in 1..=m {
        let (value, idx) = order[j - 1];
        if is_true[idx] {
            hits += 1;
        }
        let boundary = j == m || order[j].0 < value;
        if !boundary {
            continue;
        }
        let candidate = PrfResult::from_counts(hits, j, n_truth);
        if candidate.f_measure > best.f_measure {
            let threshold = if j == m {
                value - 1.0
            } else {
                0.5 * (value + order[j].0)
            };
            best = PrfResult {
                threshold: Some(threshold),
                ..candidate
            };
        }
    }
    Ok(best)
}

pub fn aggregate_trials(values: &[f64]) -> Result<TrialSummary> {
    let n = values.len();
    if n == 0 {
        return Err(Error::arg("cannot aggregate an empty list of trials"));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(TrialSummary { mean, std, n })
}

pub fn density_report(scores: &[f64]) -> Result<DensityReport> {
    let abs: Vec<f64> = scores.iter().map(|s| s.abs()).collect();
    let peak = abs.iter().copied().fold(0.0, f64::max);
    if peak == 0.0 || !peak.is_finite() {
        return Err(Error::Degenerate(
            "density is undefined for an all-zero score vector".into(),
        ));
    }
    let m = abs.len() as f64;
    let above = abs.iter().filter(|&&s| s > SUPPORT_CUTOFF * peak).count();
    let l1: f64 = abs.iter().sum();
    let l2 = abs.iter().map(|s| s * s).sum::<f64>().sqrt();
    Ok(DensityReport {
        support_fraction: above as f64 / m,
        peak_score: peak,
        l1_l2_ratio: (l1 / (m.sqrt() * l2)).min(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth(indices: &[usize], m: usize) -> ActiveSet {
        ActiveSet::new(indices.to_vec(), m).unwrap()
    }

    #[test]
    fn perfect_detection() {
        let r = f_measure(&[2, 5], &truth(&[5, 2], 10));
        assert_eq!((r.precision, r.recall, r.f_measure), (1.0, 1.0, 1.0));
    }

    #[test]
    fn superset_detection() {
        let r = f_measure(&[1, 2, 3, 4], &truth(&[1, 2], 10));
        assert_eq!((r.precision, r.recall), (0.5, 1.0));
        assert!((r.f_measure - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn disjoint_and_empty_cases() {
        assert_eq!(f_measure(&[0, 1], &truth(&[2, 3], 5)).f_measure, 0.0);
        let r = f_measure(&[], &truth(&[2], 5));
        assert_eq!((r.precision, r.f_measure), (0.0, 0.0));
        assert_eq!(f_measure(&[], &ActiveSet::empty()).f_measure, 1.0);
        assert_eq!(f_measure(&[1], &ActiveSet::empty()).f_measure, 0.0);
    }

    #[test]
    fn indicator_scores() {
        let r = best_threshold_f(&[0.0, 1.0, 0.0, 1.0], &truth(&[1, 3], 4)).unwrap();
        assert_eq!(r.f_measure, 1.0);
        let th = r.threshold.unwrap();
        assert!(th > 0.0 && th < 1.0);
    }

    #[test]
    fn separated_scores() {
        let r = best_threshold_f(&[0.9, 0.8, 0.1, 0.05], &truth(&[0, 1], 4)).unwrap();
        assert_eq!(r.f_measure, 1.0);
        let th = r.threshold.unwrap();
        assert!(th > 0.1 && th < 0.8);
    }

    #[test]
    fn negative_scores_use_magnitude() {
        let r = best_threshold_f(&[-0.9, 0.2, 0.1], &truth(&[0], 3)).unwrap();
        assert_eq!(r.f_measure, 1.0);
    }

    #[test]
    fn ties_prefer_fewer_detections() {
        // truth {0, 3}, scores ordered 0 > 1 > 2 > 3: detecting the top one
        // (P=1, R=1/2) and all four (P=1/2, R=1) both give F = 2/3.
        let r = best_threshold_f(&[4.0, 3.0, 2.0, 1.0], &truth(&[0, 3], 4)).unwrap();
        assert!((r.f_measure - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.recall, 0.5);
        assert_eq!(r.threshold, Some(3.5));
    }

    #[test]
    fn equal_scores_are_detected_together() {
        let r = best_threshold_f(&[1.0, 1.0, 0.0], &truth(&[0], 3)).unwrap();
        assert!((r.f_measure - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn threshold_errors() {
        assert!(best_threshold_f(&[1.0, f64::NAN], &truth(&[0], 2)).is_err());
        let t = ActiveSet::new(vec![5], 10).unwrap();
        assert!(best_threshold_f(&[1.0, 2.0], &t).is_err());
        let r = best_threshold_f(&[], &ActiveSet::empty()).unwrap();
        assert_eq!(r.f_measure, 1.0);
    }

    #[test]
    fn aggregation() {
        let s = aggregate_trials(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((s.mean, s.std, s.n), (1.0, 0.0, 3));
        let s = aggregate_trials(&[0.0, 1.0]).unwrap();
        assert_eq!(s.mean, 0.5);
        assert!((s.std - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let s = aggregate_trials(&[0.3]).unwrap();
        assert_eq!((s.std, s.n), (0.0, 1));
        assert!(aggregate_trials(&[]).is_err());
    }

    #[test]
    fn density_extremes() {
        let m = 16;
        let mut one_hot = vec![0.0; m];
        one_hot[3] = -2.0;
        let r = density_report(&one_hot).unwrap();
        assert_eq!(r.support_fraction, 1.0 / m as f64);
        assert!((r.l1_l2_ratio - 0.25).abs() < 1e-15);
        assert_eq!(r.peak_score, 2.0);
        let r = density_report(&vec![0.7; m]).unwrap();
        assert_eq!(r.support_fraction, 1.0);
        assert!((r.l1_l2_ratio - 1.0).abs() < 1e-12);
        assert!(matches!(density_report(&[0.0, 0.0]), Err(Error::Degenerate(_))));
    }
}
