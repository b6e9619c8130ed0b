//! Confusion matrix, the eight evaluation metrics, ROC curve and AUC.
//!
//! The minority class (label `1`) is the positive class.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("labels ({0}) and predictions ({1}) differ in length")]
    LengthMismatch(usize, usize),
    #[error("no samples to evaluate")]
    Empty,
    #[error("ROC needs both classes in the labels")]
    SingleClass,
    #[error("score at position {0} is not finite")]
    NonFiniteScore(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }
}

pub fn confusion(labels: &[u8], predictions: &[u8]) -> Result<ConfusionMatrix, MetricsError> {
    if labels.len() != predictions.len() {
        return Err(MetricsError::LengthMismatch(labels.len(), predictions.len()));
    }
    if labels.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut cm = ConfusionMatrix::default();
    for (&y, &p) in labels.iter().zip(predictions) {
        match (y != 0, p != 0) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// A metric value; `None` when its denominator is zero.
pub type MetricValue = Option<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: MetricValue,
    pub precision: MetricValue,
    pub recall: MetricValue,
    pub f1: MetricValue,
    pub g_mean: MetricValue,
    pub specificity: MetricValue,
    pub kappa: MetricValue,
    pub auc: MetricValue,
}

/// Metric names in report order.
pub const METRIC_NAMES: [&str; 8] = ["accuracy", "precision", "recall", "f1", "g_mean", "specificity", "kappa", "auc"];

impl MetricsReport {
    pub fn values(&self) -> [MetricValue; 8] {
        [
            self.accuracy,
            self.precision,
            self.recall,
            self.f1,
            self.g_mean,
            self.specificity,
            self.kappa,
            self.auc,
        ]
    }

    pub fn kappa_band(&self) -> Option<KappaBand> {
        self.kappa.map(KappaBand::of)
    }
}

/// Reliability band of a kappa value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KappaBand {
    /// kappa >= 0.75
    Robust,
    /// 0.4 <= kappa < 0.75
    General,
    /// kappa < 0.4
    Unreliable,
}

impl KappaBand {
    pub fn of(kappa: f64) -> Self {
        if kappa >= 0.75 {
            Self::Robust
        } else if kappa >= 0.4 {
            Self::General
        } else {
            Self::Unreliable
        }
    }
}

fn ratio(num: u64, den: u64) -> MetricValue {
    (den > 0).then(|| num as f64 / den as f64)
}

/// All threshold metrics from a confusion matrix; `auc` is left `None`.
///
/// Kappa uses chance agreement from the marginals and is evaluated exactly
/// in integers as `(n(tp+tn) - S) / (n^2 - S)` with
/// `S = (tp+fp)(tp+fn) + (fn+tn)(fp+tn)`, then divided once.
pub fn compute_metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let &ConfusionMatrix { tp, fn_, fp, tn } = cm;
    let n = cm.total();
    let recall = ratio(tp, tp + fn_);
    let specificity = ratio(tn, tn + fp);
    // sqrt of one correctly rounded ratio rather than of a product of two rounded ones
    let g_mean_den = (tp + fn_) * (tn + fp);
    let g_mean = (g_mean_den > 0).then(|| ((tp * tn) as f64 / g_mean_den as f64).sqrt());
    let (tp_, fn__, fp_, tn_, n_) = (tp as i128, fn_ as i128, fp as i128, tn as i128, n as i128);
    let chance = (tp_ + fp_) * (tp_ + fn__) + (fn__ + tn_) * (fp_ + tn_);
    let kappa_den = n_ * n_ - chance;
    let kappa = (kappa_den != 0).then(|| (n_ * (tp_ + tn_) - chance) as f64 / kappa_den as f64);
    MetricsReport {
        accuracy: ratio(tp + tn, n),
        precision: ratio(tp, tp + fp),
        recall,
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
        g_mean,
        specificity,
        kappa,
        auc: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC points from a descending sweep over the distinct scores.
///
/// Starts at `(0, 0)` (threshold `+inf`) and ends at `(1, 1)`; rows with tied
/// scores enter together as one point.
pub fn roc_curve(labels: &[u8], scores: &[f64]) -> Result<Vec<RocPoint>, MetricsError> {
    if labels.len() != scores.len() {
        return Err(MetricsError::LengthMismatch(labels.len(), scores.len()));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFiniteScore(i));
    }
    let positives = labels.iter().filter(|&&y| y != 0).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] != 0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint { fpr: fp as f64 / negatives as f64, tpr: tp as f64 / positives as f64 });
    }
    Ok(points)
}

/// Trapezoidal area under an ROC polyline.
pub fn auc(points: &[RocPoint]) -> f64 {
    points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0).sum()
}

/// Metrics for probability scores: hard labels at `score >= threshold`, AUC
/// from the full score sweep.
pub fn evaluate(labels: &[u8], scores: &[f64], threshold: f64) -> Result<(ConfusionMatrix, MetricsReport, Vec<RocPoint>), MetricsError> {
    let preds: Vec<u8> = scores.iter().map(|&s| u8::from(s >= threshold)).collect();
    let cm = confusion(labels, &preds)?;
    let roc = roc_curve(labels, scores)?;
    let mut report = compute_metrics(&cm);
    report.auc = Some(auc(&roc));
    Ok((cm, report, roc))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<RocPoint> {
        v.iter().map(|&(fpr, tpr)| RocPoint { fpr, tpr }).collect()
    }

    #[test]
    fn worked_confusion_example() {
        let cm = confusion(&[1, 1, 1, 0, 0, 0], &[1, 1, 0, 0, 0, 1]).unwrap();
        assert_eq!(cm, ConfusionMatrix { tp: 2, fn_: 1, fp: 1, tn: 2 });
        let m = compute_metrics(&cm);
        let two_thirds = 2.0 / 3.0;
        assert!((m.accuracy.unwrap() - 4.0 / 6.0).abs() < 1e-15);
        for v in [m.recall, m.specificity, m.precision, m.f1, m.g_mean] {
            assert!((v.unwrap() - two_thirds).abs() < 1e-15);
        }
        assert!((m.kappa.unwrap() - 1.0 / 3.0).abs() <= 1e-9);
        assert_eq!(m.kappa_band(), Some(KappaBand::Unreliable));
        assert_eq!(m.auc, None);
    }

    #[test]
    fn perfect_and_inverted() {
        let m = compute_metrics(&confusion(&[1, 0, 1, 0], &[1, 0, 1, 0]).unwrap());
        for v in m.values().iter().take(7) {
            assert_eq!(*v, Some(1.0));
        }
        let cm = confusion(&[1, 0, 1, 0], &[0, 1, 0, 1]).unwrap();
        assert_eq!((cm.tp, cm.tn), (0, 0));
    }

    #[test]
    fn chance_level_kappa_is_zero() {
        // accuracy 0.5 with p_e 0.5
        let m = compute_metrics(&ConfusionMatrix { tp: 1, fn_: 1, fp: 1, tn: 1 });
        assert_eq!(m.kappa, Some(0.0));
    }

    #[test]
    fn undefined_denominators() {
        let m = compute_metrics(&ConfusionMatrix { tp: 0, fn_: 3, fp: 0, tn: 5 });
        assert_eq!(m.precision, None);
        assert_eq!(m.recall, Some(0.0));
        assert_eq!(m.f1, Some(0.0));
        let m = compute_metrics(&ConfusionMatrix { tp: 0, fn_: 0, fp: 0, tn: 5 });
        assert_eq!(m.recall, None);
        assert_eq!(m.g_mean, None);
        assert_eq!(m.kappa, None);
        assert_eq!(m.f1, None);
    }

    #[test]
    fn confusion_errors() {
        assert_eq!(confusion(&[1], &[1, 0]), Err(MetricsError::LengthMismatch(1, 2)));
        assert_eq!(confusion(&[], &[]), Err(MetricsError::Empty));
    }

    #[test]
    fn kappa_band_boundaries() {
        assert_eq!(KappaBand::of(0.75), KappaBand::Robust);
        assert_eq!(KappaBand::of(0.7499999), KappaBand::General);
        assert_eq!(KappaBand::of(0.4), KappaBand::General);
        assert_eq!(KappaBand::of(0.3999999), KappaBand::Unreliable);
        assert_eq!(KappaBand::of(-1.0), KappaBand::Unreliable);
    }

    #[test]
    fn roc_examples() {
        let perfect = roc_curve(&[1, 1, 0, 0], &[0.9, 0.8, 0.2, 0.1]).unwrap();
        assert_eq!(perfect, pts(&[(0.0, 0.0), (0.0, 0.5), (0.0, 1.0), (0.5, 1.0), (1.0, 1.0)]));
        assert_eq!(auc(&perfect), 1.0);
        let two_level = roc_curve(&[1, 1, 0, 0], &[0.9, 0.9, 0.1, 0.1]).unwrap();
        assert_eq!(two_level, pts(&[(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)]));

        let flat = roc_curve(&[1, 0, 1, 0], &[0.3; 4]).unwrap();
        assert_eq!(flat, pts(&[(0.0, 0.0), (1.0, 1.0)]));
        assert_eq!(auc(&flat), 0.5);

        let mixed = roc_curve(&[1, 0, 1, 0], &[0.9, 0.8, 0.4, 0.3]).unwrap();
        assert_eq!(mixed, pts(&[(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]));
        assert_eq!(auc(&mixed), 0.75);
    }

    #[test]
    fn roc_errors() {
        assert_eq!(roc_curve(&[1, 1], &[0.1, 0.2]), Err(MetricsError::SingleClass));
        assert_eq!(roc_curve(&[1, 0], &[0.1, f64::NAN]), Err(MetricsError::NonFiniteScore(1)));
    }

    #[test]
    fn evaluate_thresholds_at_half() {
        let (cm, m, _) = evaluate(&[1, 0, 1, 0], &[0.5, 0.49, 0.9, 0.1], 0.5).unwrap();
        assert_eq!(cm, ConfusionMatrix { tp: 2, fn_: 0, fp: 0, tn: 2 });
        assert_eq!(m.auc, Some(1.0));
    }
}
