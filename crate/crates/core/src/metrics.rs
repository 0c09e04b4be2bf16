//! Selection metrics and their aggregation over trials.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, Discrete};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SelectionMetrics {
    /// TP/(TP+FP); `None` when no coefficient was selected.
    pub precision: Option<f64>,
    pub recall: f64,
    pub rss: f64,
    pub fpr: Option<f64>,
    pub tp: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub precision_se: Option<f64>,
    pub recall_se: f64,
    pub rss_se: f64,
    pub trials: usize,
    /// Trials left out of the precision average because it was undefined.
    pub precision_excluded: usize,
}

/// Sample mean and standard error (zero for a single value).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// E[TP/(TP+FP) | defined] and P(defined) for FP ~ Binomial(n, p).
pub fn expected_precision(tp: usize, n: usize, p: f64) -> (f64, f64) {
    let p = p.clamp(0.0, 1.0);
    if tp == 0 {
        // Precision is 0 whenever anything is selected.
        let defined = 1.0 - (1.0 - p).powi(n as i32);
        return (0.0, defined);
    }
    if p == 0.0 || n == 0 {
        return (1.0, 1.0);
    }
    let binom = Binomial::new(p, n as u64).expect("valid binomial parameters");
    let tp = tp as f64;
    let value = (0..=n as u64)
        .map(|k| binom.pmf(k) * tp / (tp + k as f64))
        .sum::<f64>();
    (value, 1.0)
}

impl SelectionMetrics {
    /// Metrics of a single fit.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, rss: f64, n_inactive: usize) -> Self {
        let precision = (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64);
        let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        Self {
            precision,
            recall,
            rss,
            fpr: (n_inactive > 0).then(|| fp as f64 / n_inactive as f64),
            tp: tp as f64,
            fp: fp as f64,
            fn_: fn_ as f64,
            precision_se: precision.map(|_| 0.0),
            recall_se: 0.0,
            rss_se: 0.0,
            trials: 1,
            precision_excluded: usize::from(precision.is_none()),
        }
    }

    /// Means and standard errors over per-trial metrics. Precision is
    /// averaged over the trials where it is defined.
    pub fn aggregate(items: &[SelectionMetrics]) -> Self {
        let col = |f: &dyn Fn(&SelectionMetrics) -> f64| items.iter().map(f).collect::<Vec<f64>>();
        let precisions: Vec<f64> = items.iter().filter_map(|m| m.precision).collect();
        let fprs: Vec<f64> = items.iter().filter_map(|m| m.fpr).collect();
        let (recall, recall_se) = mean_se(&col(&|m| m.recall));
        let (rss, rss_se) = mean_se(&col(&|m| m.rss));
        let (precision, precision_se) = if precisions.is_empty() {
            (None, None)
        } else {
            let (p, se) = mean_se(&precisions);
            (Some(p), Some(se))
        };
        Self {
            precision,
            recall,
            rss,
            fpr: (!fprs.is_empty()).then(|| mean_se(&fprs).0),
            tp: mean_se(&col(&|m| m.tp)).0,
            fp: mean_se(&col(&|m| m.fp)).0,
            fn_: mean_se(&col(&|m| m.fn_)).0,
            precision_se,
            recall_se,
            rss_se,
            trials: items.len(),
            precision_excluded: items.len() - precisions.len(),
        }
    }
}
