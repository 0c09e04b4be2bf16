use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{EosProblem, EosSolution, OrderParams};
use crate::metrics::{expected_precision, mean_se, SelectionMetrics};
use crate::special::{soft_threshold, two_sided_tail};

/// λM/√(HN), the threshold of the inactive scalar estimator.
pub fn inactive_threshold(params: &OrderParams, problem: &EosProblem) -> f64 {
    problem.lambda_m_over_sqrt_n() / params.h.sqrt()
}

/// Predicted precision, recall, RSS and FPR.
///
/// Inactive false positives are Binomial(N − d − 1, FPR); precision is the
/// exact expectation of TP/(TP + FP) under that law, averaged over trials
/// on which it is defined.
pub fn predict_metrics(solution: &EosSolution, problem: &EosProblem) -> SelectionMetrics {
    let params = &solution.params;
    let fpr = two_sided_tail(inactive_threshold(params, problem));
    let n_inactive = problem.n - problem.d - 1;
    let d = problem.d as f64;
    let mut recalls = Vec::new();
    let mut rss = Vec::new();
    let mut precisions = Vec::new();
    let (mut num, mut den) = (0.0, 0.0);
    let mut excluded = 0;
    for est in &solution.trials.estimates {
        let tp = est.iter().filter(|&&v| v != 0.0).count();
        recalls.push(tp as f64 / d);
        rss.push(est.iter().map(|v| (v - problem.k0).powi(2)).sum::<f64>() + params.r);
        let (value, defined) = expected_precision(tp, n_inactive, fpr);
        if defined > 0.0 {
            num += value * defined;
            den += defined;
            precisions.push(value);
        } else {
            excluded += 1;
        }
    }
    let (recall, recall_se) = mean_se(&recalls);
    let (rss_mean, rss_se) = mean_se(&rss);
    let (precision, precision_se) = if den > 0.0 {
        (Some(num / den), Some(mean_se(&precisions).1))
    } else {
        (None, None)
    };
    let tp = recall * d;
    SelectionMetrics {
        precision,
        recall,
        rss: rss_mean,
        fpr: Some(fpr),
        tp,
        fp: n_inactive as f64 * fpr,
        fn_: d - tp,
        precision_se,
        recall_se,
        rss_se,
        trials: solution.trials.len(),
        precision_excluded: excluded,
    }
}

/// Draws of the inactive scalar estimator (√H/(K√N))·soft(z, λM/√(HN)).
pub fn sample_inactive<R: Rng + ?Sized>(
    params: &OrderParams,
    problem: &EosProblem,
    count: usize,
    rng: &mut R,
) -> Vec<f64> {
    let scale = params.h.sqrt() / (params.k * (problem.n as f64).sqrt());
    let tau = inactive_threshold(params, problem);
    (0..count)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * soft_threshold(z, tau)
        })
        .collect()
}
