use crate::eval::matching::EvalCounts;

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// `TP / (TP + FN)`; `None` when there is no ground truth.
pub fn sensitivity(c: &EvalCounts) -> Option<f64> {
    ratio(c.true_pos, c.true_pos + c.false_neg)
}

/// `TP / (TP + FP)`; `None` when there are no detections.
pub fn precision(c: &EvalCounts) -> Option<f64> {
    ratio(c.true_pos, c.true_pos + c.false_pos)
}

/// Mean IoU over matched pairs; `None` without matches.
pub fn mean_iou(c: &EvalCounts) -> Option<f64> {
    (c.true_pos > 0).then(|| c.iou_sum / c.true_pos as f64)
}

/// Renders an optional metric, using `n/a` for undefined values.
pub fn fmt_metric(v: Option<f64>, decimals: usize) -> String {
    match v {
        Some(v) => format!("{v:.decimals$}"),
        None => "n/a".to_string(),
    }
}
