//! Column normalization and the weighted model-selection score.
//!
//! Raw metrics mix units (frames per second against unitless ratios), so
//! every column is first divided by its maximum across all rows and the
//! score is a convex combination of the normalized values.

use serde::Serialize;

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

/// Weights on normalized FPS, IoU, sensitivity and precision.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScoreWeights {
    fps: f64,
    iou: f64,
    sensitivity: f64,
    precision: f64,
}

impl ScoreWeights {
    /// FPS weighted 0.4, the three accuracy metrics 0.2 each.
    pub const REAL_TIME: ScoreWeights = ScoreWeights {
        fps: 0.4,
        iou: 0.2,
        sensitivity: 0.2,
        precision: 0.2,
    };

    /// Rejects weights outside `[0, 1]` or not summing to 1 (never renormalizes).
    pub fn new(fps: f64, iou: f64, sensitivity: f64, precision: f64) -> Result<Self> {
        let w = [fps, iou, sensitivity, precision];
        if w.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::precondition(format!(
                "score weights {w:?} must lie in [0, 1]"
            )));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::precondition(format!(
                "score weights {w:?} sum to {sum}, not 1"
            )));
        }
        Ok(Self {
            fps,
            iou,
            sensitivity,
            precision,
        })
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.fps, self.iou, self.sensitivity, self.precision]
    }
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self::REAL_TIME
    }
}

/// Raw measurements of one (model, input size) pair. Undefined accuracy
/// metrics are `None`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct RawMetrics {
    pub fps: f64,
    pub mean_iou: Option<f64>,
    pub sensitivity: Option<f64>,
    pub precision: Option<f64>,
}

impl RawMetrics {
    fn columns(&self) -> [Option<f64>; 4] {
        [
            Some(self.fps),
            self.mean_iou,
            self.sensitivity,
            self.precision,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRow {
    pub model: String,
    pub input_size: usize,
    pub raw: RawMetrics,
    /// Normalized FPS, IoU, sensitivity, precision.
    pub normalized: [f64; 4],
    pub score: f64,
    pub selected: bool,
}

impl MetricRow {
    pub fn new(model: impl Into<String>, input_size: usize, raw: RawMetrics) -> Self {
        Self {
            model: model.into(),
            input_size,
            raw,
            normalized: [0.0; 4],
            score: 0.0,
            selected: false,
        }
    }
}

const COLUMN_NAMES: [&str; 4] = ["fps", "iou", "sensitivity", "precision"];

/// Divides each metric column by its maximum across `rows`.
///
/// Undefined values normalize to 0. A column whose maximum is 0 normalizes
/// to 0 everywhere, with a warning.
pub fn normalize_metrics(rows: &[MetricRow]) -> Result<Vec<MetricRow>> {
    if rows.is_empty() {
        return Err(Error::precondition(
            "cannot normalize an empty metric table",
        ));
    }
    let mut max = [0.0f64; 4];
    for row in rows {
        for (k, v) in row.raw.columns().into_iter().enumerate() {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::precondition(format!(
                        "{} {v} for {}@{} is not a non-negative finite value",
                        COLUMN_NAMES[k], row.model, row.input_size
                    )));
                }
                max[k] = max[k].max(v);
            }
        }
    }
    for (k, m) in max.iter().enumerate() {
        if *m == 0.0 {
            log::warn!(
                "{} column is zero for every row; normalized to 0",
                COLUMN_NAMES[k]
            );
        }
    }
    Ok(rows
        .iter()
        .map(|row| {
            let mut out = row.clone();
            for (k, v) in row.raw.columns().into_iter().enumerate() {
                out.normalized[k] = match v {
                    Some(v) if max[k] > 0.0 => v / max[k],
                    _ => 0.0,
                };
            }
            out
        })
        .collect())
}

/// Weighted sum of a normalized row.
pub fn score(row: &MetricRow, weights: &ScoreWeights) -> Result<f64> {
    if row.normalized.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::precondition(format!(
            "row {}@{} is not normalized: {:?}",
            row.model, row.input_size, row.normalized
        )));
    }
    Ok(weights
        .as_array()
        .iter()
        .zip(&row.normalized)
        .map(|(w, v)| w * v)
        .sum())
}
