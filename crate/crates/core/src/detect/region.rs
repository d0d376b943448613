//! Anchor-based grid decoding of the prediction map.
//!
//! Anchor `a` occupies channels `a·(5+C) .. (a+1)·(5+C)` holding
//! `tx, ty, tw, th, to` followed by `C` class logits. Boxes are emitted in
//! decode order: row, then column, then anchor.

use serde::Serialize;

use crate::detect::bbox::BBox;
use crate::error::{Error, Result};
use crate::model::RegionSpec;
use crate::ops::{logistic, softmax};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Detection<S: Scalar> {
    pub bbox: BBox<S>,
    pub objectness: S,
    pub class_probs: Vec<S>,
    /// `objectness × max(class_probs)`.
    pub score: S,
}

impl<S: Scalar> Detection<S> {
    pub fn new(bbox: BBox<S>, objectness: S, class_probs: Vec<S>) -> Self {
        let best = class_probs.iter().copied().fold(S::zero(), S::max);
        Self {
            bbox,
            objectness,
            score: objectness * best,
            class_probs,
        }
    }

    /// Single-class detection with the given score as objectness.
    pub fn single(bbox: BBox<S>, score: S) -> Self {
        Self::new(bbox, score, vec![S::one()])
    }

    /// Index of the most probable class (first on ties).
    pub fn class_id(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.class_probs.iter().enumerate() {
            if p > self.class_probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Decodes every (cell, anchor) slot without thresholding: `A·S²` boxes.
pub fn decode_all<S: Scalar>(pred: &Tensor<S>, region: &RegionSpec) -> Result<Vec<Detection<S>>> {
    let entries = region.entries_per_anchor();
    if !pred.channels().is_multiple_of(entries) {
        return Err(Error::config(format!(
            "prediction map has {} channels, not a multiple of 5 + {} classes",
            pred.channels(),
            region.classes
        )));
    }
    let anchors = pred.channels() / entries;
    if anchors != region.num_anchors() {
        return Err(Error::config(format!(
            "prediction map holds {anchors} anchors, region declares {}",
            region.num_anchors()
        )));
    }
    if pred.height() != pred.width() {
        return Err(Error::config("prediction map must be square"));
    }
    let s = pred.height();
    let grid = S::lit(s as f64);
    let mut out = Vec::with_capacity(anchors * s * s);
    for row in 0..s {
        for col in 0..s {
            for (a, &(pw, ph)) in region.anchors.iter().enumerate() {
                let base = a * entries;
                let at = |k: usize| pred.at(base + k, row, col);
                let cx = (S::lit(col as f64) + logistic(at(0))) / grid;
                let cy = (S::lit(row as f64) + logistic(at(1))) / grid;
                let w = S::lit(pw) * at(2).exp() / grid;
                let h = S::lit(ph) * at(3).exp() / grid;
                let objectness = logistic(at(4));
                let probs = if region.classes == 1 {
                    vec![S::one()]
                } else {
                    let logits: Vec<S> = (0..region.classes).map(|k| at(5 + k)).collect();
                    softmax(&logits)
                };
                let clamp = |v: S| v.max(S::zero()).min(S::one());
                out.push(Detection::new(
                    BBox::new(clamp(cx), clamp(cy), w, h),
                    objectness,
                    probs,
                ));
            }
        }
    }
    Ok(out)
}

/// Decodes the map and keeps detections with `score ≥ conf_threshold`.
pub fn decode_region<S: Scalar>(
    pred: &Tensor<S>,
    region: &RegionSpec,
    conf_threshold: S,
) -> Result<Vec<Detection<S>>> {
    let mut all = decode_all(pred, region)?;
    all.retain(|d| d.score >= conf_threshold);
    Ok(all)
}
