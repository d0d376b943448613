use serde::Serialize;

use crate::detect::{iou, BBox, Detection};
use crate::eval::annotations::GroundTruthBox;
use crate::scalar::Scalar;

pub const DEFAULT_MATCH_IOU: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EvalCounts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    /// Sum of IoU over matched pairs.
    pub iou_sum: f64,
}

impl EvalCounts {
    pub fn merge(&mut self, other: &EvalCounts) {
        self.true_pos += other.true_pos;
        self.false_pos += other.false_pos;
        self.false_neg += other.false_neg;
        self.iou_sum += other.iou_sum;
    }
}

fn to_f64<S: Scalar>(b: &BBox<S>) -> BBox<f64> {
    BBox::new(b.cx.as_f64(), b.cy.as_f64(), b.w.as_f64(), b.h.as_f64())
}

/// Greedy one-to-one matching in descending score order.
///
/// Each detection claims the still-unmatched ground truth of the same class
/// with the highest IoU (lowest index on ties) if that IoU reaches
/// `iou_threshold`; otherwise it is a false positive. Leftover ground truths
/// are false negatives.
pub fn match_detections<S: Scalar>(
    dets: &[Detection<S>],
    gts: &[GroundTruthBox],
    iou_threshold: f64,
) -> EvalCounts {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut matched = vec![false; gts.len()];
    let mut counts = EvalCounts::default();
    for i in order {
        let det = &dets[i];
        let bbox = to_f64(&det.bbox);
        let class = det.class_id();
        let mut best: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if matched[g] || gt.class != class {
                continue;
            }
            let overlap = iou(&bbox, &gt.bbox);
            if best.is_none_or(|(_, b)| overlap > b) {
                best = Some((g, overlap));
            }
        }
        match best {
            Some((g, overlap)) if overlap >= iou_threshold => {
                matched[g] = true;
                counts.true_pos += 1;
                counts.iou_sum += overlap;
            }
            _ => counts.false_pos += 1,
        }
    }
    counts.false_neg = matched.iter().filter(|m| !**m).count() as u64;
    counts
}
