use crate::detect::bbox::iou;
use crate::detect::region::Detection;
use crate::scalar::Scalar;

/// Greedy non-maximum suppression.
///
/// Boxes are visited by descending score (stable, so earlier decode order
/// wins ties); each kept box removes every remaining box overlapping it by
/// more than `iou_threshold`.
pub fn nms<S: Scalar>(dets: &[Detection<S>], iou_threshold: S) -> Vec<Detection<S>> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .score
            .partial_cmp(&dets[a].score)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut suppressed = vec![false; dets.len()];
    let mut kept = Vec::new();
    for (rank, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        kept.push(dets[i].clone());
        for &j in &order[rank + 1..] {
            if !suppressed[j] && iou(&dets[i].bbox, &dets[j].bbox) > iou_threshold {
                suppressed[j] = true;
            }
        }
    }
    kept
}

/// Keeps detections whose normalized area `w·h` lies in `[min_area, max_area]`.
pub fn size_gate<S: Scalar>(dets: &[Detection<S>], min_area: S, max_area: S) -> Vec<Detection<S>> {
    dets.iter()
        .filter(|d| {
            let area = d.bbox.area();
            area >= min_area && area <= max_area
        })
        .cloned()
        .collect()
}
