//! Responsibility assignment of ground-truth boxes to (cell, anchor) slots.

use crate::eval::GroundTruthBox;

#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// Index into the ground-truth list.
    pub gt: usize,
    pub row: usize,
    pub col: usize,
    pub anchor: usize,
    pub class: usize,
    /// Targets in the decode parameterization: `S·cx − col`, `S·cy − row`,
    /// `ln(S·w / p_w)`, `ln(S·h / p_h)`.
    pub tx: f64,
    pub ty: f64,
    pub tw: f64,
    pub th: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TargetMap {
    pub assignments: Vec<Assignment>,
    /// Ground truths that lost a slot collision.
    pub dropped: Vec<usize>,
}

impl TargetMap {
    pub fn slot(&self, row: usize, col: usize, anchor: usize) -> Option<&Assignment> {
        self.assignments
            .iter()
            .find(|a| a.row == row && a.col == col && a.anchor == anchor)
    }
}

/// IoU of two boxes sharing a center, from their sizes alone.
pub fn shape_iou(a: (f64, f64), b: (f64, f64)) -> f64 {
    let inter = a.0.min(b.0) * a.1.min(b.1);
    inter / (a.0 * a.1 + b.0 * b.1 - inter)
}

/// Puts each box in the cell holding its center, on the anchor whose prior
/// best matches its shape (lowest index on ties). When two boxes want the
/// same slot the larger one keeps it.
pub fn assign_targets(gts: &[GroundTruthBox], anchors: &[(f64, f64)], grid: usize) -> TargetMap {
    let s = grid as f64;
    let mut map = TargetMap::default();
    for (g, gt) in gts.iter().enumerate() {
        let b = gt.bbox;
        let col = ((b.cx * s).floor().max(0.0) as usize).min(grid - 1);
        let row = ((b.cy * s).floor().max(0.0) as usize).min(grid - 1);
        let size = (b.w * s, b.h * s);
        let mut anchor = 0;
        let mut best = f64::NEG_INFINITY;
        for (a, &prior) in anchors.iter().enumerate() {
            let overlap = shape_iou(size, prior);
            if overlap > best {
                best = overlap;
                anchor = a;
            }
        }
        let (pw, ph) = anchors[anchor];
        let candidate = Assignment {
            gt: g,
            row,
            col,
            anchor,
            class: gt.class,
            tx: b.cx * s - col as f64,
            ty: b.cy * s - row as f64,
            tw: (size.0 / pw).ln(),
            th: (size.1 / ph).ln(),
        };
        match map
            .assignments
            .iter()
            .position(|x| x.row == row && x.col == col && x.anchor == anchor)
        {
            None => map.assignments.push(candidate),
            Some(i) => {
                let holder = map.assignments[i].gt;
                let (loser, winner_is_new) = if b.area() > gts[holder].bbox.area() {
                    (holder, true)
                } else {
                    (g, false)
                };
                log::warn!(
                    "ground truths {holder} and {g} collide at cell ({row}, {col}) anchor {anchor}; \
                     dropping {loser}"
                );
                if winner_is_new {
                    map.assignments[i] = candidate;
                }
                map.dropped.push(loser);
            }
        }
    }
    map
}
