use serde::Serialize;

use crate::scalar::Scalar;

/// Center-size box in image-normalized coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BBox<S: Scalar> {
    pub cx: S,
    pub cy: S,
    pub w: S,
    pub h: S,
}

impl<S: Scalar> BBox<S> {
    pub fn new(cx: S, cy: S, w: S, h: S) -> Self {
        Self { cx, cy, w, h }
    }

    /// Builds a box from `(x1, y1, x2, y2)` corners.
    pub fn from_corners(x1: S, y1: S, x2: S, y2: S) -> Self {
        let two = S::lit(2.0);
        Self::new((x1 + x2) / two, (y1 + y2) / two, x2 - x1, y2 - y1)
    }

    /// `(x1, y1, x2, y2)`.
    pub fn corners(&self) -> (S, S, S, S) {
        let two = S::lit(2.0);
        (
            self.cx - self.w / two,
            self.cy - self.h / two,
            self.cx + self.w / two,
            self.cy + self.h / two,
        )
    }

    pub fn area(&self) -> S {
        self.w * self.h
    }

    /// Clips the box to the unit square. Returns `None` if nothing remains.
    pub fn clamp_unit(&self) -> Option<Self> {
        let (x1, y1, x2, y2) = self.corners();
        let clip = |v: S| v.max(S::zero()).min(S::one());
        let (x1, y1, x2, y2) = (clip(x1), clip(y1), clip(x2), clip(y2));
        (x2 > x1 && y2 > y1).then(|| Self::from_corners(x1, y1, x2, y2))
    }

    pub fn within_unit(&self) -> bool {
        let (x1, y1, x2, y2) = self.corners();
        x1 >= S::zero() && y1 >= S::zero() && x2 <= S::one() && y2 <= S::one()
    }
}

fn overlap<S: Scalar>(a_lo: S, a_hi: S, b_lo: S, b_hi: S) -> S {
    (a_hi.min(b_hi) - a_lo.max(b_lo)).max(S::zero())
}

/// Intersection over union; 0 for disjoint or degenerate boxes.
pub fn iou<S: Scalar>(a: &BBox<S>, b: &BBox<S>) -> S {
    let (ax1, ay1, ax2, ay2) = a.corners();
    let (bx1, by1, bx2, by2) = b.corners();
    let inter = overlap(ax1, ax2, bx1, bx2) * overlap(ay1, ay2, by1, by2);
    // areas from the same corners as the intersection, so iou(a, a) == 1 exactly
    let area_a = (ax2 - ax1) * (ay2 - ay1);
    let area_b = (bx2 - bx1) * (by2 - by1);
    let union = area_a + area_b - inter;
    if union <= S::zero() {
        return S::zero();
    }
    (inter / union).min(S::one()).max(S::zero())
}
