use std::fmt::Write as _;

use crate::detect::image::{preprocess, RgbImage};
use crate::detect::nms::{nms, size_gate};
use crate::detect::region::{decode_region, Detection};
use crate::error::{Error, Result};
use crate::model::{forward, Model};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SizeGate {
    pub min_area: f64,
    pub max_area: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectParams {
    pub conf_threshold: f64,
    pub nms_iou_threshold: f64,
    pub size_gate: Option<SizeGate>,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self {
            conf_threshold: 0.25,
            nms_iou_threshold: 0.45,
            size_gate: None,
        }
    }
}

impl DetectParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("confidence threshold", self.conf_threshold),
            ("NMS threshold", self.nms_iou_threshold),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::precondition(format!(
                    "{name} {v} must lie in (0, 1)"
                )));
            }
        }
        if let Some(g) = self.size_gate {
            if !(g.min_area >= 0.0 && g.min_area < g.max_area) {
                return Err(Error::precondition(format!(
                    "size gate needs 0 <= min_area < max_area, got [{}, {}]",
                    g.min_area, g.max_area
                )));
            }
        }
        Ok(())
    }
}

/// Post-processing shared by [`detect`] and callers that already hold a
/// prediction map: decode, size gate, NMS.
pub fn postprocess<S: Scalar>(
    model: &Model<S>,
    pred: &crate::tensor::Tensor<S>,
    params: &DetectParams,
) -> Result<Vec<Detection<S>>> {
    let mut dets = decode_region(pred, model.config().region(), S::lit(params.conf_threshold))?;
    if let Some(g) = params.size_gate {
        dets = size_gate(&dets, S::lit(g.min_area), S::lit(g.max_area));
    }
    Ok(nms(&dets, S::lit(params.nms_iou_threshold)))
}

/// Full pipeline: preprocess → forward → decode → size gate → NMS.
pub fn detect<S: Scalar>(
    model: &Model<S>,
    image: &RgbImage,
    params: &DetectParams,
) -> Result<Vec<Detection<S>>> {
    params.validate()?;
    let input = model.config().input();
    if input.width != input.height {
        return Err(Error::config("detector expects a square network input"));
    }
    let tensor = preprocess(image, input.width)?;
    let pred = forward(model, &tensor)?;
    postprocess(model, &pred, params)
}

/// One `class score cx cy w h` line per detection, six decimals.
pub fn format_detections<S: Scalar>(dets: &[Detection<S>]) -> String {
    let mut out = String::new();
    for d in dets {
        let _ = writeln!(
            out,
            "{} {:.6} {:.6} {:.6} {:.6} {:.6}",
            d.class_id(),
            d.score.as_f64(),
            d.bbox.cx.as_f64(),
            d.bbox.cy.as_f64(),
            d.bbox.w.as_f64(),
            d.bbox.h.as_f64()
        );
    }
    out
}
