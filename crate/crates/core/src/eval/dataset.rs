use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::detect::{detect, DetectParams, Detection, RgbImage};
use crate::error::Result;
use crate::eval::annotations::GroundTruthSet;
use crate::eval::matching::{match_detections, EvalCounts};
use crate::eval::metrics::{fmt_metric, mean_iou, precision, sensitivity};
use crate::model::Model;
use crate::scalar::Scalar;

/// Anything that turns an image into scored boxes.
pub trait Detector {
    type Scalar: Scalar;

    fn detect(&self, image: &RgbImage) -> Result<Vec<Detection<Self::Scalar>>>;
}

/// A model plus its post-processing thresholds.
pub struct ModelDetector<'a, S: Scalar> {
    pub model: &'a Model<S>,
    pub params: DetectParams,
}

impl<S: Scalar> Detector for ModelDetector<'_, S> {
    type Scalar = S;

    fn detect(&self, image: &RgbImage) -> Result<Vec<Detection<S>>> {
        detect(self.model, image, &self.params)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub images: usize,
    pub skipped: Vec<String>,
    pub counts: EvalCounts,
    pub sensitivity: Option<f64>,
    pub precision: Option<f64>,
    pub mean_iou: Option<f64>,
    /// Evaluated images per second of detector time; 0 when nothing ran.
    pub fps: f64,
}

impl EvalReport {
    pub fn from_counts(counts: EvalCounts, images: usize, elapsed: Duration) -> Self {
        let secs = elapsed.as_secs_f64();
        Self {
            images,
            skipped: Vec::new(),
            sensitivity: sensitivity(&counts),
            precision: precision(&counts),
            mean_iou: mean_iou(&counts),
            fps: if images > 0 && secs > 0.0 {
                images as f64 / secs
            } else {
                0.0
            },
            counts,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "images       {}", self.images);
        let _ = writeln!(out, "skipped      {}", self.skipped.len());
        let _ = writeln!(out, "true_pos     {}", self.counts.true_pos);
        let _ = writeln!(out, "false_pos    {}", self.counts.false_pos);
        let _ = writeln!(out, "false_neg    {}", self.counts.false_neg);
        let _ = writeln!(out, "sensitivity  {}", fmt_metric(self.sensitivity, 4));
        let _ = writeln!(out, "precision    {}", fmt_metric(self.precision, 4));
        let _ = writeln!(out, "mean_iou     {}", fmt_metric(self.mean_iou, 4));
        let _ = writeln!(out, "fps          {:.4}", self.fps);
        for s in &self.skipped {
            let _ = writeln!(out, "skipped: {s}");
        }
        out
    }
}

/// Runs `detector` over every image and accumulates match counts.
///
/// Image decoding is excluded from the timed section; preprocessing and
/// everything after it is included. Unreadable images are skipped and listed
/// in the report.
pub fn evaluate_dataset<D: Detector>(
    detector: &D,
    gts: &GroundTruthSet,
    iou_match_threshold: f64,
) -> Result<EvalReport> {
    let mut counts = EvalCounts::default();
    let mut elapsed = Duration::ZERO;
    let mut images = 0;
    let mut skipped = Vec::new();
    for truth in &gts.images {
        let image = match RgbImage::load(&truth.image_path) {
            Ok(img) => img,
            Err(e) => {
                log::warn!("skipping {}: {e}", truth.id);
                skipped.push(format!("{}: {e}", truth.id));
                continue;
            }
        };
        let start = Instant::now();
        let dets = detector.detect(&image)?;
        elapsed += start.elapsed();
        counts.merge(&match_detections(&dets, &truth.boxes, iou_match_threshold));
        images += 1;
    }
    let mut report = EvalReport::from_counts(counts, images, elapsed);
    report.skipped = skipped;
    Ok(report)
}
