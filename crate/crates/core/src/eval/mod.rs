//! Ground-truth loading, detection matching and accuracy metrics.

pub mod annotations;
pub mod dataset;
pub mod matching;
pub mod metrics;

pub use annotations::{
    annotation_path, load_annotations, parse_annotation, GroundTruthBox, GroundTruthSet, ImageTruth,
};
pub use dataset::{evaluate_dataset, Detector, EvalReport, ModelDetector};
pub use matching::{match_detections, EvalCounts, DEFAULT_MATCH_IOU};
pub use metrics::{fmt_metric, mean_iou, precision, sensitivity};
