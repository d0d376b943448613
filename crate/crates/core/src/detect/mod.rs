//! End-to-end detection: preprocessing, decoding, IoU, NMS and size gating.

pub mod bbox;
pub mod image;
pub mod nms;
pub mod pipeline;
pub mod region;

pub use bbox::{iou, BBox};
pub use image::{preprocess, RgbImage};
pub use nms::{nms, size_gate};
pub use pipeline::{detect, format_detections, postprocess, DetectParams, SizeGate};
pub use region::{decode_all, decode_region, Detection};
