//! Lightweight single-shot object detection: a CPU inference engine for
//! darknet-style networks, detector evaluation metrics, a weighted-score
//! design-space explorer and a small training harness for verifying the
//! detection loss.
//!
//! The numeric core is generic over [`Scalar`]; the aliases below pin the
//! `f32` deployment types and the `f64` verification types.

pub mod detect;
pub mod error;
pub mod eval;
pub mod explore;
pub mod model;
pub mod ops;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::{Shape, Tensor};

pub type Tensor32 = tensor::Tensor<f32>;
pub type Tensor64 = tensor::Tensor<f64>;
pub type Model32 = model::Model<f32>;
pub type Model64 = model::Model<f64>;
pub type ConvKernel32 = ops::ConvKernel<f32>;
pub type BBox32 = detect::BBox<f32>;
pub type Detection32 = detect::Detection<f32>;
