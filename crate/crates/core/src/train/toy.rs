//! Plain gradient descent on a single image, for demonstrating that the
//! loss and backward pass train a small detector.

use std::fmt::Write as _;

use crate::detect::{preprocess, BBox, RgbImage};
use crate::error::{Error, Result};
use crate::eval::GroundTruthBox;
use crate::model::Model;
use crate::scalar::Scalar;
use crate::train::backprop::{backward, forward_trace};
use crate::train::loss::{yolo_loss, LossParams};

/// Loss must not rise across any window of this many steps once warmed up.
pub const DIVERGENCE_WINDOW: usize = 50;
pub const DIVERGENCE_WARMUP: usize = 100;
/// Learning rate and weight scale that reliably overfit the toy network.
pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
pub const DEFAULT_INIT_SCALE: f64 = 0.1;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainOptions {
    pub loss: LossParams,
    /// Per convolutional layer; `false` freezes the layer. `None` trains all.
    pub trainable: Option<Vec<bool>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome<S: Scalar> {
    pub model: Model<S>,
    /// Loss before each step, followed by the loss after the last step.
    pub losses: Vec<f64>,
    /// First step at which a window check failed, if any.
    pub divergence: Option<usize>,
}

impl<S: Scalar> TrainOutcome<S> {
    pub fn initial_loss(&self) -> f64 {
        self.losses[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("at least one loss value")
    }

    /// `step,loss` CSV.
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("step,loss\n");
        for (i, l) in self.losses.iter().enumerate() {
            let _ = writeln!(out, "{i},{l}");
        }
        out
    }
}

/// Dark background with one filled light rectangle covering `bbox`
/// (normalized coordinates).
pub fn synthetic_image(size: usize, bbox: &BBox<f64>) -> Result<RgbImage> {
    let mut image = RgbImage::filled(size, size, [32, 48, 64])?;
    let (x1, y1, x2, y2) = bbox.corners();
    let px = |v: f64| ((v * size as f64).round().max(0.0) as usize).min(size);
    for y in px(y1)..px(y2) {
        for x in px(x1)..px(x2) {
            image.put(x, y, [224, 200, 96]);
        }
    }
    Ok(image)
}

/// First step `t ≥ warmup + window` where `loss[t] > loss[t − window]`.
pub fn find_divergence(losses: &[f64]) -> Option<usize> {
    (DIVERGENCE_WARMUP + DIVERGENCE_WINDOW..losses.len())
        .find(|&t| losses[t] > losses[t - DIVERGENCE_WINDOW])
}

/// Runs `steps` updates of `w ← w − lr·∂L/∂w` on one image.
///
/// Batch-norm layers are folded first (inference statistics make them
/// affine), so the returned model has none.
pub fn train_toy<S: Scalar>(
    model: &Model<S>,
    image: &RgbImage,
    gts: &[GroundTruthBox],
    steps: usize,
    learning_rate: f64,
    opts: &TrainOptions,
) -> Result<TrainOutcome<S>> {
    let mut model = model.fold_batch_norm()?;
    let trainable = match &opts.trainable {
        Some(t) if t.len() != model.kernels().len() => {
            return Err(Error::precondition(format!(
                "trainable mask has {} entries for {} layers",
                t.len(),
                model.kernels().len()
            )))
        }
        Some(t) => t.clone(),
        None => vec![true; model.kernels().len()],
    };
    let input_size = model.config().input().width;
    let input = preprocess::<S>(image, input_size)?;
    let region = model.config().region().clone();
    let lr = S::lit(learning_rate);

    let mut losses = Vec::with_capacity(steps + 1);
    for step in 0..=steps {
        let trace = forward_trace(&model, &input)?;
        let loss = yolo_loss(trace.output(), gts, &region, &opts.loss)?;
        let value = loss.value.as_f64();
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        losses.push(value);
        if step == steps {
            break;
        }
        let grads = backward(&model, &trace, &loss.gradient)?;
        for ((kernel, grad), &train) in model
            .kernels_mut()
            .iter_mut()
            .zip(&grads.kernels)
            .zip(&trainable)
        {
            if !train {
                continue;
            }
            for (w, &g) in kernel.weights.iter_mut().zip(&grad.weights) {
                *w -= lr * g;
            }
            for (b, &g) in kernel.bias.iter_mut().zip(&grad.bias) {
                *b -= lr * g;
            }
        }
    }
    let divergence = find_divergence(&losses);
    if let Some(step) = divergence {
        log::warn!("loss rose over the {DIVERGENCE_WINDOW}-step window ending at step {step}");
    }
    Ok(TrainOutcome {
        model,
        losses,
        divergence,
    })
}
