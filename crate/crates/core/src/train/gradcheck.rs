//! Central finite-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use crate::detect::BBox;
use crate::error::{Error, Result};
use crate::eval::GroundTruthBox;
use crate::model::{parse_config, Model, RegionSpec};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};
use crate::train::backprop::{
    backward, flatten_grads, flatten_params, forward_trace, unflatten_params,
};
use crate::train::loss::{yolo_loss, LossParams};

/// Coordinates checked when the input is larger than this.
pub const MIN_SAMPLES: usize = 200;

/// Denominator floor so that two near-zero derivatives do not produce a
/// large relative error.
pub const RELATIVE_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub mean_rel_error: f64,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares the gradient returned by `f` at `point` with central
/// differences `(f(x + eps) − f(x − eps)) / 2·eps`, on every coordinate or
/// on a random subset of at least `samples.max(MIN_SAMPLES)` of them.
pub fn grad_check<S, F, R>(
    f: F,
    point: &[S],
    eps: f64,
    samples: usize,
    rng: &mut R,
) -> Result<GradCheckReport>
where
    S: Scalar,
    F: Fn(&[S]) -> Result<(S, Vec<S>)>,
    R: Rng + ?Sized,
{
    if !(eps > 1e-6 && eps < 1e-2) {
        return Err(Error::precondition(format!(
            "eps {eps} outside (1e-6, 1e-2)"
        )));
    }
    let (_, analytic) = f(point)?;
    if analytic.len() != point.len() {
        return Err(Error::precondition(format!(
            "gradient has {} entries for {} coordinates",
            analytic.len(),
            point.len()
        )));
    }
    let n = point.len();
    let want = samples.max(MIN_SAMPLES);
    let coords: Vec<usize> = if n <= want {
        (0..n).collect()
    } else {
        let mut c = sample(rng, n, want).into_vec();
        c.sort_unstable();
        c
    };
    let mut x = point.to_vec();
    let h = S::lit(eps);
    let (mut max, mut sum) = (0.0f64, 0.0f64);
    for &i in &coords {
        let orig = x[i];
        x[i] = orig + h;
        let (plus, _) = f(&x)?;
        x[i] = orig - h;
        let (minus, _) = f(&x)?;
        x[i] = orig;
        let numeric = (plus.as_f64() - minus.as_f64()) / (2.0 * eps);
        let err = relative_error(analytic[i].as_f64(), numeric);
        max = max.max(err);
        sum += err;
    }
    Ok(GradCheckReport {
        checked: coords.len(),
        max_rel_error: max,
        mean_rel_error: if coords.is_empty() {
            0.0
        } else {
            sum / coords.len() as f64
        },
    })
}

fn random_gts<R: Rng + ?Sized>(rng: &mut R, n: usize, classes: usize) -> Vec<GroundTruthBox> {
    (0..n)
        .map(|_| GroundTruthBox {
            class: rng.gen_range(0..classes),
            bbox: BBox::new(
                rng.gen_range(0.05..0.95),
                rng.gen_range(0.05..0.95),
                rng.gen_range(0.05..0.6),
                rng.gen_range(0.05..0.6),
            ),
        })
        .collect()
}

/// Checks [`yolo_loss`] gradients on `instances` random prediction maps
/// (two anchors, one to three classes, grids of 2 to 5) with up to three
/// random ground truths each. Returns the worst report.
pub fn check_loss_gradients<R: Rng + ?Sized>(
    rng: &mut R,
    instances: usize,
    eps: f64,
) -> Result<GradCheckReport> {
    let mut worst = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        mean_rel_error: 0.0,
    };
    for _ in 0..instances {
        let region = RegionSpec {
            anchors: vec![(1.0, 1.5), (2.5, 2.0)],
            classes: rng.gen_range(1..=3),
        };
        let s = rng.gen_range(2..=5);
        let shape = Shape::new(region.output_channels(), s, s);
        let pred = Tensor::<f64>::random(shape, 2.0, rng);
        let n = rng.gen_range(0..=3);
        let gts = random_gts(rng, n, region.classes);
        let params = LossParams::default();
        let f = |x: &[f64]| {
            let t = Tensor::from_vec(shape, x.to_vec())?;
            let out = yolo_loss(&t, &gts, &region, &params)?;
            Ok((out.value, out.gradient.into_vec()))
        };
        let report = grad_check(f, pred.data(), eps, MIN_SAMPLES, rng)?;
        if report.max_rel_error >= worst.max_rel_error {
            worst = report;
        }
    }
    Ok(worst)
}

/// Random three-layer conv/pool network on a 12×12 input, used by
/// [`check_network_gradients`].
pub const GRADCHECK_NET: &str = "[net]\nwidth=12\nheight=12\nchannels=3\n\
    [convolutional]\nfilters=4\nsize=3\nstride=1\npad=1\nactivation=leaky\n\
    [maxpool]\nsize=2\nstride=2\n\
    [convolutional]\nfilters=6\nsize=3\nstride=1\npad=1\nactivation=leaky\n\
    [maxpool]\nsize=2\nstride=2\n\
    [convolutional]\nfilters=12\nsize=1\nstride=1\npad=1\nactivation=linear\n\
    [region]\nanchors=1,1,2,2\nclasses=1\nnum=2\n";

/// Backpropagated loss gradients of [`GRADCHECK_NET`] with respect to its
/// parameters and its input, each against central differences.
pub fn check_network_gradients<R: Rng + ?Sized>(
    rng: &mut R,
    eps: f64,
) -> Result<(GradCheckReport, GradCheckReport)> {
    let cfg = parse_config(GRADCHECK_NET)?;
    let model = Model::<f64>::random(cfg.clone(), 0.5, rng);
    let input = Tensor::<f64>::random(cfg.input_shape(), 1.0, rng);
    let gts = random_gts(rng, 2, 1);
    let region = cfg.region().clone();
    let params = LossParams::default();
    let loss_and_grads = |m: &Model<f64>, x: &Tensor<f64>| {
        let trace = forward_trace(m, x)?;
        let out = yolo_loss(trace.output(), &gts, &region, &params)?;
        Ok::<_, Error>((out.value, backward(m, &trace, &out.gradient)?))
    };
    let wrt_params = |p: &[f64]| {
        let mut m = model.clone();
        unflatten_params(&mut m, p);
        let (v, g) = loss_and_grads(&m, &input)?;
        Ok((v, flatten_grads(&g)))
    };
    let wrt_input = |x: &[f64]| {
        let t = Tensor::from_vec(input.shape(), x.to_vec())?;
        let (v, g) = loss_and_grads(&model, &t)?;
        Ok((v, g.input.into_vec()))
    };
    let p = grad_check(
        wrt_params,
        &flatten_params(&model),
        eps,
        2 * MIN_SAMPLES,
        rng,
    )?;
    let x = grad_check(wrt_input, input.data(), eps, 2 * MIN_SAMPLES, rng)?;
    Ok((p, x))
}
