//! Sum-of-squares detection loss over the anchor-decoded prediction map,
//! with its analytic gradient.
//!
//! For the slot responsible for a ground truth:
//! `λ_coord·[(σ(tx)−t̂x)² + (σ(ty)−t̂y)² + (tw−t̂w)² + (th−t̂h)²] + λ_obj·(σ(to)−1)²`
//! plus `λ_class·Σ(softmax − onehot)²` when there is more than one class.
//! Every other slot contributes `λ_noobj·σ(to)²`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::GroundTruthBox;
use crate::model::RegionSpec;
use crate::ops::{logistic, softmax};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::train::targets::assign_targets;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LossParams {
    pub lambda_coord: f64,
    pub lambda_noobj: f64,
    pub lambda_obj: f64,
    pub lambda_class: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            lambda_coord: 5.0,
            lambda_noobj: 0.5,
            lambda_obj: 1.0,
            lambda_class: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossOutput<S: Scalar> {
    pub value: S,
    /// Same shape as the prediction map.
    pub gradient: Tensor<S>,
}

pub fn yolo_loss<S: Scalar>(
    pred: &Tensor<S>,
    gts: &[GroundTruthBox],
    region: &RegionSpec,
    params: &LossParams,
) -> Result<LossOutput<S>> {
    let entries = region.entries_per_anchor();
    if pred.channels() != region.output_channels() || pred.height() != pred.width() {
        return Err(Error::config(format!(
            "prediction map {} does not match {} anchors x {} entries on a square grid",
            pred.shape(),
            region.num_anchors(),
            entries
        )));
    }
    if [
        params.lambda_coord,
        params.lambda_noobj,
        params.lambda_obj,
        params.lambda_class,
    ]
    .iter()
    .any(|l| *l < 0.0)
    {
        return Err(Error::precondition("loss weights must be non-negative"));
    }
    let s = pred.height();
    let targets = assign_targets(gts, &region.anchors, s);
    let (l_coord, l_noobj, l_obj, l_class) = (
        S::lit(params.lambda_coord),
        S::lit(params.lambda_noobj),
        S::lit(params.lambda_obj),
        S::lit(params.lambda_class),
    );
    let two = S::lit(2.0);
    let mut value = S::zero();
    let mut grad = Tensor::zeros(pred.shape());

    for row in 0..s {
        for col in 0..s {
            for a in 0..region.num_anchors() {
                let base = a * entries;
                let to = pred.at(base + 4, row, col);
                let obj = logistic(to);
                let dobj = obj * (S::one() - obj);
                let Some(t) = targets.slot(row, col, a) else {
                    value += l_noobj * obj * obj;
                    grad.set(base + 4, row, col, l_noobj * two * obj * dobj);
                    continue;
                };

                // x, y pass through the logistic; w, h stay in log space
                for (k, target) in [(0, t.tx), (1, t.ty)] {
                    let sig = logistic(pred.at(base + k, row, col));
                    let r = sig - S::lit(target);
                    value += l_coord * r * r;
                    grad.set(
                        base + k,
                        row,
                        col,
                        l_coord * two * r * sig * (S::one() - sig),
                    );
                }
                for (k, target) in [(2, t.tw), (3, t.th)] {
                    let r = pred.at(base + k, row, col) - S::lit(target);
                    value += l_coord * r * r;
                    grad.set(base + k, row, col, l_coord * two * r);
                }
                let r = obj - S::one();
                value += l_obj * r * r;
                grad.set(base + 4, row, col, l_obj * two * r * dobj);

                if region.classes > 1 {
                    let logits: Vec<S> = (0..region.classes)
                        .map(|k| pred.at(base + 5 + k, row, col))
                        .collect();
                    let p = softmax(&logits);
                    let resid: Vec<S> = p
                        .iter()
                        .enumerate()
                        .map(|(k, &pk)| pk - if k == t.class { S::one() } else { S::zero() })
                        .collect();
                    let dot: S = resid.iter().zip(&p).map(|(&r, &pk)| r * pk).sum();
                    for k in 0..region.classes {
                        value += l_class * resid[k] * resid[k];
                        grad.set(
                            base + 5 + k,
                            row,
                            col,
                            l_class * two * p[k] * (resid[k] - dot),
                        );
                    }
                }
            }
        }
    }
    Ok(LossOutput {
        value,
        gradient: grad,
    })
}
