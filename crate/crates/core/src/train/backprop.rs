//! Reverse-mode gradients through convolution, leaky activation and
//! max-pooling.

use crate::error::{Error, Result};
use crate::model::{Activation, LayerSpec, Model};
use crate::ops::pool::maxpool2d_with_indices;
use crate::ops::{conv2d, im2col, leaky, ConvKernel, DEFAULT_LEAKY_SLOPE};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

enum Step<S: Scalar> {
    Conv {
        kernel: usize,
        input: Tensor<S>,
        /// Pre-activation output; `None` for linear layers.
        pre_activation: Option<Tensor<S>>,
    },
    Pool {
        input_shape: Shape,
        argmax: Vec<usize>,
    },
}

/// Intermediate values recorded by [`forward_trace`].
pub struct Trace<S: Scalar> {
    steps: Vec<Step<S>>,
    output: Tensor<S>,
}

impl<S: Scalar> Trace<S> {
    pub fn output(&self) -> &Tensor<S> {
        &self.output
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelGrad<S: Scalar> {
    pub weights: Vec<S>,
    pub bias: Vec<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<S: Scalar> {
    /// One entry per convolutional layer, in network order.
    pub kernels: Vec<KernelGrad<S>>,
    pub input: Tensor<S>,
}

fn require_plain(kernel: &ConvKernel<impl Scalar>) -> Result<()> {
    if kernel.batch_norm.is_some() {
        return Err(Error::precondition(
            "backpropagation needs batch norm folded into the kernels",
        ));
    }
    Ok(())
}

/// Forward pass that keeps what the backward pass needs.
pub fn forward_trace<S: Scalar>(model: &Model<S>, input: &Tensor<S>) -> Result<Trace<S>> {
    if input.shape() != model.config().input_shape() {
        return Err(Error::config(format!(
            "input shape {} does not match network input {}",
            input.shape(),
            model.config().input_shape()
        )));
    }
    let slope = S::lit(DEFAULT_LEAKY_SLOPE);
    let mut steps = Vec::new();
    let mut x = input.clone();
    let mut k = 0;
    for layer in &model.config().layers()[1..] {
        match layer {
            LayerSpec::Convolutional(spec) => {
                let kernel = &model.kernels()[k];
                require_plain(kernel)?;
                let z = conv2d(&x, kernel)?;
                let (next, pre) = match spec.activation {
                    Activation::Leaky => (z.map(|v| leaky(v, slope)), Some(z)),
                    Activation::Linear => (z, None),
                };
                steps.push(Step::Conv {
                    kernel: k,
                    input: std::mem::replace(&mut x, next),
                    pre_activation: pre,
                });
                k += 1;
            }
            LayerSpec::MaxPool(p) => {
                let (out, argmax) = maxpool2d_with_indices(&x, p.size, p.stride)?;
                steps.push(Step::Pool {
                    input_shape: x.shape(),
                    argmax,
                });
                x = out;
            }
            LayerSpec::Net(_) | LayerSpec::Region(_) => {}
        }
    }
    Ok(Trace { steps, output: x })
}

/// Propagates `grad_output` (dLoss/dOutput) back through the traced pass.
pub fn backward<S: Scalar>(
    model: &Model<S>,
    trace: &Trace<S>,
    grad_output: &Tensor<S>,
) -> Result<Gradients<S>> {
    if grad_output.shape() != trace.output.shape() {
        return Err(Error::config(
            "output gradient shape differs from traced output",
        ));
    }
    let slope = S::lit(DEFAULT_LEAKY_SLOPE);
    let mut kernels: Vec<Option<KernelGrad<S>>> = vec![None; model.kernels().len()];
    let mut g = grad_output.clone();
    for step in trace.steps.iter().rev() {
        match step {
            Step::Pool {
                input_shape,
                argmax,
            } => {
                let mut dx = Tensor::zeros(*input_shape);
                let data = dx.data_mut();
                for (&src, &v) in argmax.iter().zip(g.data()) {
                    data[src] += v;
                }
                g = dx;
            }
            Step::Conv {
                kernel,
                input,
                pre_activation,
            } => {
                if let Some(z) = pre_activation {
                    for (gv, &zv) in g.data_mut().iter_mut().zip(z.data()) {
                        if zv < S::zero() {
                            *gv *= slope;
                        }
                    }
                }
                let (grad, dx) = conv_backward(&model.kernels()[*kernel], input, &g);
                kernels[*kernel] = Some(grad);
                g = dx;
            }
        }
    }
    Ok(Gradients {
        kernels: kernels
            .into_iter()
            .map(|k| k.expect("every kernel visited"))
            .collect(),
        input: g,
    })
}

/// Gradients of a convolution with respect to weights, bias and input.
fn conv_backward<S: Scalar>(
    kernel: &ConvKernel<S>,
    input: &Tensor<S>,
    grad_out: &Tensor<S>,
) -> (KernelGrad<S>, Tensor<S>) {
    let (oh, ow) = (grad_out.height(), grad_out.width());
    let positions = oh * ow;
    let patch = kernel.patch_len();
    let col = im2col(input, kernel.size, kernel.stride, kernel.pad, oh, ow);

    let mut dw = vec![S::zero(); kernel.weights.len()];
    let mut db = vec![S::zero(); kernel.out_channels];
    let mut dcol = vec![S::zero(); col.len()];
    for o in 0..kernel.out_channels {
        let go = grad_out.channel(o);
        db[o] = go.iter().copied().sum();
        for k in 0..patch {
            let src = &col[k * positions..(k + 1) * positions];
            dw[o * patch + k] = go.iter().zip(src).map(|(&a, &b)| a * b).sum();
            let w = kernel.weights[o * patch + k];
            for (d, &gv) in dcol[k * positions..(k + 1) * positions].iter_mut().zip(go) {
                *d += w * gv;
            }
        }
    }

    // col2im: scatter patch gradients back onto the unpadded input
    let (h, w) = (input.height() as isize, input.width() as isize);
    let mut dx = Tensor::zeros(input.shape());
    for c in 0..input.channels() {
        for i in 0..kernel.size {
            for j in 0..kernel.size {
                let row = ((c * kernel.size + i) * kernel.size + j) * positions;
                for y in 0..oh {
                    let iy = (y * kernel.stride + i) as isize - kernel.pad as isize;
                    if iy < 0 || iy >= h {
                        continue;
                    }
                    for x in 0..ow {
                        let ix = (x * kernel.stride + j) as isize - kernel.pad as isize;
                        if ix >= 0 && ix < w {
                            let idx = dx.index(c, iy as usize, ix as usize);
                            dx.data_mut()[idx] += dcol[row + y * ow + x];
                        }
                    }
                }
            }
        }
    }
    (
        KernelGrad {
            weights: dw,
            bias: db,
        },
        dx,
    )
}

/// Flattens all trainable parameters: per kernel, weights then bias.
pub fn flatten_params<S: Scalar>(model: &Model<S>) -> Vec<S> {
    model
        .kernels()
        .iter()
        .flat_map(|k| k.weights.iter().chain(&k.bias).copied())
        .collect()
}

/// Inverse of [`flatten_params`].
pub fn unflatten_params<S: Scalar>(model: &mut Model<S>, params: &[S]) {
    let mut it = params.iter().copied();
    for k in model.kernels_mut() {
        for w in k.weights.iter_mut().chain(k.bias.iter_mut()) {
            *w = it.next().expect("parameter vector long enough");
        }
    }
}

pub fn flatten_grads<S: Scalar>(grads: &Gradients<S>) -> Vec<S> {
    grads
        .kernels
        .iter()
        .flat_map(|k| k.weights.iter().chain(&k.bias).copied())
        .collect()
}
