//! 2-D convolution with optional inference-time batch normalization.
//!
//! The fast path lowers the input with im2col and runs a row-wise matrix
//! product. Every output element is accumulated in the same order as the
//! direct loop (input channel, then kernel row, then kernel column), so the
//! result does not depend on how output channels are split across workers.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// Running statistics of a batch-normalized convolution.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm<S: Scalar> {
    pub scales: Vec<S>,
    pub rolling_mean: Vec<S>,
    pub rolling_variance: Vec<S>,
    pub epsilon: S,
}

impl<S: Scalar> BatchNorm<S> {
    pub const DEFAULT_EPSILON: f64 = 1e-6;

    /// Identity statistics: unit scale, zero mean, unit variance.
    pub fn identity(channels: usize) -> Self {
        Self {
            scales: vec![S::one(); channels],
            rolling_mean: vec![S::zero(); channels],
            rolling_variance: vec![S::one(); channels],
            epsilon: S::lit(Self::DEFAULT_EPSILON),
        }
    }

    #[inline]
    fn normalize(&self, o: usize, value: S) -> S {
        (value - self.rolling_mean[o]) / (self.rolling_variance[o] + self.epsilon).sqrt()
            * self.scales[o]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvKernel<S: Scalar> {
    pub out_channels: usize,
    pub in_channels: usize,
    pub size: usize,
    pub stride: usize,
    pub pad: usize,
    /// Laid out as `[out][in][row][col]`.
    pub weights: Vec<S>,
    /// Conv bias, or the batch-norm beta when `batch_norm` is present.
    pub bias: Vec<S>,
    pub batch_norm: Option<BatchNorm<S>>,
}

impl<S: Scalar> ConvKernel<S> {
    /// A zero-initialized kernel of the given geometry.
    pub fn zeros(
        out_channels: usize,
        in_channels: usize,
        size: usize,
        stride: usize,
        pad: usize,
    ) -> Self {
        Self {
            out_channels,
            in_channels,
            size,
            stride,
            pad,
            weights: vec![S::zero(); out_channels * in_channels * size * size],
            bias: vec![S::zero(); out_channels],
            batch_norm: None,
        }
    }

    /// Converts every parameter to another scalar type.
    pub fn cast<T: Scalar>(&self) -> ConvKernel<T> {
        let conv = |v: &[S]| v.iter().map(|x| T::lit(x.as_f64())).collect::<Vec<T>>();
        ConvKernel {
            out_channels: self.out_channels,
            in_channels: self.in_channels,
            size: self.size,
            stride: self.stride,
            pad: self.pad,
            weights: conv(&self.weights),
            bias: conv(&self.bias),
            batch_norm: self.batch_norm.as_ref().map(|bn| BatchNorm {
                scales: conv(&bn.scales),
                rolling_mean: conv(&bn.rolling_mean),
                rolling_variance: conv(&bn.rolling_variance),
                epsilon: T::lit(bn.epsilon.as_f64()),
            }),
        }
    }

    pub fn patch_len(&self) -> usize {
        self.in_channels * self.size * self.size
    }

    #[inline]
    pub fn weight(&self, o: usize, c: usize, i: usize, j: usize) -> S {
        self.weights[((o * self.in_channels + c) * self.size + i) * self.size + j]
    }

    pub fn validate(&self) -> Result<()> {
        if self.out_channels == 0 || self.in_channels == 0 || self.size == 0 || self.stride == 0 {
            return Err(Error::config(format!(
                "degenerate kernel {}x{}x{} stride {}",
                self.out_channels, self.in_channels, self.size, self.stride
            )));
        }
        if self.weights.len() != self.out_channels * self.patch_len() {
            return Err(Error::config(format!(
                "kernel has {} weights, expected {}",
                self.weights.len(),
                self.out_channels * self.patch_len()
            )));
        }
        if self.bias.len() != self.out_channels {
            return Err(Error::config(format!(
                "kernel has {} biases, expected {}",
                self.bias.len(),
                self.out_channels
            )));
        }
        if let Some(bn) = &self.batch_norm {
            let n = self.out_channels;
            if bn.scales.len() != n || bn.rolling_mean.len() != n || bn.rolling_variance.len() != n
            {
                return Err(Error::config("batch-norm statistics length mismatch"));
            }
            if bn
                .rolling_variance
                .iter()
                .any(|&v| v + bn.epsilon <= S::zero())
            {
                return Err(Error::config(
                    "batch-norm variance + epsilon must be positive",
                ));
            }
        }
        Ok(())
    }

    /// Output spatial size for an `height × width` input.
    pub fn output_dims(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        Ok((
            conv_output_dim(height, self.size, self.stride, self.pad)?,
            conv_output_dim(width, self.size, self.stride, self.pad)?,
        ))
    }

    #[inline]
    fn finish(&self, o: usize, acc: S) -> S {
        match &self.batch_norm {
            Some(bn) => bn.normalize(o, acc) + self.bias[o],
            None => acc + self.bias[o],
        }
    }
}

/// `(len + 2·pad − size)/stride + 1`, rejecting non-integer results.
pub fn conv_output_dim(len: usize, size: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = len + 2 * pad;
    if padded < size {
        return Err(Error::config(format!(
            "kernel size {size} exceeds padded input extent {padded}"
        )));
    }
    if !(padded - size).is_multiple_of(stride) {
        return Err(Error::config(format!(
            "output dimension ({len} + 2*{pad} - {size})/{stride} + 1 is not an integer"
        )));
    }
    Ok((padded - size) / stride + 1)
}

fn check_input<S: Scalar>(input: &Tensor<S>, kernel: &ConvKernel<S>) -> Result<Shape> {
    kernel.validate()?;
    if input.channels() != kernel.in_channels {
        return Err(Error::config(format!(
            "conv expects {} input channels, got {}",
            kernel.in_channels,
            input.channels()
        )));
    }
    let (oh, ow) = kernel.output_dims(input.height(), input.width())?;
    Ok(Shape::new(kernel.out_channels, oh, ow))
}

/// Lowers `input` into a `(C·K·K) × (H'·W')` patch matrix, zero padded.
pub fn im2col<S: Scalar>(
    input: &Tensor<S>,
    size: usize,
    stride: usize,
    pad: usize,
    out_h: usize,
    out_w: usize,
) -> Vec<S> {
    let (h, w) = (input.height() as isize, input.width() as isize);
    let positions = out_h * out_w;
    let mut col = vec![S::zero(); input.channels() * size * size * positions];
    for c in 0..input.channels() {
        let plane = input.channel(c);
        for i in 0..size {
            for j in 0..size {
                let row = ((c * size + i) * size + j) * positions;
                for y in 0..out_h {
                    let iy = (y * stride + i) as isize - pad as isize;
                    if iy < 0 || iy >= h {
                        continue;
                    }
                    for x in 0..out_w {
                        let ix = (x * stride + j) as isize - pad as isize;
                        if ix >= 0 && ix < w {
                            col[row + y * out_w + x] = plane[(iy * w + ix) as usize];
                        }
                    }
                }
            }
        }
    }
    col
}

/// Convolution via im2col and a row-wise matrix product.
///
/// With batch normalization present the output follows the darknet layer
/// convention: `scale·(conv − mean)/√(var + eps) + bias`.
pub fn conv2d<S: Scalar>(input: &Tensor<S>, kernel: &ConvKernel<S>) -> Result<Tensor<S>> {
    let out_shape = check_input(input, kernel)?;
    let positions = out_shape.plane();
    let patch = kernel.patch_len();
    let col = im2col(
        input,
        kernel.size,
        kernel.stride,
        kernel.pad,
        out_shape.height,
        out_shape.width,
    );

    let mut out = vec![S::zero(); out_shape.len()];
    out.par_chunks_mut(positions)
        .enumerate()
        .for_each(|(o, row)| {
            let weights = &kernel.weights[o * patch..(o + 1) * patch];
            for (k, &wk) in weights.iter().enumerate() {
                let src = &col[k * positions..(k + 1) * positions];
                for (acc, &v) in row.iter_mut().zip(src) {
                    *acc += wk * v;
                }
            }
            for acc in row.iter_mut() {
                *acc = kernel.finish(o, *acc);
            }
        });
    Tensor::from_vec(out_shape, out)
}

/// Direct quadruple-loop convolution. Slow; kept as the reference path.
pub fn conv2d_direct<S: Scalar>(input: &Tensor<S>, kernel: &ConvKernel<S>) -> Result<Tensor<S>> {
    let out_shape = check_input(input, kernel)?;
    let (h, w) = (input.height() as isize, input.width() as isize);
    let mut out = Tensor::zeros(out_shape);
    for o in 0..out_shape.channels {
        for y in 0..out_shape.height {
            for x in 0..out_shape.width {
                let mut acc = S::zero();
                for c in 0..kernel.in_channels {
                    for i in 0..kernel.size {
                        for j in 0..kernel.size {
                            let iy = (y * kernel.stride + i) as isize - kernel.pad as isize;
                            let ix = (x * kernel.stride + j) as isize - kernel.pad as isize;
                            let v = if iy >= 0 && iy < h && ix >= 0 && ix < w {
                                input.at(c, iy as usize, ix as usize)
                            } else {
                                S::zero()
                            };
                            acc += kernel.weight(o, c, i, j) * v;
                        }
                    }
                }
                out.set(o, y, x, kernel.finish(o, acc));
            }
        }
    }
    Ok(out)
}

/// Absorbs batch-norm statistics into the kernel weights and bias.
pub fn fold_batch_norm<S: Scalar>(kernel: &ConvKernel<S>) -> Result<ConvKernel<S>> {
    kernel.validate()?;
    let bn = kernel
        .batch_norm
        .as_ref()
        .ok_or_else(|| Error::precondition("fold_batch_norm requires batch-norm statistics"))?;
    let patch = kernel.patch_len();
    let mut weights = kernel.weights.clone();
    let mut bias = kernel.bias.clone();
    for o in 0..kernel.out_channels {
        let factor = bn.scales[o] / (bn.rolling_variance[o] + bn.epsilon).sqrt();
        for w in &mut weights[o * patch..(o + 1) * patch] {
            *w *= factor;
        }
        bias[o] -= bn.rolling_mean[o] * factor;
    }
    Ok(ConvKernel {
        weights,
        bias,
        batch_norm: None,
        ..kernel.clone()
    })
}
