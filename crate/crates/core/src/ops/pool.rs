use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// Output extent of a max-pool: `ceil(len / stride)`.
pub fn pool_output_dim(len: usize, stride: usize) -> usize {
    len.div_ceil(stride)
}

/// Sliding-window maximum per channel.
///
/// Windows start at `y·stride` and are clamped to the valid region where
/// they overrun the bottom/right edge, which is the same as padding with −∞.
pub fn maxpool2d<S: Scalar>(input: &Tensor<S>, size: usize, stride: usize) -> Result<Tensor<S>> {
    maxpool2d_with_indices(input, size, stride).map(|(t, _)| t)
}

/// Like [`maxpool2d`], also returning the flat input index each output was
/// taken from (first maximum in scan order on ties).
pub fn maxpool2d_with_indices<S: Scalar>(
    input: &Tensor<S>,
    size: usize,
    stride: usize,
) -> Result<(Tensor<S>, Vec<usize>)> {
    if size == 0 || stride == 0 {
        return Err(Error::config(format!(
            "max-pool size {size} and stride {stride} must be positive"
        )));
    }
    let (h, w) = (input.height(), input.width());
    let shape = Shape::new(
        input.channels(),
        pool_output_dim(h, stride),
        pool_output_dim(w, stride),
    );
    let plane_out = shape.plane();
    let mut values = vec![S::zero(); shape.len()];
    let mut indices = vec![0usize; shape.len()];
    values
        .par_chunks_mut(plane_out)
        .zip(indices.par_chunks_mut(plane_out))
        .enumerate()
        .for_each(|(c, (vals, idxs))| {
            let plane = input.channel(c);
            let base = c * h * w;
            for y in 0..shape.height {
                let y0 = y * stride;
                let y1 = (y0 + size).min(h);
                for x in 0..shape.width {
                    let x0 = x * stride;
                    let x1 = (x0 + size).min(w);
                    let mut best = y0 * w + x0;
                    for iy in y0..y1 {
                        for ix in x0..x1 {
                            if plane[iy * w + ix] > plane[best] {
                                best = iy * w + ix;
                            }
                        }
                    }
                    vals[y * shape.width + x] = plane[best];
                    idxs[y * shape.width + x] = base + best;
                }
            }
        });
    Ok((Tensor::from_vec(shape, values)?, indices))
}
