//! Darknet-compatible binary weights.
//!
//! Layout (little-endian): `i32 major, i32 minor, i32 revision`, then `seen`
//! as `u64` when `major·10 + minor ≥ 2` and `u32` otherwise. Each
//! convolutional layer follows in network order as `f32` arrays: bias, then
//! scales, rolling mean and rolling variance if batch-normalized, then the
//! `[out][in][row][col]` weights.

use crate::error::{Error, Result};
use crate::model::config::{LayerSpec, NetworkConfig};
use crate::model::network::Model;
use crate::ops::{BatchNorm, ConvKernel};
use crate::scalar::Scalar;

pub const WRITER_VERSION: (i32, i32, i32) = (0, 2, 0);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WeightsHeader {
    pub major: i32,
    pub minor: i32,
    pub revision: i32,
    pub seen: u64,
}

impl WeightsHeader {
    fn wide_seen(major: i32, minor: i32) -> bool {
        major * 10 + minor >= 2
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::config("weights header truncated"))?;
        self.pos = end;
        Ok(chunk.try_into().expect("slice of length N"))
    }

    fn remaining_floats(&self) -> usize {
        (self.bytes.len() - self.pos) / 4
    }

    fn floats<S: Scalar>(&mut self, n: usize, layer: usize) -> Result<Vec<S>> {
        if self.remaining_floats() < n {
            return Err(Error::TruncatedWeights {
                layer,
                expected: n,
                actual: self.remaining_floats(),
            });
        }
        let out = self.bytes[self.pos..self.pos + 4 * n]
            .chunks_exact(4)
            .map(|c| S::from_weight(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
            .collect();
        self.pos += 4 * n;
        Ok(out)
    }
}

pub fn read_header(bytes: &[u8]) -> Result<(WeightsHeader, usize)> {
    let mut r = Reader { bytes, pos: 0 };
    let major = i32::from_le_bytes(r.take()?);
    let minor = i32::from_le_bytes(r.take()?);
    let revision = i32::from_le_bytes(r.take()?);
    let seen = if WeightsHeader::wide_seen(major, minor) {
        u64::from_le_bytes(r.take()?)
    } else {
        u64::from(u32::from_le_bytes(r.take()?))
    };
    Ok((
        WeightsHeader {
            major,
            minor,
            revision,
            seen,
        },
        r.pos,
    ))
}

pub fn load_weights<S: Scalar>(bytes: &[u8], config: &NetworkConfig) -> Result<Model<S>> {
    let (_, offset) = read_header(bytes)?;
    let mut r = Reader { bytes, pos: offset };
    let mut kernels = Vec::new();
    for (index, (layer, input)) in config.layer_inputs().skip(1).enumerate() {
        let LayerSpec::Convolutional(spec) = layer else {
            continue;
        };
        let n = spec.filters;
        let bias = r.floats(n, index)?;
        let batch_norm = if spec.batch_normalize {
            Some(BatchNorm {
                scales: r.floats(n, index)?,
                rolling_mean: r.floats(n, index)?,
                rolling_variance: r.floats(n, index)?,
                epsilon: S::lit(BatchNorm::<S>::DEFAULT_EPSILON),
            })
        } else {
            None
        };
        let weights = r.floats(n * input.channels * spec.size * spec.size, index)?;
        kernels.push(ConvKernel {
            out_channels: n,
            in_channels: input.channels,
            size: spec.size,
            stride: spec.stride,
            pad: spec.padding(),
            weights,
            bias,
            batch_norm,
        });
    }
    let trailing = bytes.len() - r.pos;
    if trailing > 0 {
        return Err(Error::TrailingBytes(trailing));
    }
    Model::new(config.clone(), kernels)
}

pub fn save_weights<S: Scalar>(model: &Model<S>) -> Vec<u8> {
    let (major, minor, revision) = WRITER_VERSION;
    let floats = model.parameter_count();
    let mut out = Vec::with_capacity(20 + 4 * floats);
    out.extend_from_slice(&major.to_le_bytes());
    out.extend_from_slice(&minor.to_le_bytes());
    out.extend_from_slice(&revision.to_le_bytes());
    out.extend_from_slice(&0u64.to_le_bytes());
    let mut put = |values: &[S]| {
        for v in values {
            out.extend_from_slice(&v.to_weight().to_le_bytes());
        }
    };
    for k in model.kernels() {
        put(&k.bias);
        if let Some(bn) = &k.batch_norm {
            put(&bn.scales);
            put(&bn.rolling_mean);
            put(&bn.rolling_variance);
        }
        put(&k.weights);
    }
    out
}
