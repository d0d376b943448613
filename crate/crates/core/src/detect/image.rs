//! 8-bit RGB images, binary PPM I/O and network input preprocessing.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Shape, Tensor};

/// Interleaved 8-bit RGB pixels, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Image(format!(
                "zero-dimension image {width}x{height}"
            )));
        }
        if pixels.len() != width * height * 3 {
            return Err(Error::Image(format!(
                "{} bytes for a {width}x{height} RGB image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        let pixels = rgb
            .iter()
            .copied()
            .cycle()
            .take(width * height * 3)
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Parses a binary `P6` PPM with maxval 255.
    pub fn from_ppm(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut fields = [0usize; 3];
        let magic = next_token(bytes, &mut pos)?;
        if magic != b"P6" {
            return Err(Error::Image("not a binary PPM (expected P6 magic)".into()));
        }
        for f in &mut fields {
            let tok = next_token(bytes, &mut pos)?;
            *f = std::str::from_utf8(tok)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Image("malformed PPM header".into()))?;
        }
        let [width, height, maxval] = fields;
        if maxval != 255 {
            return Err(Error::Image(format!("unsupported PPM maxval {maxval}")));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let len = width * height * 3;
        let raster = bytes
            .get(pos..pos + len)
            .ok_or_else(|| Error::Image("PPM raster truncated".into()))?;
        Self::new(width, height, raster.to_vec())
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_ppm(&bytes).map_err(|e| Error::Image(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_ppm()).map_err(|e| Error::io(path, e))
    }
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while bytes.get(*pos).is_some_and(|&b| b != b'\n') {
                    *pos += 1;
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(Error::Image("PPM header truncated".into())),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(|b| !b.is_ascii_whitespace()) {
        *pos += 1;
    }
    Ok(&bytes[start..*pos])
}

/// Resizes to `size × size` with corner-aligned bilinear sampling and scales
/// to `[0, 1]`, channel-planar.
pub fn preprocess<S: Scalar>(image: &RgbImage, size: usize) -> Result<Tensor<S>> {
    if size == 0 {
        return Err(Error::Image("network input size must be positive".into()));
    }
    let sample_axis = |out: usize, src: usize| -> Vec<(usize, usize, S)> {
        (0..size)
            .map(|o| {
                if size == 1 || src == 1 {
                    return (0, 0, S::zero());
                }
                let pos = S::lit(o as f64) * S::lit((src - 1) as f64) / S::lit((out - 1) as f64);
                let lo = pos.floor().to_usize().unwrap_or(0).min(src - 1);
                let hi = (lo + 1).min(src - 1);
                (lo, hi, pos - S::lit(lo as f64))
            })
            .collect()
    };
    let xs = sample_axis(size, image.width);
    let ys = sample_axis(size, image.height);
    let scale = S::lit(255.0);
    let mut out = Tensor::zeros(Shape::new(3, size, size));
    for c in 0..3 {
        let px = |x: usize, y: usize| S::lit(f64::from(image.get(x, y)[c])) / scale;
        for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
            for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
                let top = (S::one() - fx) * px(x0, y0) + fx * px(x1, y0);
                let bottom = (S::one() - fx) * px(x0, y1) + fx * px(x1, y1);
                out.set(c, oy, ox, (S::one() - fy) * top + fy * bottom);
            }
        }
    }
    Ok(out)
}
