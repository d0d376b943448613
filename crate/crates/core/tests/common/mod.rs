//! Brute-force oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use aerodet::detect::{BBox, Detection};
use aerodet::model::Model;
use aerodet::ops::{BatchNorm, ConvKernel};
use aerodet::{Scalar, Shape, Tensor};
use rand::Rng;

/// Textbook seven-loop convolution with zero padding, in f64.
pub fn conv_oracle(input: &Tensor<f32>, k: &ConvKernel<f32>) -> Vec<f64> {
    let (h, w) = (input.height() as isize, input.width() as isize);
    let oh = (input.height() + 2 * k.pad - k.size) / k.stride + 1;
    let ow = (input.width() + 2 * k.pad - k.size) / k.stride + 1;
    let mut out = vec![0.0f64; k.out_channels * oh * ow];
    for o in 0..k.out_channels {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = k.bias[o] as f64;
                for c in 0..k.in_channels {
                    for i in 0..k.size {
                        for j in 0..k.size {
                            let iy = (y * k.stride + i) as isize - k.pad as isize;
                            let ix = (x * k.stride + j) as isize - k.pad as isize;
                            if iy >= 0 && iy < h && ix >= 0 && ix < w {
                                acc += k.weight(o, c, i, j) as f64
                                    * input.at(c, iy as usize, ix as usize) as f64;
                            }
                        }
                    }
                }
                out[(o * oh + y) * ow + x] = acc;
            }
        }
    }
    out
}

/// Max over each clamped `size×size` window, output `ceil(len/stride)`.
pub fn pool_oracle(input: &Tensor<f32>, size: usize, stride: usize) -> Vec<f32> {
    let (h, w) = (input.height(), input.width());
    let (oh, ow) = (h.div_ceil(stride), w.div_ceil(stride));
    let mut out = Vec::with_capacity(input.channels() * oh * ow);
    for c in 0..input.channels() {
        for y in 0..oh {
            for x in 0..ow {
                let mut m = f32::NEG_INFINITY;
                for i in 0..size {
                    for j in 0..size {
                        let (iy, ix) = (y * stride + i, x * stride + j);
                        if iy < h && ix < w {
                            m = m.max(input.at(c, iy, ix));
                        }
                    }
                }
                out.push(m);
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &[f32], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y).abs())
        .fold(0.0, f64::max)
}

pub fn random_kernel<R: Rng>(
    rng: &mut R,
    cin: usize,
    cout: usize,
    size: usize,
    stride: usize,
    pad: usize,
) -> ConvKernel<f32> {
    let mut k = ConvKernel::zeros(cout, cin, size, stride, pad);
    for v in k.weights.iter_mut().chain(k.bias.iter_mut()) {
        *v = rng.gen_range(-1.0..1.0);
    }
    k
}

/// Random convolution instance up to (8, 16, 16) whose geometry divides evenly.
pub fn random_conv_case<R: Rng>(rng: &mut R) -> (Tensor<f32>, ConvKernel<f32>) {
    loop {
        let c = rng.gen_range(1..=8);
        let h = rng.gen_range(1..=16);
        let w = rng.gen_range(1..=16);
        let size = [1, 3][rng.gen_range(0..2)];
        let stride = rng.gen_range(1..=2);
        let pad = if rng.gen_bool(0.5) { size / 2 } else { 0 };
        let fits =
            |len: usize| len + 2 * pad >= size && (len + 2 * pad - size).is_multiple_of(stride);
        if !(fits(h) && fits(w)) {
            continue;
        }
        let input = Tensor::random(Shape::new(c, h, w), 1.0, rng);
        let cout = rng.gen_range(1..=8);
        return (input, random_kernel(rng, c, cout, size, stride, pad));
    }
}

/// Every batch-norm statistic drawn at random so serialization covers them.
pub fn randomize_batch_norm<S: Scalar, R: Rng>(model: &mut Model<S>, rng: &mut R) {
    for k in model.kernels_mut() {
        if let Some(bn) = k.batch_norm.as_mut() {
            let n = bn.scales.len();
            *bn = BatchNorm {
                scales: (0..n).map(|_| S::lit(rng.gen_range(0.5..1.5))).collect(),
                rolling_mean: (0..n).map(|_| S::lit(rng.gen_range(-0.5..0.5))).collect(),
                rolling_variance: (0..n).map(|_| S::lit(rng.gen_range(0.1..2.0))).collect(),
                epsilon: bn.epsilon,
            };
        }
    }
}

/// O(n²) NMS: repeatedly take the best remaining box (first on ties) and
/// drop everything overlapping it above the threshold.
pub fn nms_oracle(dets: &[Detection<f32>], thr: f32) -> Vec<Detection<f32>> {
    let mut alive: Vec<usize> = (0..dets.len()).collect();
    let mut kept = Vec::new();
    while !alive.is_empty() {
        let mut best = 0;
        for (pos, &i) in alive.iter().enumerate() {
            if dets[i].score > dets[alive[best]].score {
                best = pos;
            }
        }
        let b = alive.remove(best);
        kept.push(dets[b].clone());
        alive.retain(|&i| iou_oracle(&dets[b].bbox, &dets[i].bbox) <= thr as f64);
    }
    kept
}

/// Intersection over union written out from corner coordinates.
pub fn iou_oracle(a: &BBox<f32>, b: &BBox<f32>) -> f64 {
    let c = |v: &BBox<f32>| {
        let (cx, cy, w, h) = (v.cx as f64, v.cy as f64, v.w as f64, v.h as f64);
        (cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    };
    let (a, b) = (c(a), c(b));
    let iw = (a.2.min(b.2) - a.0.max(b.0)).max(0.0);
    let ih = (a.3.min(b.3) - a.1.max(b.1)).max(0.0);
    let inter = iw * ih;
    let union = (a.2 - a.0) * (a.3 - a.1) + (b.2 - b.0) * (b.3 - b.1) - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

pub fn random_detections<R: Rng>(rng: &mut R, n: usize) -> Vec<Detection<f32>> {
    (0..n)
        .map(|_| {
            let bbox = BBox::new(
                rng.gen_range(0.1..0.9),
                rng.gen_range(0.1..0.9),
                rng.gen_range(0.02..0.4),
                rng.gen_range(0.02..0.4),
            );
            // coarse scores so ties occur
            let score = rng.gen_range(1..20) as f32 / 20.0;
            Detection::single(bbox, score)
        })
        .collect()
}

/// Two pools then a linear 1×1 head: a 16×16 input maps to a 4×4 grid with
/// one unit anchor. Objectness is `20·red − 10`, everything else is zero, so
/// a red 4×4 block lights up exactly one cell.
pub const CRAFTED_CONFIG: &str = "[net]\nwidth=16\nheight=16\nchannels=3\n\
    [maxpool]\nsize=2\nstride=2\n[maxpool]\nsize=2\nstride=2\n\
    [convolutional]\nfilters=6\nsize=1\nstride=1\npad=1\nactivation=linear\n\
    [region]\nanchors=1,1\nclasses=1\nnum=1\n";

pub fn crafted_model() -> Model<f32> {
    let cfg = aerodet::model::parse_config(CRAFTED_CONFIG).unwrap();
    let mut model = Model::zeros(cfg);
    let head = &mut model.kernels_mut()[0];
    // objectness filter: weight on the red channel
    head.weights[4 * 3] = 20.0;
    head.bias[4] = -10.0;
    model
}

/// Dark 16×16 image with a red block covering grid cell (`row`, `col`).
pub fn crafted_image(row: usize, col: usize) -> aerodet::detect::RgbImage {
    let mut img = aerodet::detect::RgbImage::filled(16, 16, [0, 0, 0]).unwrap();
    for y in row * 4..row * 4 + 4 {
        for x in col * 4..col * 4 + 4 {
            img.put(x, y, [255, 0, 0]);
        }
    }
    img
}

/// Returns the planted detections for each image; the image index is stored
/// in the first pixel.
pub struct PlantedDetector(pub Vec<Vec<Detection<f32>>>);

impl aerodet::eval::Detector for PlantedDetector {
    type Scalar = f32;

    fn detect(&self, image: &aerodet::detect::RgbImage) -> aerodet::Result<Vec<Detection<f32>>> {
        let [hi, lo, _] = image.get(0, 0);
        Ok(self.0[hi as usize * 256 + lo as usize].clone())
    }
}

/// IoU of a planted true positive with its ground truth: equal 0.2-sided
/// squares offset by 0.02 horizontally.
pub const PLANTED_TP_IOU: f64 = 0.036 / 0.044;

/// Writes a dataset whose detections yield exactly `tp`, `fp` and `fn_`
/// counts at any match threshold up to `PLANTED_TP_IOU`. Four slots per
/// image, kinds shuffled across images. Returns the list file.
pub fn plant_dataset<R: Rng>(
    dir: &std::path::Path,
    tp: usize,
    fp: usize,
    fn_: usize,
    rng: &mut R,
) -> (std::path::PathBuf, PlantedDetector) {
    use rand::seq::SliceRandom;
    let mut kinds: Vec<u8> = [(0u8, tp), (1, fp), (2, fn_)]
        .iter()
        .flat_map(|&(k, n)| std::iter::repeat_n(k, n))
        .collect();
    kinds.shuffle(rng);
    let mut list = String::new();
    let mut dets = Vec::new();
    for (i, chunk) in kinds.chunks(4).enumerate() {
        let mut ann = String::new();
        let mut image_dets = Vec::new();
        for (slot, kind) in chunk.iter().enumerate() {
            let cx = (slot % 2) as f64 * 0.5 + 0.25;
            let cy = (slot / 2) as f64 * 0.5 + 0.25;
            if *kind != 1 {
                ann.push_str(&format!("0 {cx} {cy} 0.2 0.2\n"));
            }
            if *kind != 2 {
                let score = rng.gen_range(0.3f32..1.0);
                image_dets.push(Detection::single(
                    BBox::new(cx as f32 + 0.02, cy as f32, 0.2, 0.2),
                    score,
                ));
            }
        }
        let mut img = aerodet::detect::RgbImage::filled(8, 8, [0, 0, 0]).unwrap();
        img.put(0, 0, [(i / 256) as u8, (i % 256) as u8, 0]);
        let name = format!("img{i:04}.ppm");
        img.save(&dir.join(&name)).unwrap();
        std::fs::write(dir.join(format!("img{i:04}.txt")), ann).unwrap();
        list.push_str(&name);
        list.push('\n');
        dets.push(image_dets);
    }
    let list_path = dir.join("list.txt");
    std::fs::write(&list_path, list).unwrap();
    (list_path, PlantedDetector(dets))
}

/// Metric source backed by a fixed table; missing pairs are config errors.
pub struct TableSource(
    pub std::collections::BTreeMap<(String, usize), aerodet::explore::RawMetrics>,
);

impl aerodet::explore::MetricSource for TableSource {
    fn measure(
        &mut self,
        model: &str,
        size: usize,
    ) -> aerodet::Result<aerodet::explore::RawMetrics> {
        self.0
            .get(&(model.to_string(), size))
            .copied()
            .ok_or_else(|| aerodet::Error::Config(format!("no {model}@{size}")))
    }
}

pub fn random_raw<R: Rng>(rng: &mut R) -> aerodet::explore::RawMetrics {
    aerodet::explore::RawMetrics {
        fps: rng.gen_range(0.5..60.0),
        mean_iou: Some(rng.gen_range(0.0..1.0)),
        sensitivity: Some(rng.gen_range(0.0..1.0)),
        precision: Some(rng.gen_range(0.0..1.0)),
    }
}

/// Uniform sample from the probability simplex (normalized exponentials).
pub fn random_weights<R: Rng>(rng: &mut R) -> aerodet::explore::ScoreWeights {
    let e: Vec<f64> = (0..4).map(|_| -rng.gen_range(1e-12f64..1.0).ln()).collect();
    let sum: f64 = e.iter().sum();
    let w: Vec<f64> = e.iter().map(|v| v / sum).collect();
    let last = 1.0 - w[0] - w[1] - w[2];
    aerodet::explore::ScoreWeights::new(w[0], w[1], w[2], last.max(0.0)).unwrap()
}

pub fn sweep_config(
    models: &[&str],
    sizes: &[usize],
    weights: aerodet::explore::ScoreWeights,
) -> aerodet::explore::SweepConfig {
    aerodet::explore::SweepConfig {
        models: models.iter().map(|s| s.to_string()).collect(),
        sizes: sizes.to_vec(),
        weights,
        ..Default::default()
    }
}

pub fn random_gts<R: Rng>(
    rng: &mut R,
    n: usize,
    classes: usize,
) -> Vec<aerodet::eval::GroundTruthBox> {
    (0..n)
        .map(|_| aerodet::eval::GroundTruthBox {
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

pub fn loss_gradcheck_worst<R: Rng>(rng: &mut R, instances: usize) -> f64 {
    aerodet::train::check_loss_gradients(rng, instances, 1e-3)
        .unwrap()
        .max_rel_error
}

pub fn network_gradcheck<R: Rng>(rng: &mut R) -> (f64, f64) {
    let (p, x) = aerodet::train::check_network_gradients(rng, 1e-5).unwrap();
    (p.max_rel_error, x.max_rel_error)
}
