mod common;

use aerodet::detect::{
    decode_all, decode_region, detect, format_detections, iou, nms, BBox, DetectParams,
};
use aerodet::model::RegionSpec;
use aerodet::{Shape, Tensor};
use common::*;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[test]
fn zero_map_decodes_to_cell_centers() {
    let region = RegionSpec {
        anchors: vec![(1.0, 2.0), (3.0, 1.5)],
        classes: 2,
    };
    let s = 5;
    let pred = Tensor::<f32>::zeros(Shape::new(region.output_channels(), s, s));
    let dets = decode_all(&pred, &region).unwrap();
    assert_eq!(dets.len(), 2 * s * s);
    for (i, d) in dets.iter().enumerate() {
        let (row, col, a) = (i / (2 * s), (i / 2) % s, i % 2);
        assert!((d.bbox.cx as f64 - (col as f64 + 0.5) / s as f64).abs() < 1e-6);
        assert!((d.bbox.cy as f64 - (row as f64 + 0.5) / s as f64).abs() < 1e-6);
        assert!((d.bbox.w as f64 - region.anchors[a].0 / s as f64).abs() < 1e-6);
        assert_eq!(d.objectness, 0.5);
        assert_eq!(d.class_probs, vec![0.5, 0.5]);
        assert_eq!(d.score, 0.25);
    }
}

#[test]
fn encoded_box_decodes_back() {
    let region = RegionSpec {
        anchors: vec![(1.08, 1.19), (3.42, 4.41)],
        classes: 1,
    };
    let s = 13;
    let target = BBox::new(0.4321, 0.6789, 0.21, 0.33);
    let (col, row) = (
        (target.cx * s as f64) as usize,
        (target.cy * s as f64) as usize,
    );
    let a = 1;
    let mut pred = Tensor::<f64>::filled(Shape::new(12, s, s), -20.0);
    let base = 6 * a;
    pred.set(base, row, col, logit(target.cx * s as f64 - col as f64));
    pred.set(base + 1, row, col, logit(target.cy * s as f64 - row as f64));
    pred.set(
        base + 2,
        row,
        col,
        (target.w * s as f64 / region.anchors[a].0).ln(),
    );
    pred.set(
        base + 3,
        row,
        col,
        (target.h * s as f64 / region.anchors[a].1).ln(),
    );
    pred.set(base + 4, row, col, logit(0.9));
    let dets = decode_region(&pred, &region, 0.5).unwrap();
    assert_eq!(dets.len(), 1);
    let d = &dets[0];
    for (got, want) in [
        (d.bbox.cx, target.cx),
        (d.bbox.cy, target.cy),
        (d.bbox.w, target.w),
        (d.bbox.h, target.h),
    ] {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
    assert!((d.score - 0.9).abs() < 1e-12);
}

#[test]
fn nms_matches_quadratic_oracle() {
    let mut rng = StdRng::seed_from_u64(21);
    for n in 0..500 {
        let dets = random_detections(&mut rng, n % 40);
        let fast = nms(&dets, 0.45);
        let slow = nms_oracle(&dets, 0.45);
        assert_eq!(fast, slow, "set {n}");
    }
}

#[test]
fn crafted_model_finds_the_red_cell() {
    let model = crafted_model();
    let dets = detect(&model, &crafted_image(1, 2), &DetectParams::default()).unwrap();
    assert_eq!(dets.len(), 1);
    let d = &dets[0];
    assert!((d.bbox.cx - 0.625).abs() < 1e-6);
    assert!((d.bbox.cy - 0.375).abs() < 1e-6);
    assert!((d.bbox.w - 0.25).abs() < 1e-6);
    assert!(d.score > 0.99);
    assert_eq!(
        format_detections(&dets),
        format!("0 {:.6} 0.625000 0.375000 0.250000 0.250000\n", d.score)
    );
}

#[test]
fn detect_output_is_identical_across_thread_counts() {
    let mut rng = StdRng::seed_from_u64(22);
    let model = aerodet::model::Model::<f32>::random(
        aerodet::model::ReferenceModel::Dronet.config(),
        0.3,
        &mut rng,
    )
    .with_input_size(128)
    .unwrap();
    let image = aerodet::detect::RgbImage::new(
        40,
        30,
        (0..40 * 30 * 3).map(|i| (i * 37 % 256) as u8).collect(),
    )
    .unwrap();
    let params = DetectParams {
        conf_threshold: 0.05,
        ..Default::default()
    };
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        format_detections(&pool.install(|| detect(&model, &image, &params)).unwrap())
    };
    let first = run(1);
    assert!(!first.is_empty());
    for t in [1, 2, 4, 7] {
        assert_eq!(run(t), first);
    }
}

proptest! {
    #[test]
    fn iou_is_symmetric_and_bounded(
        a in (0.0f32..1.0, 0.0f32..1.0, 0.01f32..0.5, 0.01f32..0.5),
        b in (0.0f32..1.0, 0.0f32..1.0, 0.01f32..0.5, 0.01f32..0.5),
    ) {
        let a = BBox::new(a.0, a.1, a.2, a.3);
        let b = BBox::new(b.0, b.1, b.2, b.3);
        let v = iou(&a, &b);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(v, iou(&b, &a));
        prop_assert!((v as f64 - iou_oracle(&a, &b)).abs() < 1e-5);
    }

    #[test]
    fn nms_output_has_no_overlapping_pairs(seed in any::<u64>(), n in 0usize..30) {
        let mut rng = StdRng::seed_from_u64(seed);
        let kept = nms(&random_detections(&mut rng, n), 0.3);
        for i in 0..kept.len() {
            for j in i + 1..kept.len() {
                prop_assert!(iou(&kept[i].bbox, &kept[j].bbox) <= 0.3);
                prop_assert!(kept[i].score >= kept[j].score);
            }
        }
    }
}
