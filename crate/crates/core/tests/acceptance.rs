//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use aerodet::detect::{
    decode_all, detect, format_detections, nms, preprocess, BBox, DetectParams, RgbImage,
};
use aerodet::eval::{evaluate_dataset, load_annotations, GroundTruthBox};
use aerodet::explore::{
    benchmark_fps, normalize_metrics, run_sweep, score, BenchOptions, MetricRow, RawMetrics,
    ScoreWeights, DEFAULT_SIZES,
};
use aerodet::model::{
    count_ops, forward, load_weights, parse_config, save_weights, toy_config, Model, ReferenceModel,
};
use aerodet::ops::{conv2d, maxpool2d};
use aerodet::train::{
    synthetic_image, train_toy, TrainOptions, DEFAULT_INIT_SCALE, DEFAULT_LEARNING_RATE,
};
use aerodet::{Shape, Tensor};
use common::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    ensure(elapsed < Duration::from_secs(limit_secs), || {
        format!("took {:.1}s, limit {limit_secs}s", elapsed.as_secs_f64())
    })
}

fn kernel_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(1001);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (input, kernel) = random_conv_case(&mut rng);
        let out = conv2d(&input, &kernel).map_err(|e| e.to_string())?;
        worst = worst.max(max_abs_diff(out.data(), &conv_oracle(&input, &kernel)));
    }
    let mut pooled = 0;
    while pooled < 200 {
        let shape = Shape::new(
            rng.gen_range(1..=8),
            rng.gen_range(2..=16),
            rng.gen_range(2..=16),
        );
        let input = Tensor::random(shape, 1.0, &mut rng);
        let stride = rng.gen_range(1..=2);
        let out = maxpool2d(&input, 2, stride).map_err(|e| e.to_string())?;
        let oracle: Vec<f64> = pool_oracle(&input, 2, stride)
            .iter()
            .map(|&v| v as f64)
            .collect();
        worst = worst.max(max_abs_diff(out.data(), &oracle));
        pooled += 1;
    }
    ensure(worst < 1e-5, || format!("max abs diff {worst:e}"))?;
    within(start.elapsed(), 10)?;
    Ok(format!("400 instances, max abs diff {worst:.2e}"))
}

fn parser_serializer() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(1002);
    for m in ReferenceModel::ALL {
        let cfg = m.config();
        let again = parse_config(&cfg.to_text()).map_err(|e| format!("{}: {e}", m.name()))?;
        ensure(again == cfg, || format!("{} does not round-trip", m.name()))?;
        ensure(
            cfg.output_shape() == Shape::new(30, cfg.grid_size(), cfg.grid_size()),
            || format!("{} output {}", m.name(), cfg.output_shape()),
        )?;
        let mut model = Model::<f32>::random(cfg, 0.5, &mut rng);
        randomize_batch_norm(&mut model, &mut rng);
        let bytes = save_weights(&model);
        let loaded: Model<f32> = load_weights(&bytes, model.config()).map_err(|e| e.to_string())?;
        let bits = |m: &Model<f32>| -> Vec<u32> {
            m.kernels()
                .iter()
                .flat_map(|k| {
                    let bn = k.batch_norm.iter().flat_map(|b| {
                        b.scales
                            .iter()
                            .chain(&b.rolling_mean)
                            .chain(&b.rolling_variance)
                    });
                    k.weights
                        .iter()
                        .chain(&k.bias)
                        .chain(bn)
                        .map(|v| v.to_bits())
                        .collect::<Vec<_>>()
                })
                .collect()
        };
        ensure(bits(&loaded) == bits(&model), || {
            format!("{} weights differ after reload", m.name())
        })?;
    }
    within(start.elapsed(), 5)?;
    Ok("4 configs round-trip, weights bit-identical".into())
}

/// Totals computed layer by layer outside this crate, at 416×416.
const COST_ORACLE: [(ReferenceModel, u64, u64); 4] = [
    (ReferenceModel::Dronet, 154_971_648, 36_918),
    (ReferenceModel::TinyYoloVoc, 3_469_080_576, 15_770_510),
    (ReferenceModel::TinyYoloNet, 475_514_624, 231_182),
    (ReferenceModel::SmallYoloV3, 137_730_944, 59_414),
];

fn cost_model() -> Outcome {
    let mut macs = BTreeMap::new();
    for (m, want_macs, want_params) in COST_ORACLE {
        let cfg = m.config().with_input_size(416).map_err(|e| e.to_string())?;
        let report = count_ops(&cfg);
        ensure(
            report.total_macs == want_macs && report.total_parameters == want_params,
            || {
                format!(
                    "{}: {} MACs / {} params, expected {want_macs} / {want_params}",
                    m.name(),
                    report.total_macs,
                    report.total_parameters
                )
            },
        )?;
        macs.insert(m.name(), report.total_macs);
    }
    let ratio = macs["tiny_yolo_voc"] as f64 / macs["dronet"] as f64;
    ensure(ratio >= 10.0, || {
        format!("TinyYoloVoc/DroNet MAC ratio {ratio:.2}")
    })?;
    Ok(format!(
        "exact totals for 4 configs, TinyYoloVoc/DroNet = {ratio:.1}x"
    ))
}

fn decode_and_nms() -> Outcome {
    let start = Instant::now();
    for m in ReferenceModel::ALL {
        let cfg = m.config();
        let (s, region) = (cfg.grid_size(), cfg.region());
        let dets = decode_all(&Tensor::<f32>::zeros(cfg.output_shape()), region)
            .map_err(|e| e.to_string())?;
        ensure(dets.len() == region.num_anchors() * s * s, || {
            format!("{}: {} boxes", m.name(), dets.len())
        })?;
        for (i, d) in dets.iter().enumerate() {
            let cell = i / region.num_anchors();
            let (row, col) = (cell / s, cell % s);
            let cx = (col as f32 + 0.5) / s as f32;
            let cy = (row as f32 + 0.5) / s as f32;
            ensure(
                (d.bbox.cx - cx).abs() < 1e-6
                    && (d.bbox.cy - cy).abs() < 1e-6
                    && d.objectness == 0.5,
                || {
                    format!(
                        "{}: box {i} at ({}, {}) obj {}",
                        m.name(),
                        d.bbox.cx,
                        d.bbox.cy,
                        d.objectness
                    )
                },
            )?;
        }
    }
    let mut rng = StdRng::seed_from_u64(1004);
    for n in 0..500 {
        let count = rng.gen_range(0..60);
        let dets = random_detections(&mut rng, count);
        ensure(nms(&dets, 0.45) == nms_oracle(&dets, 0.45), || {
            format!("set {n} differs from oracle")
        })?;
    }
    within(start.elapsed(), 10)?;
    Ok(
        "zero map gives A*S^2 centered boxes at objectness 0.5; NMS matches oracle on 500 sets"
            .into(),
    )
}

fn metrics() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut rng = StdRng::seed_from_u64(1005);
    let mut lines = Vec::new();
    for (tp, fp, fn_) in [(95, 0, 5), (4, 1, 1), (30, 10, 20)] {
        let sub = dir.path().join(format!("{tp}_{fp}_{fn_}"));
        std::fs::create_dir(&sub).map_err(|e| e.to_string())?;
        let (list, detector) = plant_dataset(&sub, tp, fp, fn_, &mut rng);
        let truth = load_annotations(&list).map_err(|e| e.to_string())?;
        let report = evaluate_dataset(&detector, &truth, 0.5).map_err(|e| e.to_string())?;
        let c = report.counts;
        ensure(
            (c.true_pos, c.false_pos, c.false_neg) == (tp as u64, fp as u64, fn_ as u64),
            || format!("counts {c:?} for planted {tp}/{fp}/{fn_}"),
        )?;
        let sens = tp as f64 / (tp + fn_) as f64;
        let prec = tp as f64 / (tp + fp) as f64;
        ensure(
            report.sensitivity == Some(sens) && report.precision == Some(prec),
            || {
                format!(
                    "sensitivity {:?} precision {:?} for {tp}/{fp}/{fn_}",
                    report.sensitivity, report.precision
                )
            },
        )?;
        let miou = report.mean_iou.unwrap_or(0.0);
        ensure(miou >= 0.5, || {
            format!("mean IoU {miou} below match threshold")
        })?;
        lines.push(format!("TP={tp} FP={fp} FN={fn_} -> {sens:.2}/{prec:.2}"));
    }
    Ok(lines.join(", "))
}

fn weighted_score() -> Outcome {
    let mut row = MetricRow::new("m", 416, RawMetrics::default());
    row.normalized = [1.0, 0.8, 0.9, 0.9];
    let s = score(&row, &ScoreWeights::REAL_TIME).map_err(|e| e.to_string())?;
    ensure((s - 0.92).abs() <= 1e-9, || format!("score {s}"))?;

    let mut rng = StdRng::seed_from_u64(1006);
    let best = |rows: &[MetricRow], w: &ScoreWeights| -> usize {
        let rows = normalize_metrics(rows).expect("valid rows");
        let scores: Vec<f64> = rows
            .iter()
            .map(|r| score(r, w).expect("normalized"))
            .collect();
        (0..scores.len()).fold(0, |b, i| if scores[i] > scores[b] { i } else { b })
    };
    for t in 0..100 {
        let rows: Vec<MetricRow> = (0..rng.gen_range(2..10))
            .map(|i| MetricRow::new(format!("m{i}"), 416, random_raw(&mut rng)))
            .collect();
        let w = random_weights(&mut rng);
        let col = rng.gen_range(0..4);
        let k = rng.gen_range(1e-3..1e3);
        let scaled: Vec<MetricRow> = rows
            .iter()
            .cloned()
            .map(|mut r| {
                match col {
                    0 => r.raw.fps *= k,
                    1 => r.raw.mean_iou = r.raw.mean_iou.map(|v| v * k),
                    2 => r.raw.sensitivity = r.raw.sensitivity.map(|v| v * k),
                    _ => r.raw.precision = r.raw.precision.map(|v| v * k),
                }
                r
            })
            .collect();
        ensure(best(&rows, &w) == best(&scaled, &w), || {
            format!("table {t}: argmax moved after scaling column {col}")
        })?;
    }

    let b = random_raw(&mut rng);
    let a = RawMetrics {
        fps: b.fps * 1.5,
        mean_iou: b.mean_iou.map(|v| v + 0.05),
        sensitivity: b.sensitivity.map(|v| v + 0.05),
        precision: b.precision.map(|v| v + 0.05),
    };
    for t in 0..100 {
        let table = BTreeMap::from([(("b".to_string(), 416), b), (("a".to_string(), 416), a)]);
        let cfg = sweep_config(&["b", "a"], &[416], random_weights(&mut rng));
        let report = run_sweep(&cfg, &mut TableSource(table)).map_err(|e| e.to_string())?;
        ensure(
            report.selected().map(|r| r.model.as_str()) == Some("a"),
            || format!("weights {t}: dominated model selected"),
        )?;
    }
    Ok(format!(
        "(1.0, 0.8, 0.9, 0.9) scores {s:.4}; argmax invariant on 100 tables; dominance on 100 weight vectors"
    ))
}

fn benchmark_sanity() -> Outcome {
    let start = Instant::now();
    let model = Model::<f32>::random(
        ReferenceModel::Dronet.config(),
        0.05,
        &mut StdRng::seed_from_u64(1007),
    );
    let mut medians = Vec::new();
    for size in DEFAULT_SIZES {
        let opts = BenchOptions {
            input_size: size,
            warmup: 1,
            runs: 5,
            threads: 1,
            seed: 42,
        };
        let r = benchmark_fps(&model, &opts).map_err(|e| e.to_string())?;
        medians.push(r.median);
    }
    ensure(medians.windows(2).all(|w| w[0] < w[1]), || {
        format!("median latencies {medians:?}")
    })?;
    within(start.elapsed(), 300)?;
    let ms: Vec<String> = medians
        .iter()
        .map(|d| format!("{:.1}", d.as_secs_f64() * 1e3))
        .collect();
    Ok(format!(
        "DroNet median ms at {DEFAULT_SIZES:?}: {}",
        ms.join(" < ")
    ))
}

fn gradients() -> Outcome {
    let loss_err = loss_gradcheck_worst(&mut StdRng::seed_from_u64(1008), 20);
    ensure(loss_err < 1e-3, || {
        format!("yolo_loss max relative error {loss_err:e}")
    })?;
    let (param_err, input_err) = network_gradcheck(&mut StdRng::seed_from_u64(1009));
    ensure(param_err < 1e-3 && input_err < 1e-3, || {
        format!("network max relative error params {param_err:e}, input {input_err:e}")
    })?;
    Ok(format!(
        "loss {loss_err:.2e} over 20 instances; 3-layer net params {param_err:.2e}, input {input_err:.2e}"
    ))
}

fn toy_overfit() -> Outcome {
    let start = Instant::now();
    let bbox = BBox::new(0.55, 0.4, 0.3, 0.25);
    let image = synthetic_image(64, &bbox).map_err(|e| e.to_string())?;
    let gts = [GroundTruthBox { class: 0, bbox }];
    let model = Model::<f32>::random(
        toy_config(),
        DEFAULT_INIT_SCALE,
        &mut StdRng::seed_from_u64(1),
    );
    let out = train_toy(
        &model,
        &image,
        &gts,
        2000,
        DEFAULT_LEARNING_RATE,
        &TrainOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let input = preprocess::<f32>(&image, 64).map_err(|e| e.to_string())?;
    let pred = forward(&out.model, &input).map_err(|e| e.to_string())?;
    let dets = decode_all(&pred, out.model.config().region()).map_err(|e| e.to_string())?;
    let top = dets
        .iter()
        .max_by(|a, b| a.score.total_cmp(&b.score))
        .ok_or("no predictions")?;
    let b = BBox::new(
        top.bbox.cx as f64,
        top.bbox.cy as f64,
        top.bbox.w as f64,
        top.bbox.h as f64,
    );
    let overlap = iou_oracle(&top.bbox, &BBox::new(0.55, 0.4, 0.3, 0.25));
    let ratio = out.final_loss() / out.initial_loss();
    ensure(overlap > 0.7, || format!("IoU {overlap:.3} of {b:?}"))?;
    ensure(ratio < 0.05, || format!("final/initial loss {ratio:.4}"))?;
    within(start.elapsed(), 120)?;
    Ok(format!(
        "IoU {overlap:.3}, loss {:.3} -> {:.4} ({:.2}%)",
        out.initial_loss(),
        out.final_loss(),
        ratio * 100.0
    ))
}

fn determinism() -> Outcome {
    let mut rng = StdRng::seed_from_u64(1010);
    let model = Model::<f32>::random(ReferenceModel::Dronet.config(), 0.3, &mut rng)
        .with_input_size(416)
        .map_err(|e| e.to_string())?;
    let image = RgbImage::new(320, 240, (0..320 * 240 * 3).map(|_| rng.gen()).collect())
        .map_err(|e| e.to_string())?;
    let params = DetectParams {
        conf_threshold: 0.05,
        ..Default::default()
    };
    let run = |threads: usize| -> Result<String, String> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| e.to_string())?;
        let dets = pool
            .install(|| detect(&model, &image, &params))
            .map_err(|e| e.to_string())?;
        Ok(format_detections(&dets))
    };
    let reference = run(1)?;
    for threads in [1, 2, 3, 4, 8] {
        ensure(run(threads)? == reference, || {
            format!("output differs at {threads} threads")
        })?;
    }
    Ok(format!(
        "{} detections byte-identical at 1, 2, 3, 4, 8 threads",
        reference.lines().count()
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("kernel correctness", kernel_correctness),
        ("parser/serializer", parser_serializer),
        ("analytic cost model", cost_model),
        ("decode/NMS", decode_and_nms),
        ("metrics", metrics),
        ("weighted score", weighted_score),
        ("benchmark sanity", benchmark_sanity),
        ("gradient correctness", gradients),
        ("toy overfit", toy_overfit),
        ("end-to-end determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {:>2} {name}: {detail} [{secs:.2}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {:>2} {name}: {detail} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
