use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use aerodet::detect::{
    detect, format_detections, preprocess, BBox, DetectParams, RgbImage, SizeGate,
};
use aerodet::eval::{
    evaluate_dataset, load_annotations, parse_annotation, GroundTruthBox, ModelDetector,
};
use aerodet::explore::{
    benchmark_fps, emit_report, resolve_model_config, run_sweep, BenchOptions, DatasetSource,
    ReportFormat, SweepConfig, RANDOM_WEIGHT_SCALE,
};
use aerodet::model::{load_weights, save_weights, Model, NetworkConfig};
use aerodet::train::{
    check_loss_gradients, check_network_gradients, synthetic_image, train_toy, TrainOptions,
    DEFAULT_INIT_SCALE,
};
use aerodet::{Error, Result};
use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::{
    BenchArgs, Command, DetectArgs, EvalArgs, EvalFormat, GradCheckArgs, ModelArgs, SweepArgs,
    SweepFormat, ThresholdArgs, TrainToyArgs,
};

/// Failure of a subcommand, mapped to an exit code by the caller.
#[derive(Debug)]
pub enum Failure {
    Core(Error),
    /// A self-check found the implementation wrong.
    Internal(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) if e.is_input_error() => 1,
            _ => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => e.fmt(f),
            Failure::Internal(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

pub fn run(command: Command) -> std::result::Result<(), Failure> {
    match command {
        Command::Detect(a) => Ok(run_detect(a)?),
        Command::Eval(a) => Ok(run_eval(a)?),
        Command::Bench(a) => Ok(run_bench(a)?),
        Command::Sweep(a) => Ok(run_sweep_cmd(a)?),
        Command::GradCheck(a) => run_grad_check(a),
        Command::TrainToy(a) => Ok(run_train_toy(a)?),
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        }),
        None => std::io::stdout().write_all(bytes).map_err(|e| Error::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        }),
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        })
    }
}

fn load_model(args: &ModelArgs) -> Result<Model<f32>> {
    let config = resolve_model_config(&args.config)?;
    require_file(&args.weights)?;
    let bytes = std::fs::read(&args.weights).map_err(|e| Error::Io {
        path: args.weights.clone(),
        source: e,
    })?;
    load_weights(&bytes, &config)
}

fn detect_params(t: &ThresholdArgs) -> DetectParams {
    DetectParams {
        conf_threshold: t.conf,
        nms_iou_threshold: t.nms,
        size_gate: t
            .min_area
            .zip(t.max_area)
            .map(|(min_area, max_area)| SizeGate { min_area, max_area }),
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    if threads == 0 {
        return Err(Error::Precondition("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))
}

fn run_detect(a: DetectArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    require_file(&a.image)?;
    let image = RgbImage::load(&a.image)?;
    let params = detect_params(&a.thresholds);
    let dets = pool(a.threads)?.install(|| detect(&model, &image, &params))?;
    emit(a.out.as_deref(), format_detections(&dets).as_bytes())
}

fn run_eval(a: EvalArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    require_file(&a.dataset)?;
    let truth = load_annotations(&a.dataset)?;
    let params = detect_params(&a.thresholds);
    params.validate()?;
    let detector = ModelDetector {
        model: &model,
        params,
    };
    let report = pool(a.threads)?.install(|| evaluate_dataset(&detector, &truth, a.match_iou))?;
    let text = match a.format {
        EvalFormat::Text => report.to_text(),
        EvalFormat::Json => report.to_json() + "\n",
    };
    emit(a.out.as_deref(), text.as_bytes())
}

fn run_bench(a: BenchArgs) -> Result<()> {
    let config = resolve_model_config(&a.config)?;
    let model = match &a.weights {
        Some(path) => load_model(&ModelArgs {
            config: a.config.clone(),
            weights: path.clone(),
        })?,
        None => {
            eprintln!(
                "random weights in [-{RANDOM_WEIGHT_SCALE}, {RANDOM_WEIGHT_SCALE}], seed {}",
                a.seed
            );
            Model::random(
                config,
                RANDOM_WEIGHT_SCALE,
                &mut StdRng::seed_from_u64(a.seed),
            )
        }
    };
    let opts = BenchOptions {
        input_size: a.size,
        warmup: a.warmup,
        runs: a.runs,
        threads: a.threads,
        seed: a.seed,
    };
    let r = benchmark_fps(&model, &opts)?;
    let ms = |d: std::time::Duration| format!("{:.3}", d.as_secs_f64() * 1e3);
    let mut out = String::from(
        "model,input_size,threads,seed,runs,fps,min_ms,median_ms,max_ms,latencies_ms\n",
    );
    let latencies: Vec<String> = r.latencies.iter().map(|&d| ms(d)).collect();
    let _ = writeln!(
        out,
        "{},{},{},{},{},{:.4},{},{},{},{}",
        model.config().name(),
        r.input_size,
        r.threads,
        a.seed,
        r.runs,
        r.fps,
        ms(r.min),
        ms(r.median),
        ms(r.max),
        latencies.join(";")
    );
    emit(a.out.as_deref(), out.as_bytes())
}

fn run_sweep_cmd(a: SweepArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => {
            require_file(path)?;
            SweepConfig::from_file(path)?
        }
        None => SweepConfig::default(),
    };
    let cwd = Path::new(".");
    let overrides: [(&str, Option<String>); 11] = [
        ("models", a.models.clone()),
        ("sizes", a.sizes.clone()),
        ("score_weights", a.score_weights.clone()),
        (
            "dataset",
            a.dataset.as_ref().map(|p| p.display().to_string()),
        ),
        ("runs", a.runs.map(|v| v.to_string())),
        ("warmup", a.warmup.map(|v| v.to_string())),
        ("threads", a.threads.map(|v| v.to_string())),
        ("seed", a.seed.map(|v| v.to_string())),
        ("conf_threshold", a.conf.map(|v| v.to_string())),
        ("nms_threshold", a.nms.map(|v| v.to_string())),
        ("match_iou", a.match_iou.map(|v| v.to_string())),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, &v, cwd)?;
        }
    }
    cfg.validate()?;
    let mut source = DatasetSource::new(&cfg)?;
    let table = run_sweep(&cfg, &mut source)?;
    for s in &table.skipped {
        eprintln!("skipped {s}");
    }
    if let Some(best) = table.selected() {
        eprintln!(
            "selected {}@{} score {:.4}",
            best.model, best.input_size, best.score
        );
    }
    let format = match a.format {
        SweepFormat::Csv => ReportFormat::Csv,
        SweepFormat::Json => ReportFormat::Json,
    };
    emit(a.out.as_deref(), &emit_report(&table, format))
}

fn run_grad_check(a: GradCheckArgs) -> std::result::Result<(), Failure> {
    let mut rng = StdRng::seed_from_u64(a.seed);
    let loss = check_loss_gradients(&mut rng, a.instances, a.eps)?;
    let (params, input) = check_network_gradients(&mut rng, 1e-5)?;
    let mut out = String::from("check,coordinates,max_rel_error,mean_rel_error\n");
    for (name, r) in [
        ("yolo_loss", loss),
        ("network_params", params),
        ("network_input", input),
    ] {
        let _ = writeln!(
            out,
            "{name},{},{:.3e},{:.3e}",
            r.checked, r.max_rel_error, r.mean_rel_error
        );
    }
    emit(None, out.as_bytes())?;
    let worst = loss
        .max_rel_error
        .max(params.max_rel_error)
        .max(input.max_rel_error);
    if worst >= 1e-3 {
        return Err(Failure::Internal(format!(
            "max relative error {worst:.3e} exceeds 1e-3"
        )));
    }
    Ok(())
}

fn run_train_toy(a: TrainToyArgs) -> Result<()> {
    let config: NetworkConfig = resolve_model_config(&a.config)?;
    let (image, gts) = match (&a.image, &a.annotation) {
        (Some(img), Some(ann)) => {
            require_file(img)?;
            require_file(ann)?;
            let text = std::fs::read_to_string(ann).map_err(|e| Error::Io {
                path: ann.clone(),
                source: e,
            })?;
            let mut warnings = Vec::new();
            (
                RgbImage::load(img)?,
                parse_annotation(&text, ann, &mut warnings)?,
            )
        }
        _ => {
            let bbox = BBox::new(0.55, 0.4, 0.3, 0.25);
            let size = config.input().width;
            (
                synthetic_image(size, &bbox)?,
                vec![GroundTruthBox { class: 0, bbox }],
            )
        }
    };
    let model = Model::<f32>::random(
        config,
        DEFAULT_INIT_SCALE,
        &mut StdRng::seed_from_u64(a.seed),
    );
    let out = train_toy(
        &model,
        &image,
        &gts,
        a.steps,
        a.lr,
        &TrainOptions::default(),
    )?;

    let input = preprocess::<f32>(&image, out.model.config().input().width)?;
    let params = DetectParams {
        conf_threshold: 0.05,
        ..Default::default()
    };
    let dets = aerodet::detect::postprocess(
        &out.model,
        &aerodet::model::forward(&out.model, &input)?,
        &params,
    )?;
    eprintln!(
        "loss {:.6} -> {:.6} over {} steps",
        out.initial_loss(),
        out.final_loss(),
        a.steps
    );
    if let Some(top) = dets.first() {
        let best = gts
            .iter()
            .map(|g| {
                let b = BBox::new(
                    top.bbox.cx as f64,
                    top.bbox.cy as f64,
                    top.bbox.w as f64,
                    top.bbox.h as f64,
                );
                aerodet::detect::iou(&b, &g.bbox)
            })
            .fold(0.0, f64::max);
        eprintln!(
            "top detection score {:.4}, IoU with ground truth {best:.4}",
            top.score
        );
    }
    if let Some(path) = &a.out {
        emit(Some(path), &save_weights(&out.model))?;
    }
    emit(a.loss_csv.as_deref(), out.loss_csv().as_bytes())
}
