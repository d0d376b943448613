//! Model × input-size design-space sweep.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::Serialize;

use crate::detect::DetectParams;
use crate::error::{Error, Result};
use crate::eval::{evaluate_dataset, load_annotations, GroundTruthSet, ModelDetector};
use crate::explore::bench::{benchmark_fps, BenchOptions};
use crate::explore::score::{normalize_metrics, score, MetricRow, RawMetrics, ScoreWeights};
use crate::model::{load_weights, parse_config, toy_config, Model, NetworkConfig, ReferenceModel};

pub const DEFAULT_SIZES: [usize; 5] = [352, 416, 480, 544, 608];
pub const MIN_SIZE: usize = 352;
pub const MAX_SIZE: usize = 608;

/// Uniform range used for weights when a model has no weights file.
pub const RANDOM_WEIGHT_SCALE: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    /// Reference model names or paths to config files.
    pub models: Vec<String>,
    pub sizes: Vec<usize>,
    pub weights: ScoreWeights,
    pub runs: usize,
    pub warmup: usize,
    pub threads: usize,
    pub seed: u64,
    pub dataset: Option<PathBuf>,
    /// Weights file per model entry; absent entries use seeded random weights.
    pub model_weights: BTreeMap<String, PathBuf>,
    pub detect: DetectParams,
    pub match_iou: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            models: ReferenceModel::ALL
                .iter()
                .map(|m| m.name().to_string())
                .collect(),
            sizes: DEFAULT_SIZES.to_vec(),
            weights: ScoreWeights::default(),
            runs: 3,
            warmup: 1,
            threads: 1,
            seed: 42,
            dataset: None,
            model_weights: BTreeMap::new(),
            detect: DetectParams::default(),
            match_iou: crate::eval::DEFAULT_MATCH_IOU,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() || self.sizes.is_empty() {
            return Err(Error::precondition(
                "sweep needs at least one model and one size",
            ));
        }
        for &s in &self.sizes {
            if s % 32 != 0 || !(MIN_SIZE..=MAX_SIZE).contains(&s) {
                return Err(Error::precondition(format!(
                    "sweep size {s} must be a multiple of 32 in [{MIN_SIZE}, {MAX_SIZE}]"
                )));
            }
        }
        if self.runs < 3 {
            return Err(Error::precondition("sweep needs at least 3 benchmark runs"));
        }
        if self.threads == 0 {
            return Err(Error::precondition("sweep needs at least one thread"));
        }
        self.detect.validate()
    }

    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    ///
    /// Keys: `models`, `sizes`, `score_weights`, `runs`, `warmup`, `threads`,
    /// `seed`, `dataset`, `conf_threshold`, `nms_threshold`, `match_iou`, and
    /// `weights.<model>` for per-model weights files.
    pub fn apply_text(&mut self, text: &str, base: &Path) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                line: n + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, found {line:?}")))?;
            self.set(key.trim(), value.trim(), base)
                .map_err(|e| match e {
                    Error::Precondition(m) => err(m),
                    other => other,
                })?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::precondition(format!("{key}: invalid value {v:?}")))
        }
        fn list(v: &str) -> impl Iterator<Item = &str> {
            v.split(',').map(str::trim).filter(|s| !s.is_empty())
        }
        let resolve = |v: &str| {
            let p = Path::new(v);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        match key {
            "models" => self.models = list(value).map(String::from).collect(),
            "sizes" => {
                self.sizes = list(value)
                    .map(|s| num(key, s))
                    .collect::<Result<Vec<usize>>>()?
            }
            "score_weights" => {
                let w = list(value)
                    .map(|s| num(key, s))
                    .collect::<Result<Vec<f64>>>()?;
                if w.len() != 4 {
                    return Err(Error::precondition("score_weights needs four values"));
                }
                self.weights = ScoreWeights::new(w[0], w[1], w[2], w[3])?;
            }
            "runs" => self.runs = num(key, value)?,
            "warmup" => self.warmup = num(key, value)?,
            "threads" => self.threads = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "dataset" => self.dataset = Some(resolve(value)),
            "conf_threshold" => self.detect.conf_threshold = num(key, value)?,
            "nms_threshold" => self.detect.nms_iou_threshold = num(key, value)?,
            "match_iou" => self.match_iou = num(key, value)?,
            _ => match key.strip_prefix("weights.") {
                Some(model) if !model.is_empty() => {
                    self.model_weights.insert(model.to_string(), resolve(value));
                }
                _ => return Err(Error::precondition(format!("unknown sweep key {key:?}"))),
            },
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, path.parent().unwrap_or_else(|| Path::new(".")))?;
        Ok(cfg)
    }
}

/// Produces raw metrics for one (model, input size) pair.
pub trait MetricSource {
    fn measure(&mut self, model: &str, input_size: usize) -> Result<RawMetrics>;
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportTable {
    /// Sorted by score, best first; the first row is the selected one.
    pub rows: Vec<MetricRow>,
    /// `model@size: reason` for every pair that could not be evaluated.
    pub skipped: Vec<String>,
}

impl ReportTable {
    pub fn selected(&self) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.selected)
    }
}

/// Measures every pair, normalizes, scores and ranks.
///
/// Pairs whose network cannot be shaped at that size are skipped and listed.
/// Equal scores keep declaration order (models first, then sizes).
pub fn run_sweep<M: MetricSource>(cfg: &SweepConfig, source: &mut M) -> Result<ReportTable> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for model in &cfg.models {
        for &size in &cfg.sizes {
            match source.measure(model, size) {
                Ok(raw) => rows.push(MetricRow::new(model.clone(), size, raw)),
                Err(e @ Error::Config(_)) => {
                    log::warn!("skipping {model}@{size}: {e}");
                    skipped.push(format!("{model}@{size}: {e}"));
                }
                Err(e) => return Err(e),
            }
        }
    }
    if rows.is_empty() {
        return Ok(ReportTable { rows, skipped });
    }
    let mut rows = normalize_metrics(&rows)?;
    for row in &mut rows {
        row.score = score(row, &cfg.weights)?;
    }
    rows.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    rows[0].selected = true;
    Ok(ReportTable { rows, skipped })
}

/// Resolves a model entry: a reference name, `toy`, or a path to a config
/// file.
pub fn resolve_model_config(entry: &str) -> Result<NetworkConfig> {
    if let Some(m) = ReferenceModel::from_name(entry) {
        return Ok(m.config());
    }
    if entry == "toy" {
        return Ok(toy_config());
    }
    let path = Path::new(entry);
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// Evaluates real models on a dataset and benchmarks them.
pub struct DatasetSource {
    cfg: SweepConfig,
    truth: GroundTruthSet,
    models: BTreeMap<String, Model<f32>>,
}

impl DatasetSource {
    pub fn new(cfg: &SweepConfig) -> Result<Self> {
        let dataset = cfg
            .dataset
            .as_ref()
            .ok_or_else(|| Error::precondition("sweep requires a dataset list file"))?;
        let truth = load_annotations(dataset)?;
        let mut models = BTreeMap::new();
        for (i, entry) in cfg.models.iter().enumerate() {
            let config = resolve_model_config(entry)?;
            let model = match cfg
                .model_weights
                .get(entry)
                .or_else(|| cfg.model_weights.get(config.name()))
            {
                Some(path) => {
                    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
                    load_weights(&bytes, &config)?
                }
                None => {
                    let mut rng = StdRng::seed_from_u64(cfg.seed.wrapping_add(i as u64));
                    Model::random(config, RANDOM_WEIGHT_SCALE, &mut rng)
                }
            };
            models.insert(entry.clone(), model);
        }
        Ok(Self {
            cfg: cfg.clone(),
            truth,
            models,
        })
    }
}

impl MetricSource for DatasetSource {
    fn measure(&mut self, model: &str, input_size: usize) -> Result<RawMetrics> {
        let base = self
            .models
            .get(model)
            .ok_or_else(|| Error::precondition(format!("unknown model {model}")))?;
        let sized = base.with_input_size(input_size)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.cfg.threads)
            .build()
            .map_err(|e| Error::config(format!("cannot build worker pool: {e}")))?;
        let detector = ModelDetector {
            model: &sized,
            params: self.cfg.detect,
        };
        let report =
            pool.install(|| evaluate_dataset(&detector, &self.truth, self.cfg.match_iou))?;
        let bench = benchmark_fps(
            &sized,
            &BenchOptions {
                input_size,
                warmup: self.cfg.warmup,
                runs: self.cfg.runs,
                threads: self.cfg.threads,
                seed: self.cfg.seed,
            },
        )?;
        Ok(RawMetrics {
            fps: bench.fps,
            mean_iou: report.mean_iou,
            sensitivity: report.sensitivity,
            precision: report.precision,
        })
    }
}
