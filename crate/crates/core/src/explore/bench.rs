//! Forward-pass latency benchmarking.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{forward, Model};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Held for the duration of every timed section so measurements never overlap.
static TIMING: Mutex<()> = Mutex::new(());

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BenchOptions {
    pub input_size: usize,
    pub warmup: usize,
    pub runs: usize,
    pub threads: usize,
    /// Seed of the fixed random input.
    pub seed: u64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            input_size: 416,
            warmup: 1,
            runs: 5,
            threads: 1,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchResult {
    pub input_size: usize,
    pub threads: usize,
    pub runs: usize,
    /// `runs / total elapsed seconds`.
    pub fps: f64,
    pub latencies: Vec<Duration>,
    pub min: Duration,
    pub median: Duration,
    pub max: Duration,
}

impl BenchResult {
    pub fn from_latencies(input_size: usize, threads: usize, latencies: Vec<Duration>) -> Self {
        let total: Duration = latencies.iter().sum();
        let mut sorted = latencies.clone();
        sorted.sort();
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2
        };
        Self {
            input_size,
            threads,
            runs: n,
            fps: n as f64 / total.as_secs_f64().max(f64::MIN_POSITIVE),
            min: sorted[0],
            median,
            max: sorted[n - 1],
            latencies,
        }
    }

    pub fn mean_latency(&self) -> Duration {
        self.latencies.iter().sum::<Duration>() / self.runs as u32
    }
}

/// Times `runs` forward passes of `model` at `input_size` after `warmup`
/// untimed passes, on a worker pool of `threads` threads.
pub fn benchmark_fps<S: Scalar>(model: &Model<S>, opts: &BenchOptions) -> Result<BenchResult> {
    if opts.runs < 3 {
        return Err(Error::precondition(format!(
            "benchmark needs at least 3 runs, got {}",
            opts.runs
        )));
    }
    if opts.threads == 0 {
        return Err(Error::precondition("benchmark needs at least one thread"));
    }
    let model = model.with_input_size(opts.input_size)?;
    let mut rng = StdRng::seed_from_u64(opts.seed);
    let shape = model.config().input_shape();
    let input = Tensor::<S>::from_vec(
        shape,
        (0..shape.len()).map(|_| S::lit(rng.gen::<f64>())).collect(),
    )?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| Error::config(format!("cannot build worker pool: {e}")))?;

    let _guard = TIMING.lock().unwrap_or_else(|p| p.into_inner());
    pool.install(|| -> Result<BenchResult> {
        for _ in 0..opts.warmup {
            std::hint::black_box(forward(&model, &input)?);
        }
        let mut latencies = Vec::with_capacity(opts.runs);
        for _ in 0..opts.runs {
            let start = Instant::now();
            std::hint::black_box(forward(&model, &input)?);
            latencies.push(start.elapsed());
        }
        Ok(BenchResult::from_latencies(
            opts.input_size,
            opts.threads,
            latencies,
        ))
    })
}
