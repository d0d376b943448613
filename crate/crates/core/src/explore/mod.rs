//! Benchmarking, metric normalization, weighted scoring and the design-space
//! sweep.

pub mod bench;
pub mod report;
pub mod score;
pub mod sweep;

pub use bench::{benchmark_fps, BenchOptions, BenchResult};
pub use report::{emit_report, parse_csv_report, records, ReportFormat, ReportRecord, CSV_HEADER};
pub use score::{normalize_metrics, score, MetricRow, RawMetrics, ScoreWeights};
pub use sweep::{
    resolve_model_config, run_sweep, DatasetSource, MetricSource, ReportTable, SweepConfig,
    DEFAULT_SIZES, RANDOM_WEIGHT_SCALE,
};
