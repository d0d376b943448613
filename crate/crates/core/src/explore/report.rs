//! CSV and JSON rendering of sweep results.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explore::score::MetricRow;
use crate::explore::sweep::ReportTable;

pub const CSV_HEADER: &str =
    "model,input_size,fps,iou,sensitivity,precision,fps_n,iou_n,sens_n,prec_n,score,selected";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// One report line with every float rounded to four decimals. Undefined
/// metrics are `None` (`n/a` in CSV, `null` in JSON).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub model: String,
    pub input_size: usize,
    pub fps: f64,
    pub iou: Option<f64>,
    pub sensitivity: Option<f64>,
    pub precision: Option<f64>,
    pub fps_n: f64,
    pub iou_n: f64,
    pub sens_n: f64,
    pub prec_n: f64,
    pub score: f64,
    pub selected: bool,
}

fn round4(v: f64) -> f64 {
    format!("{v:.4}").parse().expect("formatted float parses")
}

impl From<&MetricRow> for ReportRecord {
    fn from(row: &MetricRow) -> Self {
        Self {
            model: row.model.clone(),
            input_size: row.input_size,
            fps: round4(row.raw.fps),
            iou: row.raw.mean_iou.map(round4),
            sensitivity: row.raw.sensitivity.map(round4),
            precision: row.raw.precision.map(round4),
            fps_n: round4(row.normalized[0]),
            iou_n: round4(row.normalized[1]),
            sens_n: round4(row.normalized[2]),
            prec_n: round4(row.normalized[3]),
            score: round4(row.score),
            selected: row.selected,
        }
    }
}

pub fn records(table: &ReportTable) -> Vec<ReportRecord> {
    table.rows.iter().map(ReportRecord::from).collect()
}

pub fn emit_report(table: &ReportTable, format: ReportFormat) -> Vec<u8> {
    let recs = records(table);
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(&recs).expect("records serialize");
            out.push(b'\n');
            out
        }
        ReportFormat::Csv => {
            let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for r in recs {
                out.push_str(&format!(
                    "{},{},{:.4},{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{}\n",
                    r.model,
                    r.input_size,
                    r.fps,
                    opt(r.iou),
                    opt(r.sensitivity),
                    opt(r.precision),
                    r.fps_n,
                    r.iou_n,
                    r.sens_n,
                    r.prec_n,
                    r.score,
                    r.selected
                ));
            }
            out.into_bytes()
        }
    }
}

/// Reads back a CSV produced by [`emit_report`].
pub fn parse_csv_report(text: &str) -> Result<Vec<ReportRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: "missing report header".into(),
            })
        }
    }
    let mut out = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: n + 1,
            message,
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(err(format!("expected 12 fields, found {}", f.len())));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| err(format!("invalid number {s:?}")))
        };
        let opt = |s: &str| -> Result<Option<f64>> {
            if s == "n/a" {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        out.push(ReportRecord {
            model: f[0].to_string(),
            input_size: f[1]
                .parse()
                .map_err(|_| err(format!("invalid size {:?}", f[1])))?,
            fps: num(f[2])?,
            iou: opt(f[3])?,
            sensitivity: opt(f[4])?,
            precision: opt(f[5])?,
            fps_n: num(f[6])?,
            iou_n: num(f[7])?,
            sens_n: num(f[8])?,
            prec_n: num(f[9])?,
            score: num(f[10])?,
            selected: match f[11] {
                "true" => true,
                "false" => false,
                other => return Err(err(format!("invalid flag {other:?}"))),
            },
        });
    }
    Ok(out)
}
