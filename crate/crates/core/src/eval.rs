//! EPE / D1 disparity metrics and run comparison tables.
//!
//! Sums are accumulated per row (left to right) and the row sums are then
//! added in row order, so reports are bit-identical for any thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgcore::{ensure_same_dims, DisparityMap, ImageError, ValidityMask};

pub const DEFAULT_D1_THRESHOLD: f64 = 3.0;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("threshold must be > 0, got {0}")]
    Threshold(f64),
    #[error("no pixel is valid in prediction, ground truth and mask")]
    Empty,
    #[error("no reports to compare")]
    NoReports,
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub threshold: f64,
    /// Count GT-valid pixels without a prediction as errors above threshold.
    pub penalize_missing: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_D1_THRESHOLD,
            penalize_missing: true,
        }
    }
}

/// Scalar part of an evaluation; this is what goes into JSON reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    /// Mean absolute error over pixels valid in prediction, GT and mask.
    pub epe: f64,
    /// Fraction in [0, 1].
    pub d1: f64,
    pub n_evaluated: usize,
    /// GT-valid, mask-valid pixels with no prediction.
    pub n_missing: usize,
    pub threshold: f64,
    pub penalize_missing: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub summary: EvalSummary,
    /// `|pred − gt|` on evaluated pixels, NaN elsewhere.
    pub error_map: DisparityMap,
}

#[derive(Default, Clone, Copy)]
struct RowStats {
    abs_sum: f64,
    n: usize,
    bad: usize,
    missing: usize,
}

pub fn evaluate(
    pred: &DisparityMap,
    gt: &DisparityMap,
    mask: Option<&ValidityMask>,
    opts: EvalOptions,
) -> Result<EvalReport> {
    if opts.threshold.is_nan() || opts.threshold <= 0.0 {
        return Err(EvalError::Threshold(opts.threshold));
    }
    ensure_same_dims(gt.dims(), pred.dims())?;
    if let Some(m) = mask {
        ensure_same_dims(gt.dims(), m.dims())?;
    }
    let (w, h) = gt.dims();
    let rows: Vec<(RowStats, Vec<f32>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut s = RowStats::default();
            let mut errs = vec![f32::NAN; w];
            for (x, err) in errs.iter_mut().enumerate() {
                let g = gt.get(x, y);
                if g.is_nan() || mask.is_some_and(|m| !m.get(x, y)) {
                    continue;
                }
                let p = pred.get(x, y);
                if p.is_nan() {
                    s.missing += 1;
                    continue;
                }
                let e = (f64::from(p) - f64::from(g)).abs();
                s.abs_sum += e;
                s.n += 1;
                if e > opts.threshold {
                    s.bad += 1;
                }
                *err = e as f32;
            }
            (s, errs)
        })
        .collect();
    let mut total = RowStats::default();
    for (s, _) in &rows {
        total.abs_sum += s.abs_sum;
        total.n += s.n;
        total.bad += s.bad;
        total.missing += s.missing;
    }
    if total.n == 0 {
        return Err(EvalError::Empty);
    }
    let d1 = if opts.penalize_missing {
        (total.bad + total.missing) as f64 / (total.n + total.missing) as f64
    } else {
        total.bad as f64 / total.n as f64
    };
    let error_map = DisparityMap::new(w, h, rows.into_iter().flat_map(|(_, e)| e).collect())?;
    Ok(EvalReport {
        summary: EvalSummary {
            epe: total.abs_sum / total.n as f64,
            d1,
            n_evaluated: total.n,
            n_missing: total.missing,
            threshold: opts.threshold,
            penalize_missing: opts.penalize_missing,
        },
        error_map,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<(String, EvalSummary)>,
}

const CSV_HEADER: [&str; 7] = [
    "label",
    "epe",
    "d1",
    "n_evaluated",
    "n_missing",
    "threshold",
    "penalize_missing",
];

/// Rows sorted by label; equal labels keep their input order.
pub fn compare_runs(reports: &[(String, EvalSummary)]) -> Result<ComparisonTable> {
    if reports.is_empty() {
        return Err(EvalError::NoReports);
    }
    let mut rows = reports.to_vec();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(ComparisonTable { rows })
}

impl ComparisonTable {
    /// Fixed-width text table; D1 is shown in percent.
    pub fn to_text(&self) -> String {
        let lw = self
            .rows
            .iter()
            .map(|(l, _)| l.chars().count())
            .max()
            .unwrap_or(0)
            .max(5);
        let mut out = format!(
            "{:<lw$}  {:>10}  {:>10}  {:>10}  {:>9}\n",
            "label", "EPE (px)", "D1 (%)", "evaluated", "missing"
        );
        for (label, s) in &self.rows {
            out.push_str(&format!(
                "{:<lw$}  {:>10.6}  {:>10.6}  {:>10}  {:>9}\n",
                label,
                s.epe,
                s.d1 * 100.0,
                s.n_evaluated,
                s.n_missing
            ));
        }
        out
    }

    /// CSV with D1 as a fraction; floats use shortest round-trip formatting.
    pub fn to_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| EvalError::Csv(e.to_string());
        wtr.write_record(CSV_HEADER).map_err(err)?;
        for (label, s) in &self.rows {
            wtr.write_record([
                label.clone(),
                s.epe.to_string(),
                s.d1.to_string(),
                s.n_evaluated.to_string(),
                s.n_missing.to_string(),
                s.threshold.to_string(),
                s.penalize_missing.to_string(),
            ])
            .map_err(err)?;
        }
        let bytes = wtr.into_inner().map_err(|e| EvalError::Csv(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| EvalError::Csv(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| EvalError::Csv(e.to_string()))?;
        if headers.iter().ne(CSV_HEADER) {
            return Err(EvalError::Csv(format!("unexpected header {headers:?}")));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| EvalError::Csv(e.to_string()))?;
            let bad = |field: &str| EvalError::Csv(format!("row {}: bad {field}", i + 1));
            let f = |k: usize| rec.get(k).ok_or_else(|| bad(CSV_HEADER[k]));
            rows.push((
                f(0)?.to_string(),
                EvalSummary {
                    epe: f(1)?.parse().map_err(|_| bad("epe"))?,
                    d1: f(2)?.parse().map_err(|_| bad("d1"))?,
                    n_evaluated: f(3)?.parse().map_err(|_| bad("n_evaluated"))?,
                    n_missing: f(4)?.parse().map_err(|_| bad("n_missing"))?,
                    threshold: f(5)?.parse().map_err(|_| bad("threshold"))?,
                    penalize_missing: f(6)?.parse().map_err(|_| bad("penalize_missing"))?,
                },
            ));
        }
        Ok(Self { rows })
    }
}
