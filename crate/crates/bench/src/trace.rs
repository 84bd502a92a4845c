//! CSV output. Per-cell traces go to `traces/{run_id}.csv`; `summary.csv`
//! holds one row per cell, sorted by run id.
//!
//! Trace columns: `run_id, method, transform, kappa, eta, seed, iter, rel_err,
//! dist, wall_time_s`. The `dist` cell is empty when the distance was not
//! tracked.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::{CellResult, SUMMARY_THRESHOLD};

pub const TRACE_HEADER: [&str; 10] =
    ["run_id", "method", "transform", "kappa", "eta", "seed", "iter", "rel_err", "dist", "wall_time_s"];

pub const SUMMARY_HEADER: [&str; 13] = [
    "run_id",
    "method",
    "transform",
    "kappa",
    "eta",
    "seed",
    "snr_db",
    "status",
    "iterations",
    "final_rel_err",
    "iters_to_1e-10",
    "wall_time_s",
    "error",
];

/// Shortest round-trip form, so identical values always print identically.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

fn write_cell(path: &Path, cell: &CellResult) -> Result<()> {
    let mut w = writer(path)?;
    let k = &cell.key;
    let fixed = [
        cell.run_id.clone(),
        k.method.name().to_string(),
        k.instance.transform.name().to_string(),
        k.instance.kappa.to_string(),
        k.eta.to_string(),
        k.instance.seed.to_string(),
    ];
    w.write_record(TRACE_HEADER).map_err(|e| Error::csv(path, e))?;
    for r in cell.history.iter().flat_map(|h| &h.records) {
        let mut row = fixed.to_vec();
        row.push(r.iter.to_string());
        row.push(fmt_f64(r.rel_err));
        row.push(r.dist.map(fmt_f64).unwrap_or_default());
        row.push(r.wall_time_s.to_string());
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes every trace plus the summary; returns the trace paths in run-id
/// order.
pub fn write_results(out: &Path, cells: &[CellResult]) -> Result<Vec<PathBuf>> {
    let dir = out.join("traces");
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut sorted: Vec<&CellResult> = cells.iter().collect();
    sorted.sort_by(|a, b| a.run_id.cmp(&b.run_id));

    let mut paths = Vec::with_capacity(sorted.len());
    for cell in &sorted {
        let path = dir.join(format!("{}.csv", cell.run_id));
        write_cell(&path, cell)?;
        paths.push(path);
    }

    let path = out.join("summary.csv");
    let mut w = writer(&path)?;
    w.write_record(SUMMARY_HEADER).map_err(|e| Error::csv(&path, e))?;
    for cell in &sorted {
        let k = &cell.key;
        let h = cell.history.as_ref();
        let row = [
            cell.run_id.clone(),
            k.method.name().to_string(),
            k.instance.transform.name().to_string(),
            k.instance.kappa.to_string(),
            k.eta.to_string(),
            k.instance.seed.to_string(),
            k.instance.snr_db.map(|s| s.to_string()).unwrap_or_default(),
            cell.status().to_string(),
            h.and_then(|h| h.records.last()).map(|r| r.iter.to_string()).unwrap_or_default(),
            h.map(|h| fmt_f64(h.final_rel_err())).unwrap_or_default(),
            h.and_then(|h| h.iterations_to(SUMMARY_THRESHOLD)).map(|t| t.to_string()).unwrap_or_default(),
            h.and_then(|h| h.records.last()).map(|r| r.wall_time_s.to_string()).unwrap_or_default(),
            cell.error.clone().unwrap_or_default(),
        ];
        w.write_record(&row).map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(paths)
}

/// One parsed trace row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub run_id: String,
    pub method: String,
    pub transform: String,
    pub kappa: f64,
    pub eta: f64,
    pub seed: u64,
    pub iter: usize,
    pub rel_err: f64,
    pub dist: Option<f64>,
    pub wall_time_s: f64,
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str, path: &Path) -> Result<T> {
    rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| {
        Error::config(format!("{}: column {name}", path.display()), format!("bad value {:?}", rec.get(i)))
    })
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header = r.headers().map_err(|e| Error::csv(path, e))?.clone();
    if header.iter().ne(TRACE_HEADER) {
        return Err(Error::EmptyTraceSet(format!("{} does not have the trace columns", path.display())));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        rows.push(TraceRow {
            run_id: field(&rec, 0, "run_id", path)?,
            method: field(&rec, 1, "method", path)?,
            transform: field(&rec, 2, "transform", path)?,
            kappa: field(&rec, 3, "kappa", path)?,
            eta: field(&rec, 4, "eta", path)?,
            seed: field(&rec, 5, "seed", path)?,
            iter: field(&rec, 6, "iter", path)?,
            rel_err: field(&rec, 7, "rel_err", path)?,
            dist: match rec.get(8) {
                Some("") | None => None,
                Some(_) => Some(field(&rec, 8, "dist", path)?),
            },
            wall_time_s: field(&rec, 9, "wall_time_s", path)?,
        });
    }
    Ok(rows)
}

/// One parsed summary row (the columns the plots use).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub run_id: String,
    pub method: String,
    pub transform: String,
    pub kappa: f64,
    pub eta: f64,
    pub seed: u64,
    pub snr_db: Option<f64>,
    pub status: String,
    pub final_rel_err: Option<f64>,
    pub iters_to_threshold: Option<usize>,
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header = r.headers().map_err(|e| Error::csv(path, e))?.clone();
    if header.iter().ne(SUMMARY_HEADER) {
        return Err(Error::EmptyTraceSet(format!("{} does not have the summary columns", path.display())));
    }
    let opt = |rec: &csv::StringRecord, i: usize| rec.get(i).filter(|s| !s.is_empty()).map(str::to_string);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        rows.push(SummaryRow {
            run_id: field(&rec, 0, "run_id", path)?,
            method: field(&rec, 1, "method", path)?,
            transform: field(&rec, 2, "transform", path)?,
            kappa: field(&rec, 3, "kappa", path)?,
            eta: field(&rec, 4, "eta", path)?,
            seed: field(&rec, 5, "seed", path)?,
            snr_db: opt(&rec, 6).and_then(|s| s.parse().ok()),
            status: field(&rec, 7, "status", path)?,
            final_rel_err: opt(&rec, 9).and_then(|s| s.parse().ok()),
            iters_to_threshold: opt(&rec, 10).and_then(|s| s.parse().ok()),
        });
    }
    Ok(rows)
}
