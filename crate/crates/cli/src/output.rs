//! JSON-lines and CSV emission. Every line and row carries the config hash,
//! the seed list and the artifact version; nothing time-dependent is written,
//! so identical configurations give byte-identical files.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use weaklab::verify::VerificationReport;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub config_hash: String,
    pub seeds: String,
    pub version: &'static str,
}

#[derive(Serialize)]
struct Line<'a, T: Serialize> {
    #[serde(flatten)]
    meta: &'a Meta,
    #[serde(flatten)]
    item: &'a T,
}

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// One JSON object per item, with the metadata fields merged in.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T], meta: &Meta) -> io::Result<()> {
    let mut out = io::BufWriter::new(fs::File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut out, &Line { meta, item })?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// CSV with `headers` plus the metadata columns; headers only when `rows` is empty.
pub fn write_csv(path: &Path, headers: &[&str], rows: &[Vec<String>], meta: &Meta) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let meta_cols = ["config_hash", "seeds", "version"];
    w.write_record(headers.iter().chain(meta_cols.iter()))?;
    for row in rows {
        let tail = [meta.config_hash.as_str(), meta.seeds.as_str(), meta.version];
        w.write_record(row.iter().map(String::as_str).chain(tail))?;
    }
    w.flush()
}

pub const REPORT_COLUMNS: [&str; 12] = [
    "inequality",
    "phi",
    "p",
    "depth",
    "instances",
    "vacuous",
    "lhs",
    "rhs",
    "max_ratio",
    "fitted_constant",
    "passed",
    "failed_checks",
];

fn report_row(r: &VerificationReport) -> Vec<String> {
    let failed: Vec<&str> = r.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    vec![
        r.inequality.clone(),
        r.phi.clone().unwrap_or_default(),
        opt_num(r.p),
        r.depth.map_or_else(|| "all".to_string(), |d| d.to_string()),
        r.instances.to_string(),
        r.vacuous.to_string(),
        num(r.lhs),
        num(r.rhs),
        num(r.ratio),
        num(r.fitted_constant),
        r.passed().to_string(),
        failed.join(";"),
    ]
}

/// Writes `<stem>.jsonl` and `<stem>.csv` under `dir`.
pub fn write_reports(dir: &Path, stem: &str, reports: &[VerificationReport], meta: &Meta) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let jsonl = dir.join(format!("{stem}.jsonl"));
    let csv = dir.join(format!("{stem}.csv"));
    write_jsonl(&jsonl, reports, meta)?;
    let rows: Vec<Vec<String>> = reports.iter().map(report_row).collect();
    write_csv(&csv, &REPORT_COLUMNS, &rows, meta)?;
    Ok(vec![jsonl, csv])
}
