use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One row of a benchmark table. Times are wall-clock seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub dim: usize,
    pub patches: String,
    pub degree: usize,
    pub refine: u32,
    pub elements: usize,
    pub formulation: String,
    pub problem: String,
    pub workers: usize,
    pub holders: usize,
    pub deterministic: bool,
    /// Unknowns of the coupled global system.
    pub dofs: usize,
    pub n_primal: usize,
    pub n_multipliers: usize,
    pub iterations: usize,
    pub condition: f64,
    pub assemble_time: f64,
    pub solve_time: f64,
    pub total_time: f64,
    pub l2_error: f64,
    pub h1_error: f64,
    pub dg_error: Option<f64>,
    /// Largest mesh size over patches.
    pub h: f64,
    /// Largest patch diameter.
    pub patch_diameter: f64,
    /// Largest disagreement between copies of a coupled dof.
    pub mismatch: f64,
    pub messages_assemble: usize,
    pub bytes_assemble: usize,
    pub messages_solve: usize,
    pub bytes_solve: usize,
    /// Hash of the bits of the recovered solution, for exact comparisons.
    pub solution_hash: String,
    /// Scaling studies only.
    pub speedup: Option<f64>,
}

impl SolveReport {
    /// Field names in output order.
    pub const FIELDS: [&'static str; 30] = [
        "dim",
        "patches",
        "degree",
        "refine",
        "elements",
        "formulation",
        "problem",
        "workers",
        "holders",
        "deterministic",
        "dofs",
        "n_primal",
        "n_multipliers",
        "iterations",
        "condition",
        "assemble_time",
        "solve_time",
        "total_time",
        "l2_error",
        "h1_error",
        "dg_error",
        "h",
        "patch_diameter",
        "mismatch",
        "messages_assemble",
        "bytes_assemble",
        "messages_solve",
        "bytes_solve",
        "solution_hash",
        "speedup",
    ];
}

/// FNV-1a over the bit patterns of `v`.
pub fn hash_bits(v: &[f64]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for x in v {
        for b in x.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    format!("{h:016x}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(Error::Config(format!("unknown report format '{other}' (json, csv)"))),
        }
    }
}

/// Writes `reports` as a JSON array or as CSV with one row per report.
pub fn emit_report(reports: &[SolveReport], format: ReportFormat, out: impl Write) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("no reports to emit".into()));
    }
    match format {
        ReportFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, reports)?;
            writeln!(out)?;
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in reports {
                w.serialize(r)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

pub fn write_report(reports: &[SolveReport], format: ReportFormat, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    emit_report(reports, format, std::io::BufWriter::new(file))
}

pub fn parse_json_reports(text: &str) -> Result<Vec<SolveReport>> {
    Ok(serde_json::from_str(text)?)
}

pub fn parse_csv_reports(text: &str) -> Result<Vec<SolveReport>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}
