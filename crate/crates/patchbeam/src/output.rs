//! CSV tables written and read by the runners.
//!
//! Floats use the shortest representation that parses back to the same
//! value.

use std::io::{Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFLECTION_HEADER: [&str; 5] = ["patch", "x", "u", "v", "w"];
pub const SPECTRUM_HEADER: [&str; 8] =
    ["re", "im", "mode_type", "mode_number", "p_zbend", "p_ybend", "p_torsion", "p_compress"];
pub const TRAJECTORY_HEADER: [&str; 5] = ["t", "tip_u", "tip_v", "tip_w", "energy"];
pub const TIMING_HEADER: [&str; 4] = ["case", "phase", "seconds", "coverage"];
pub const SWEEP_HEADER: [&str; 10] =
    ["param", "value", "status", "max_deflection", "tip_w", "freq_1", "freq_2", "freq_3", "period", "decay"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflectionRow {
    pub patch: usize,
    pub x: f64,
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub re: f64,
    pub im: f64,
    pub mode_type: String,
    pub mode_number: usize,
    pub p_zbend: f64,
    pub p_ybend: f64,
    pub p_torsion: f64,
    pub p_compress: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub tip_u: f64,
    pub tip_v: f64,
    pub tip_w: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub case: String,
    pub phase: String,
    pub seconds: f64,
    pub coverage: f64,
}

/// One sweep value. Quantities are empty when the run failed or does not
/// define them; `status` is `ok` or the error message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: String,
    pub status: String,
    pub max_deflection: Option<f64>,
    pub tip_w: Option<f64>,
    pub freq_1: Option<f64>,
    pub freq_2: Option<f64>,
    pub freq_3: Option<f64>,
    pub period: Option<f64>,
    pub decay: Option<f64>,
}

/// Write `rows` under `header`. The header is written even when `rows` is
/// empty.
pub fn write_rows<W: Write, R: Serialize>(out: W, header: &[&str], rows: &[R]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}

pub fn write_file<R: Serialize>(path: &Path, header: &[&str], rows: &[R]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io { path: path.into(), source })?;
    write_rows(std::io::BufWriter::new(file), header, rows)
}

/// Parse a table whose header must equal `header` exactly.
pub fn read_rows<Rd: Read, R: DeserializeOwned>(input: Rd, header: &[&str]) -> Result<Vec<R>> {
    let mut r = csv::Reader::from_reader(input);
    let found: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if found != header {
        return Err(Error::Parse {
            path: "<csv>".into(),
            message: format!("expected header {header:?}, found {found:?}"),
        });
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn read_file<R: DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<R>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.into(), source })?;
    read_rows(file, header).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse { path: path.into(), message },
        other => other,
    })
}
