//! File formats.
//!
//! Matrices are stored either as CSV (header line `rows,cols`, then one line
//! of comma-separated decimals per row) or in the binary layout
//!
//! ```text
//! b"IRLSMAT1" | rows: u64 LE | cols: u64 LE | rows·cols f64 LE, column-major
//! ```
//!
//! Traces are JSON lines, one [`IterationRecord`] per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{IrlsError, Result};
use crate::linalg::DenseMatrix;
use crate::trace::{IterationRecord, SolveTrace};

pub const MAGIC: &[u8; 8] = b"IRLSMAT1";
/// Version of the sidecar and summary JSON layouts.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    /// `.csv` and `.txt` are text; everything else is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("csv") | Some("txt") => MatrixFormat::Csv,
            _ => MatrixFormat::Binary,
        }
    }
}

fn check_finite(m: &DenseMatrix) -> Result<()> {
    match m.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(IrlsError::Format(format!(
            "non-finite value at ({}, {})",
            k % m.nrows().max(1),
            k / m.nrows().max(1)
        ))),
        None => Ok(()),
    }
}

/// Values are printed in shortest round-trip form, so reading them back is
/// bit-exact.
pub fn write_csv<W: Write>(mut w: W, m: &DenseMatrix) -> Result<()> {
    check_finite(m)?;
    writeln!(w, "{},{}", m.nrows(), m.ncols())?;
    let mut line = String::new();
    for i in 0..m.nrows() {
        line.clear();
        for j in 0..m.ncols() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&m[(i, j)].to_string());
        }
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

fn parse_dim(s: &str, what: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| IrlsError::Format(format!("bad {what} in header: {s:?}")))
}

pub fn read_csv<R: BufRead>(r: R) -> Result<DenseMatrix> {
    let mut lines = r.lines().enumerate().filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()));
    let header = match lines.next() {
        Some((_, l)) => l?,
        None => return Err(IrlsError::Format("empty file".into())),
    };
    let (rows, cols) = header
        .split_once(',')
        .ok_or_else(|| IrlsError::Format(format!("header must be `rows,cols`, got {header:?}")))?;
    let (rows, cols) = (parse_dim(rows, "rows")?, parse_dim(cols, "cols")?);
    let mut m = DenseMatrix::zeros(rows, cols);
    // rows of a zero-column matrix are blank lines, already filtered out
    let data_rows = if cols == 0 { 0 } else { rows };
    for i in 0..data_rows {
        let (lineno, line) = lines
            .next()
            .ok_or_else(|| IrlsError::Format(format!("expected {rows} data rows, found {i}")))?;
        let line = line?;
        let mut count = 0;
        for (j, field) in line.split(',').enumerate() {
            if j >= cols {
                return Err(IrlsError::Format(format!("line {}: more than {cols} values", lineno + 1)));
            }
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| IrlsError::Format(format!("line {}: bad number {field:?}", lineno + 1)))?;
            if !v.is_finite() {
                return Err(IrlsError::Format(format!("line {}: non-finite value", lineno + 1)));
            }
            m[(i, j)] = v;
            count += 1;
        }
        if count != cols {
            return Err(IrlsError::Format(format!("line {}: expected {cols} values, found {count}", lineno + 1)));
        }
    }
    if let Some((lineno, _)) = lines.next() {
        return Err(IrlsError::Format(format!("line {}: trailing data after {data_rows} rows", lineno + 1)));
    }
    Ok(m)
}

pub fn write_binary<W: Write>(mut w: W, m: &DenseMatrix) -> Result<()> {
    check_finite(m)?;
    w.write_all(MAGIC)?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for v in m.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|_| IrlsError::Format("truncated header".into()))?;
    Ok(u64::from_le_bytes(buf))
}

pub fn read_binary<R: Read>(mut r: R) -> Result<DenseMatrix> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| IrlsError::Format("file too short for magic".into()))?;
    if &magic != MAGIC {
        return Err(IrlsError::Format("bad magic; expected IRLSMAT1".into()));
    }
    let rows = read_u64(&mut r)?;
    let cols = read_u64(&mut r)?;
    let len = rows
        .checked_mul(cols)
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| IrlsError::Format(format!("dimensions {rows}x{cols} too large")))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != len * 8 {
        return Err(IrlsError::Format(format!(
            "expected {} payload bytes for {rows}x{cols}, found {}",
            len * 8,
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let m = DenseMatrix::from_vec(rows as usize, cols as usize, data);
    check_finite(&m)?;
    Ok(m)
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    match MatrixFormat::from_path(path) {
        MatrixFormat::Csv => write_csv(w, m),
        MatrixFormat::Binary => write_binary(w, m),
    }
}

/// Reads either format; binary files are recognized by their magic bytes
/// whatever their extension.
pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let mut r = BufReader::new(File::open(path)?);
    if r.fill_buf()?.starts_with(MAGIC) {
        read_binary(r)
    } else {
        read_csv(r)
    }
}

/// Ground truth stored next to a generated data matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub schema_version: u32,
    /// `subspaces` or `row_corrupted`.
    pub kind: String,
    pub seed: u64,
    pub rng: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
    /// Indices of the columns (or rows, for row corruption) that were
    /// perturbed.
    pub corrupted: Vec<usize>,
    pub params: serde_json::Value,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_trace<W: Write>(mut w: W, trace: &SolveTrace) -> Result<()> {
    for rec in &trace.records {
        serde_json::to_writer(&mut w, rec)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: BufRead>(r: R) -> Result<SolveTrace> {
    let mut records = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str::<IterationRecord>(&line)?);
    }
    Ok(SolveTrace { records })
}

pub fn write_trace_file(path: &Path, trace: &SolveTrace) -> Result<()> {
    write_trace(BufWriter::new(File::create(path)?), trace)
}

pub fn read_trace_file(path: &Path) -> Result<SolveTrace> {
    read_trace(BufReader::new(File::open(path)?))
}

/// End-of-run report: final exact objective, iteration count and wall time,
/// together with the full configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub command: String,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub stationarity: f64,
    pub final_mu: f64,
    pub seconds: f64,
    pub config: serde_json::Value,
    pub schedule: serde_json::Value,
    pub input: String,
}

impl RunSummary {
    pub fn from_trace(command: &str, trace: &SolveTrace, converged: bool) -> Self {
        let last = trace.last();
        RunSummary {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            converged,
            iterations: trace.len(),
            objective: last.map_or(f64::NAN, |r| r.j_exact),
            stationarity: last.map_or(f64::NAN, |r| r.stationarity),
            final_mu: last.map_or(f64::NAN, |r| r.mu),
            seconds: last.map_or(0.0, |r| r.seconds),
            config: serde_json::Value::Null,
            schedule: serde_json::Value::Null,
            input: String::new(),
        }
    }
}
