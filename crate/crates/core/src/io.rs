//! Text formats for records, spectra, functional samples and g-functions.
//!
//! * record CSV: a header line `fs=<Hz>,t0=<s>`, then one value per line;
//! * spectrum CSV: header `omega_rad_s,s`, then one `(ω, s(ω))` pair per line;
//! * functional-sample CSV: first row the grid points, then one row per curve.
//!
//! Numbers are written in shortest round-trip form, so reading back a written
//! file reproduces the values bit for bit. Parse errors carry 1-based line numbers.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{Curve, FunctionalSample, Grid};
use crate::projections::{BasisSpec, GVector};
use crate::spectra::{SpectralDensity, TimeSeriesRecord};

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line: line as u64,
        msg: msg.into(),
    }
}

fn parse_number(s: &str, line: usize) -> Result<f64> {
    let t = s.trim();
    let v: f64 = t
        .parse()
        .map_err(|_| parse_err(line, format!("'{t}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("'{t}' is not finite")));
    }
    Ok(v)
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Non-blank lines with their 1-based numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub fn format_record(rec: &TimeSeriesRecord) -> String {
    let mut out = format!("fs={},t0={}\n", rec.fs, rec.t0);
    for v in &rec.values {
        out.push_str(&v.to_string());
        out.push('\n');
    }
    out
}

pub fn parse_record(text: &str) -> Result<TimeSeriesRecord> {
    let mut lines = content_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty record file"))?;
    let mut fs = None;
    let mut t0 = 0.0;
    for field in header.split(',') {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| parse_err(hline, format!("expected key=value in header, got '{field}'")))?;
        match key.trim() {
            "fs" => fs = Some(parse_number(value, hline)?),
            "t0" => t0 = parse_number(value, hline)?,
            other => return Err(parse_err(hline, format!("unknown header key '{other}'"))),
        }
    }
    let fs = fs.ok_or_else(|| parse_err(hline, "header lacks fs"))?;
    let values = lines
        .map(|(n, l)| parse_number(l, n))
        .collect::<Result<Vec<_>>>()?;
    TimeSeriesRecord::new(fs, values, t0).map_err(|e| parse_err(hline, e.to_string()))
}

pub fn read_record(path: &Path) -> Result<TimeSeriesRecord> {
    parse_record(&read_text(path)?)
}

pub fn format_spectrum(s: &SpectralDensity) -> String {
    let mut out = String::from("omega_rad_s,s\n");
    for (w, v) in s.freq().points().iter().zip(s.values()) {
        out.push_str(&format!("{w},{v}\n"));
    }
    out
}

pub fn parse_spectrum(text: &str) -> Result<SpectralDensity> {
    let mut freq = Vec::new();
    let mut values = Vec::new();
    for (n, line) in content_lines(text) {
        if freq.is_empty() && values.is_empty() && line.starts_with("omega") {
            continue;
        }
        let (w, v) = line
            .split_once(',')
            .ok_or_else(|| parse_err(n, "expected two columns"))?;
        freq.push(parse_number(w, n)?);
        values.push(parse_number(v, n)?);
    }
    let grid = Grid::new(freq).map_err(|e| parse_err(1, e.to_string()))?;
    SpectralDensity::new(Arc::new(grid), values).map_err(|e| parse_err(1, e.to_string()))
}

pub fn read_spectrum(path: &Path) -> Result<SpectralDensity> {
    parse_spectrum(&read_text(path)?)
}

pub fn format_sample(sample: &FunctionalSample) -> String {
    let mut out = join(sample.grid().points().iter().copied());
    out.push('\n');
    for c in sample.curves() {
        out.push_str(&join(c.values().iter().copied()));
        out.push('\n');
    }
    out
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    let msg = match e.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("expected {expected_len} fields, found {len}"),
        _ => e.to_string(),
    };
    Error::Parse { line, msg }
}

pub fn parse_sample(text: &str, label: &str) -> Result<FunctionalSample> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut grid: Option<Arc<Grid>> = None;
    let mut curves = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0) as usize;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .map(|f| parse_number(f, line))
            .collect::<Result<Vec<_>>>()?;
        match &grid {
            None => grid = Some(Arc::new(Grid::new(row).map_err(|e| parse_err(line, e.to_string()))?)),
            Some(g) => curves.push(Curve::new(g.clone(), row).map_err(|e| parse_err(line, e.to_string()))?),
        }
    }
    if grid.is_none() {
        return Err(parse_err(1, "missing grid row"));
    }
    if curves.is_empty() {
        return Err(Error::EmptySample);
    }
    FunctionalSample::new(curves, label)
}

pub fn read_sample(path: &Path) -> Result<FunctionalSample> {
    let label = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sample");
    parse_sample(&read_text(path)?, label)
}

/// Metadata written next to a g-function CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GVectorSidecar {
    pub scheme: String,
    pub params: BasisSpec,
    /// `"fixed"` for schemes independent of the data, otherwise a
    /// description of the sample the functions were estimated from.
    pub provenance: String,
}

/// The g-functions as a functional-sample CSV plus their sidecar.
pub fn format_gvector(g: &GVector, provenance: &str) -> Result<(String, GVectorSidecar)> {
    let sample = FunctionalSample::new(g.functions().to_vec(), "g")?;
    let sidecar = GVectorSidecar {
        scheme: g.spec().scheme_name().to_string(),
        params: g.spec().clone(),
        provenance: if g.data_driven() {
            provenance.to_string()
        } else {
            "fixed".to_string()
        },
    };
    Ok((format_sample(&sample), sidecar))
}

/// Reads g-functions back; they are tagged with the sidecar's parameters.
pub fn parse_gvector(csv_text: &str, sidecar: &GVectorSidecar) -> Result<GVector> {
    let sample = parse_sample(csv_text, "g")?;
    GVector::new(sample.curves().to_vec(), sidecar.params.clone(), None)
}
