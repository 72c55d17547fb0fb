//! On-disk strain formats.
//!
//! The binary form is a pair of files: `{name}.json` holding
//! `{"f_s", "t0", "n", "detector", "dtype": "f8le"}` and `{name}.bin` holding `n`
//! little-endian `f64` samples. The text form is a single-column CSV preceded by
//! `# f_s=<Hz>` (and optionally `# t0=<s>`, `# detector=<name>`) comment lines.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{SignalError, TimeSeries};

#[derive(Debug, Error)]
pub enum StrainIoError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed strain file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error(transparent)]
    Signal(#[from] SignalError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StrainIoError + '_ {
    move |source| StrainIoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrainHeader {
    pub f_s: f64,
    pub t0: f64,
    pub n: usize,
    pub detector: String,
    pub dtype: String,
}

/// Strain samples with the detector label they were recorded under.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainRecord {
    pub series: TimeSeries,
    pub detector: String,
}

pub fn encode_f8le(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_f8le(bytes: &[u8]) -> Option<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return None;
    }
    Some(
        bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect(),
    )
}

/// Writes `{dir}/{name}.json` and `{dir}/{name}.bin`; returns the header path.
pub fn write_strain(
    dir: &Path,
    name: &str,
    series: &TimeSeries,
    detector: &str,
) -> Result<PathBuf, StrainIoError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let header = StrainHeader {
        f_s: series.sample_rate(),
        t0: series.start(),
        n: series.len(),
        detector: detector.to_string(),
        dtype: "f8le".into(),
    };
    let json_path = dir.join(format!("{name}.json"));
    let bin_path = dir.join(format!("{name}.bin"));
    let text = serde_json::to_string_pretty(&header).expect("header serializes");
    fs::write(&json_path, text).map_err(io_err(&json_path))?;
    fs::write(&bin_path, encode_f8le(series.samples())).map_err(io_err(&bin_path))?;
    Ok(json_path)
}

/// Reads either form, dispatching on the extension (`.json` or `.csv`).
pub fn read_strain(path: &Path) -> Result<StrainRecord, StrainIoError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_strain_csv(path),
        _ => read_strain_binary(path),
    }
}

fn read_strain_binary(json_path: &Path) -> Result<StrainRecord, StrainIoError> {
    let text = fs::read_to_string(json_path).map_err(io_err(json_path))?;
    let header: StrainHeader =
        serde_json::from_str(&text).map_err(|e| StrainIoError::Format {
            path: json_path.to_path_buf(),
            reason: e.to_string(),
        })?;
    if header.dtype != "f8le" {
        return Err(StrainIoError::Format {
            path: json_path.to_path_buf(),
            reason: format!("unsupported dtype {:?}", header.dtype),
        });
    }
    let bin_path = json_path.with_extension("bin");
    let bytes = fs::read(&bin_path).map_err(io_err(&bin_path))?;
    let samples = decode_f8le(&bytes).ok_or_else(|| StrainIoError::Format {
        path: bin_path.clone(),
        reason: "payload length is not a multiple of 8".into(),
    })?;
    if samples.len() != header.n {
        return Err(StrainIoError::Format {
            path: bin_path,
            reason: format!("header says {} samples, payload has {}", header.n, samples.len()),
        });
    }
    Ok(StrainRecord {
        series: TimeSeries::new(samples, header.f_s, header.t0)?,
        detector: header.detector,
    })
}

pub fn write_strain_csv(path: &Path, series: &TimeSeries, detector: &str) -> Result<(), StrainIoError> {
    let mut out = Vec::with_capacity(series.len() * 24);
    writeln!(out, "# f_s={}", series.sample_rate()).unwrap();
    writeln!(out, "# t0={}", series.start()).unwrap();
    writeln!(out, "# detector={detector}").unwrap();
    for v in series.samples() {
        writeln!(out, "{v:e}").unwrap();
    }
    fs::write(path, out).map_err(io_err(path))
}

fn read_strain_csv(path: &Path) -> Result<StrainRecord, StrainIoError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let fmt = |reason: String| StrainIoError::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut f_s = None;
    let mut t0 = 0.0;
    let mut detector = String::new();
    let mut samples = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((key, value)) = meta.trim().split_once('=') {
                let value = value.trim();
                match key.trim() {
                    "f_s" => {
                        f_s = Some(value.parse::<f64>().map_err(|e| fmt(format!("f_s: {e}")))?)
                    }
                    "t0" => t0 = value.parse::<f64>().map_err(|e| fmt(format!("t0: {e}")))?,
                    "detector" => detector = value.to_string(),
                    _ => {}
                }
            }
            continue;
        }
        let v = line
            .split(',')
            .next()
            .unwrap_or("")
            .trim()
            .parse::<f64>()
            .map_err(|e| fmt(format!("line {}: {e}", lineno + 1)))?;
        samples.push(v);
    }
    let f_s = f_s.ok_or_else(|| fmt("missing `# f_s=` header".into()))?;
    Ok(StrainRecord {
        series: TimeSeries::new(samples, f_s, t0)?,
        detector,
    })
}
