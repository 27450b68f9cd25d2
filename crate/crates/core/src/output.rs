//! CSV and JSON record writers, a CSV reader for round trips, and the run
//! manifest.

use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::lattice::Geometry;
use crate::observables::ObservableRecord;
use crate::sweeps::{AveragedPoint, OutputFormat, SlopeFit, SweepConfig};

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("record {index} has {found} LDOS entries, expected {expected}")]
    SchemaMismatch {
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("CSV line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cannot serialize JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Fixed leading columns of the record schema.
pub const BASE_COLUMNS: [&str; 16] = [
    "energy",
    "flux_a",
    "flux_b",
    "t_ar",
    "mx",
    "my",
    "T_bare_a",
    "T_bare_b",
    "T_full_a",
    "T_full_b",
    "C_bare",
    "C_full",
    "dephasing_re",
    "dephasing_im",
    "rate",
    "error_flag",
];

/// Shortest decimal with 17 significant digits; reads back bit-exactly.
pub fn format_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

pub fn csv_header(n_ldos: usize) -> Vec<String> {
    let mut h: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    h.extend((0..n_ldos).map(|k| format!("site_{k}")));
    h
}

/// Number of LDOS columns the records share, or a schema error.
fn ldos_width(records: &[ObservableRecord], ldos: bool) -> Result<usize, OutputError> {
    if !ldos {
        return Ok(0);
    }
    let expected = records.first().map_or(0, |r| r.ldos.len());
    for (index, r) in records.iter().enumerate() {
        if r.ldos.len() != expected {
            return Err(OutputError::SchemaMismatch {
                index,
                found: r.ldos.len(),
                expected,
            });
        }
    }
    Ok(expected)
}

fn csv_row(r: &ObservableRecord, ldos: bool) -> String {
    let mut cells = vec![
        format_f64(r.energy),
        format_f64(r.flux_a),
        format_f64(r.flux_b),
        format_f64(r.t_ar),
        r.mx.to_string(),
        r.my.to_string(),
        format_f64(r.t_bare_a),
        format_f64(r.t_bare_b),
        format_f64(r.t_full_a),
        format_f64(r.t_full_b),
        format_f64(r.c_bare),
        format_f64(r.c_full),
        format_f64(r.dephasing.re),
        format_f64(r.dephasing.im),
        format_f64(r.rate),
        u8::from(!r.is_ok()).to_string(),
    ];
    if ldos {
        cells.extend(r.ldos.iter().map(|&x| format_f64(x)));
    }
    cells.join(",")
}

pub fn write_csv<W: Write>(
    records: &[ObservableRecord],
    ldos: bool,
    mut w: W,
) -> Result<(), OutputError> {
    let width = ldos_width(records, ldos)?;
    let io = |source| OutputError::Write {
        path: PathBuf::from("<stream>"),
        source,
    };
    writeln!(w, "{}", csv_header(width).join(",")).map_err(io)?;
    for r in records {
        writeln!(w, "{}", csv_row(r, ldos)).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[derive(Serialize)]
struct JsonRecord<'a> {
    energy: f64,
    flux_a: f64,
    flux_b: f64,
    t_ar: f64,
    mx: usize,
    my: usize,
    #[serde(rename = "T_bare_a")]
    t_bare_a: f64,
    #[serde(rename = "T_bare_b")]
    t_bare_b: f64,
    #[serde(rename = "T_full_a")]
    t_full_a: f64,
    #[serde(rename = "T_full_b")]
    t_full_b: f64,
    #[serde(rename = "C_bare")]
    c_bare: f64,
    #[serde(rename = "C_full")]
    c_full: f64,
    dephasing_re: f64,
    dephasing_im: f64,
    rate: f64,
    error_flag: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ldos: Option<&'a [f64]>,
}

impl<'a> JsonRecord<'a> {
    fn new(r: &'a ObservableRecord, ldos: bool) -> Self {
        Self {
            energy: r.energy,
            flux_a: r.flux_a,
            flux_b: r.flux_b,
            t_ar: r.t_ar,
            mx: r.mx,
            my: r.my,
            t_bare_a: r.t_bare_a,
            t_bare_b: r.t_bare_b,
            t_full_a: r.t_full_a,
            t_full_b: r.t_full_b,
            c_bare: r.c_bare,
            c_full: r.c_full,
            dephasing_re: r.dephasing.re,
            dephasing_im: r.dephasing.im,
            rate: r.rate,
            error_flag: u8::from(!r.is_ok()),
            error: r.error.as_deref(),
            ldos: ldos.then_some(r.ldos.as_slice()),
        }
    }
}

/// JSON array of objects keyed like the CSV header. Non-finite numbers
/// become `null`.
pub fn write_json<W: Write>(
    records: &[ObservableRecord],
    ldos: bool,
    mut w: W,
) -> Result<(), OutputError> {
    ldos_width(records, ldos)?;
    let rows: Vec<JsonRecord> = records.iter().map(|r| JsonRecord::new(r, ldos)).collect();
    serde_json::to_writer_pretty(&mut w, &rows)?;
    let io = |source| OutputError::Write {
        path: PathBuf::from("<stream>"),
        source,
    };
    writeln!(w).map_err(io)?;
    w.flush().map_err(io)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, OutputError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| OutputError::Write {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|source| OutputError::Write {
            path: path.to_path_buf(),
            source,
        })
}

fn relabel(e: OutputError, path: &Path) -> OutputError {
    match e {
        OutputError::Write { source, .. } => OutputError::Write {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    }
}

pub fn write_records(
    records: &[ObservableRecord],
    format: OutputFormat,
    ldos: bool,
    path: &Path,
) -> Result<(), OutputError> {
    let w = create(path)?;
    match format {
        OutputFormat::Csv => write_csv(records, ldos, w),
        OutputFormat::Json => write_json(records, ldos, w),
    }
    .map_err(|e| relabel(e, path))
}

/// A parsed CSV: header and numeric rows. `NaN`, `inf` and `-inf` are
/// accepted.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn read_csv<R: BufRead>(r: R) -> Result<CsvTable, OutputError> {
    let mut lines = r.lines().enumerate();
    let read_err = |source| OutputError::Read {
        path: PathBuf::from("<stream>"),
        source,
    };
    let header: Vec<String> = match lines.next() {
        Some((_, l)) => l.map_err(read_err)?.split(',').map(str::to_string).collect(),
        None => {
            return Err(OutputError::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    let mut rows = Vec::new();
    for (i, l) in lines {
        let l = l.map_err(read_err)?;
        let row = l
            .split(',')
            .map(|c| c.parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| OutputError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        if row.len() != header.len() {
            return Err(OutputError::Parse {
                line: i + 1,
                message: format!("{} cells, header has {}", row.len(), header.len()),
            });
        }
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}

/// `mx, mean_rate, n_used, n_failed` for the averaged dephasing series.
pub fn write_averaged_csv(points: &[AveragedPoint], path: &Path) -> Result<(), OutputError> {
    let mut w = create(path)?;
    let io = |source| OutputError::Write {
        path: path.to_path_buf(),
        source,
    };
    writeln!(w, "mx,mean_rate,n_used,n_failed").map_err(io)?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{}",
            p.mx,
            format_f64(p.mean_rate),
            p.n_used,
            p.n_failed
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

#[derive(Clone, Debug, Serialize)]
pub struct GridDims {
    pub n_energies: usize,
    pub n_t_ar: usize,
    pub n_mx: usize,
    pub n_my: usize,
    pub n_records: usize,
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub timestamp: String,
    pub config: SweepConfig,
    /// The device layout used for each `(mx, my)` pair.
    pub geometries: Vec<Geometry>,
    pub energies: Vec<f64>,
    pub grid: GridDims,
    pub error_count: usize,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dephasing_fit: Option<SlopeFit>,
}

impl RunManifest {
    pub fn new(config: &SweepConfig, records: &[ObservableRecord]) -> Result<Self, crate::Error> {
        let mut geometries = Vec::new();
        for &mx in &config.mx_values {
            for &my in &config.my_values {
                geometries.push(config.geometry.resolve(mx, my)?);
            }
        }
        Ok(Self {
            software: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            config: config.clone(),
            geometries,
            energies: config.energy.energies(),
            grid: GridDims {
                n_energies: config.energy.n_points,
                n_t_ar: config.t_ar_values.len(),
                n_mx: config.mx_values.len(),
                n_my: config.my_values.len(),
                n_records: records.len(),
            },
            error_count: records.iter().filter(|r| !r.is_ok()).count(),
            outputs: Vec::new(),
            dephasing_fit: None,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), OutputError> {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)
            .and_then(|_| w.flush())
            .map_err(|source| OutputError::Write {
                path: path.to_path_buf(),
                source,
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn rec(e: f64, ta: f64, tb: f64, n: usize) -> ObservableRecord {
        ObservableRecord {
            energy: e,
            flux_a: std::f64::consts::PI,
            flux_b: 0.0,
            t_ar: 0.2,
            mx: 0,
            my: 10,
            t_bare_a: ta,
            t_bare_b: tb,
            t_full_a: ta * 0.9,
            t_full_b: tb,
            c_bare: 2.0 * (ta - tb).abs() / (ta + tb),
            c_full: 2.0 * (0.9 * ta - tb).abs() / (0.9 * ta + tb),
            dephasing: Complex64::new(1e-3, -2e-3),
            rate: 4e-3,
            ldos: (0..n).map(|k| k as f64 / 7.0).collect(),
            error: None,
        }
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.2250738585072014e-308, 1e300, 5e-324, 0.0] {
            assert_eq!(format_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert!(format_f64(f64::NAN).parse::<f64>().unwrap().is_nan());
        assert_eq!(format_f64(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn header_and_rows() {
        let rs = vec![rec(0.0, 0.3, 0.1, 3), rec(0.5, 0.2, 0.2, 3)];
        let mut buf = Vec::new();
        write_csv(&rs, true, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("energy,flux_a,flux_b,t_ar,mx,my,T_bare_a"));
        assert!(lines[0].ends_with("error_flag,site_0,site_1,site_2"));
        let t = read_csv(text.as_bytes()).unwrap();
        assert_eq!(t.column("site_2").unwrap()[1], 2.0 / 7.0);
        assert_eq!(t.column("error_flag").unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn ldos_columns_are_opt_in() {
        let mut buf = Vec::new();
        write_csv(&[rec(0.0, 0.3, 0.1, 5)], false, &mut buf).unwrap();
        let t = read_csv(&buf[..]).unwrap();
        assert_eq!(t.header.len(), 16);
    }

    #[test]
    fn ragged_ldos_is_a_schema_error() {
        let rs = vec![rec(0.0, 0.3, 0.1, 3), rec(0.5, 0.2, 0.2, 4)];
        let err = write_csv(&rs, true, Vec::new()).unwrap_err();
        assert!(matches!(err, OutputError::SchemaMismatch { index: 1, .. }));
        // without LDOS the widths do not matter
        write_csv(&rs, false, Vec::new()).unwrap();
    }

    #[test]
    fn json_matches_csv() {
        let mut r = rec(0.25, 0.3, 0.1, 2);
        r.error = Some("boom".into());
        r.rate = f64::NAN;
        let mut buf = Vec::new();
        write_json(&[r.clone()], true, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let o = &v.as_array().unwrap()[0];
        assert_eq!(o["energy"], 0.25);
        assert_eq!(o["T_full_a"].as_f64().unwrap(), r.t_full_a);
        assert_eq!(o["error_flag"], 1);
        assert!(o["rate"].is_null());
        assert_eq!(o["ldos"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn unwritable_path_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = write_records(&[], OutputFormat::Csv, false, &blocker.join("out.csv"))
            .unwrap_err();
        assert!(matches!(err, OutputError::Write { .. }));
    }
}
