//! Result serializers.

use std::io::Write;
use std::path::{Path, PathBuf};

use mimo_sic::harness::{BerCurve, BerPoint, PointDiagnostics, SweepConfig};
use mimo_sic::DetectorKind;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CSV_HEADER: [&str; 8] = [
    "detector",
    "snr_db",
    "trials",
    "total_bits",
    "bit_errors",
    "ber",
    "ci_low",
    "ci_high",
];

/// Everything needed to reproduce a result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub config: SweepConfig,
    pub outputs: Vec<PathBuf>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn new(config: SweepConfig, outputs: Vec<PathBuf>, warnings: Vec<String>) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            tool: "mimo-sic".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp,
            config,
            outputs,
            warnings,
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub detector: DetectorKind,
    pub point: BerPoint,
}

fn record(row: &CsvRow) -> [String; 8] {
    let p = &row.point;
    [
        row.detector.label().to_string(),
        p.snr_db.to_string(),
        p.trials.to_string(),
        p.total_bits.to_string(),
        p.bit_errors.to_string(),
        p.ber.to_string(),
        p.ci_low.to_string(),
        p.ci_high.to_string(),
    ]
}

pub fn rows(curves: &[BerCurve]) -> Vec<CsvRow> {
    curves
        .iter()
        .flat_map(|c| {
            c.points.iter().map(|p| CsvRow {
                detector: c.detector,
                point: p.clone(),
            })
        })
        .collect()
}

pub fn write_csv_rows<W: Write>(out: W, rows: &[CsvRow]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(record(row))?;
    }
    w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}

pub fn write_csv<W: Write>(out: W, curves: &[BerCurve]) -> Result<(), CliError> {
    write_csv_rows(out, &rows(curves))
}

pub fn csv_string(curves: &[BerCurve]) -> Result<String, CliError> {
    let mut buf = Vec::new();
    write_csv(&mut buf, curves)?;
    Ok(String::from_utf8(buf).expect("csv output is ASCII"))
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>, CliError> {
    let bad = |msg: String| CliError::Parse(msg);
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    if r.headers()?.iter().ne(CSV_HEADER) {
        return Err(bad("unexpected CSV header".into()));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64, CliError> {
            rec[i].parse().map_err(|e| bad(format!("column {i}: {e}")))
        };
        let u = |i: usize| -> Result<u64, CliError> {
            rec[i].parse().map_err(|e| bad(format!("column {i}: {e}")))
        };
        let detector = rec[0]
            .parse::<DetectorKind>()
            .map_err(|e| bad(e.to_string()))?;
        out.push(CsvRow {
            detector,
            point: BerPoint {
                snr_db: f(1)?,
                trials: u(2)?,
                total_bits: u(3)?,
                bit_errors: u(4)?,
                ber: f(5)?,
                ci_low: f(6)?,
                ci_high: f(7)?,
            },
        });
    }
    Ok(out)
}

#[derive(Serialize)]
struct JsonReport<'a> {
    manifest: &'a RunManifest,
    curves: &'a [BerCurve],
    diagnostics: &'a [PointDiagnostics],
}

pub fn json_string(
    curves: &[BerCurve],
    diagnostics: &[PointDiagnostics],
    manifest: &RunManifest,
) -> Result<String, CliError> {
    let report = JsonReport {
        manifest,
        curves,
        diagnostics,
    };
    let mut s = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// `results.csv` → `results.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.manifest.json"))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}
