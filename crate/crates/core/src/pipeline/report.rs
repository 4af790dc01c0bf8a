//! Report emission: a structured JSON summary per run, a margins table with
//! one row per degree and stratum, and plot-ready point sets.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{RunConfig, RunRecord, Timing};
use crate::sections::AHNormReport;
use crate::{Error, Result};

/// Uniform floor on `eta_cert` across degrees.
pub const UNIFORM_FLOOR: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratumSummary {
    pub id: String,
    pub eta_grid: f64,
    pub eta_cert: f64,
    pub h: f64,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    pub witness: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalSummary {
    pub location: Vec<f64>,
    pub margin: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CountSummary {
    pub zeros: Option<i32>,
    pub base: Vec<Vec<f64>>,
    pub critical: Vec<CriticalSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub k: u32,
    pub ah_norms: AHNormReport,
    pub strata: Vec<StratumSummary>,
    pub counts: CountSummary,
    pub timing: Timing,
    pub failure: Option<String>,
}

impl RunSummary {
    pub fn of(r: &RunRecord) -> Self {
        let strata = r
            .measurement
            .strata
            .iter()
            .map(|s| StratumSummary {
                id: s.stratum.clone(),
                eta_grid: s.eta_grid,
                eta_cert: s.eta_cert,
                h: s.h,
                lipschitz: s.lipschitz,
                witness: s.witness.clone(),
            })
            .collect();
        let c = &r.measurement.counts;
        let counts = CountSummary {
            zeros: c.zeros.as_ref().map(|z| z.oracle.count),
            base: c.pencil.as_ref().map(|p| p.base_points.clone()).unwrap_or_default(),
            critical: c
                .pencil
                .as_ref()
                .map(|p| {
                    p.critical
                        .iter()
                        .map(|cp| CriticalSummary {
                            location: cp.location.clone(),
                            margin: cp.hessian_margin,
                        })
                        .collect()
                })
                .unwrap_or_default(),
        };
        RunSummary {
            config: r.config.clone(),
            k: r.k,
            ah_norms: r.measurement.ah_norms.clone(),
            strata,
            counts,
            timing: r.timing.clone(),
            failure: r.failure.as_ref().map(|f| f.message.clone()),
        }
    }
}

/// One row of the margins table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginRow {
    pub k: u32,
    pub seed: u64,
    pub stratum: String,
    pub eta_grid: f64,
    pub eta_cert: f64,
    pub h: f64,
    pub lipschitz: f64,
    /// `eta_cert ≥ UNIFORM_FLOOR`.
    pub above_floor: bool,
    /// `eta_cert` not above its value at the previous degree of the sweep
    /// (same stratum and seed); true on the first degree.
    pub nonincreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRow {
    pub k: u32,
    pub coords: Vec<f64>,
    pub kind: String,
}

pub fn margin_rows(records: &[RunRecord]) -> Vec<MarginRow> {
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.config.seed, r.k));
    let mut prev: BTreeMap<(u64, String), f64> = BTreeMap::new();
    let mut rows = Vec::new();
    for r in sorted {
        for s in &r.measurement.strata {
            let key = (r.config.seed, s.stratum.clone());
            let nonincreasing = prev.get(&key).is_none_or(|p| s.eta_cert <= *p);
            prev.insert(key, s.eta_cert);
            rows.push(MarginRow {
                k: r.k,
                seed: r.config.seed,
                stratum: s.stratum.clone(),
                eta_grid: s.eta_grid,
                eta_cert: s.eta_cert,
                h: s.h,
                lipschitz: s.lipschitz,
                above_floor: s.eta_cert >= UNIFORM_FLOOR,
                nonincreasing,
            });
        }
    }
    rows
}

pub fn point_rows(records: &[RunRecord]) -> Vec<PointRow> {
    let mut rows = Vec::new();
    for r in records {
        let c = &r.measurement.counts;
        if let Some(z) = &c.zeros {
            for p in &z.oracle.zeros {
                rows.push(PointRow {
                    k: r.k,
                    coords: p.location.clone(),
                    kind: "zero".into(),
                });
            }
        }
        if let Some(p) = &c.pencil {
            for b in &p.base_points {
                rows.push(PointRow {
                    k: r.k,
                    coords: b.clone(),
                    kind: "base".into(),
                });
            }
            for cp in &p.critical {
                rows.push(PointRow {
                    k: r.k,
                    coords: cp.location.clone(),
                    kind: "critical".into(),
                });
            }
        }
        for s in &r.measurement.strata {
            rows.push(PointRow {
                k: r.k,
                coords: s.witness.clone(),
                kind: format!("witness_{}", s.stratum),
            });
        }
    }
    rows
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("{other:?}")),
    }
}

pub fn write_margins(rows: &[MarginRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_margins(path: &Path) -> Result<Vec<MarginRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    r.deserialize().map(|row| row.map_err(csv_error)).collect()
}

/// Points as `k, x1, …, x_{2n}, type`.
pub fn write_points(rows: &[PointRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    let dim = rows.iter().map(|r| r.coords.len()).max().unwrap_or(2);
    let mut header = vec!["k".to_string()];
    header.extend((1..=dim).map(|i| format!("x{i}")));
    header.push("type".into());
    w.write_record(&header).map_err(csv_error)?;
    for row in rows {
        let mut rec = vec![row.k.to_string()];
        rec.extend(row.coords.iter().map(|v| format!("{v:?}")));
        rec.push(row.kind.clone());
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_points(path: &Path) -> Result<Vec<PointRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        let fields: Vec<&str> = rec.iter().collect();
        let bad = |_| Error::InvalidInput(format!("malformed point row {fields:?}"));
        let k = fields[0]
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad degree {}", fields[0])))?;
        let coords = fields[1..fields.len() - 1]
            .iter()
            .map(|v| v.parse::<f64>().map_err(bad))
            .collect::<Result<Vec<_>>>()?;
        out.push(PointRow {
            k,
            coords,
            kind: fields[fields.len() - 1].to_string(),
        });
    }
    Ok(out)
}

/// Files written by [`emit_report`].
#[derive(Clone, Debug, PartialEq)]
pub struct ReportFiles {
    pub summary: PathBuf,
    pub margins: PathBuf,
    pub points: PathBuf,
}

/// Write `report.json`, `margins.csv` and `points.csv` into `dir`.
pub fn emit_report(records: &[RunRecord], dir: &Path) -> Result<ReportFiles> {
    std::fs::create_dir_all(dir)?;
    let files = ReportFiles {
        summary: dir.join("report.json"),
        margins: dir.join("margins.csv"),
        points: dir.join("points.csv"),
    };
    let summaries: Vec<RunSummary> = records.iter().map(RunSummary::of).collect();
    std::fs::write(&files.summary, serde_json::to_string_pretty(&summaries)?)?;
    write_margins(&margin_rows(records), &files.margins)?;
    write_points(&point_rows(records), &files.points)?;
    Ok(files)
}

pub fn read_summary(path: &Path) -> Result<Vec<RunSummary>> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
