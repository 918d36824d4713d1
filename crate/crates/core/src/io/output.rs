//! Time-series, snapshot and report files.
//!
//! Floating-point columns are written with 17 significant digits, which
//! round-trips every `f64` exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::diagnostics::{DiagnosticsReport, Snapshot};
use crate::discretization::{FieldState, Mesh};
use crate::error::{Error, Result};

pub const TIMESERIES_HEADER: [&str; 14] = [
    "t",
    "tau",
    "energy_total",
    "energy_gradchi",
    "energy_elastic",
    "enthalpy_L1",
    "w_min",
    "chi_min",
    "chi_max",
    "R1",
    "R2",
    "R3",
    "cancel_resid",
    "outer_iters",
];

/// One row of the time-series file; the initial state has `tau = 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct TimeseriesRow {
    pub t: f64,
    pub tau: f64,
    pub energy_total: f64,
    pub energy_gradchi: f64,
    pub energy_elastic: f64,
    pub enthalpy_l1: f64,
    pub w_min: f64,
    pub chi_min: f64,
    pub chi_max: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub cancel_resid: f64,
    pub outer_iters: usize,
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

pub fn write_timeseries(path: &Path, rows: &[TimeseriesRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e| csv_error(path, e);
    w.write_record(TIMESERIES_HEADER).map_err(err)?;
    for r in rows {
        let mut rec: Vec<String> = [
            r.t,
            r.tau,
            r.energy_total,
            r.energy_gradchi,
            r.energy_elastic,
            r.enthalpy_l1,
            r.w_min,
            r.chi_min,
            r.chi_max,
            r.r1,
            r.r2,
            r.r3,
            r.cancel_resid,
        ]
        .iter()
        .map(|v| fmt_f64(*v))
        .collect();
        rec.push(r.outer_iters.to_string());
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn snapshot_path(dir: &Path, step: usize) -> PathBuf {
    dir.join(format!("snap_{step}.csv"))
}

fn snapshot_header(dim: usize) -> Vec<String> {
    let mut h = vec!["step".to_string(), "t".into(), "x".into(), "y".into()];
    for f in ["u", "v"] {
        for c in 1..=dim {
            h.push(format!("{f}{c}"));
        }
    }
    h.extend(["w".into(), "chi".into(), "xi".into()]);
    h
}

/// Writes the nodal arrays of one state; `xi` is written as zeros when
/// absent.
pub fn write_snapshot(path: &Path, mesh: &Mesh, step: usize, state: &FieldState, xi: Option<&[f64]>) -> Result<()> {
    let d = mesh.dim();
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e| csv_error(path, e);
    w.write_record(snapshot_header(d)).map_err(err)?;
    for (i, c) in mesh.coords().iter().enumerate() {
        let mut rec = vec![step.to_string(), fmt_f64(state.t), fmt_f64(c[0]), fmt_f64(c[1])];
        for field in [&state.u, &state.v] {
            rec.extend((0..d).map(|k| fmt_f64(field[i * d + k])));
        }
        rec.push(fmt_f64(state.w[i]));
        rec.push(fmt_f64(state.chi[i]));
        rec.push(fmt_f64(xi.map_or(0.0, |x| x[i])));
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads one snapshot written by [`write_snapshot`] for a mesh of `dim`.
pub fn read_snapshot(path: &Path, dim: usize) -> Result<Snapshot> {
    let bad = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header != snapshot_header(dim) {
        return Err(bad(format!("unexpected header {header:?} for dimension {dim}")));
    }
    let mut s = FieldState {
        t: 0.0,
        u: Vec::new(),
        v: Vec::new(),
        w: Vec::new(),
        chi: Vec::new(),
    };
    let mut xi = Vec::new();
    let mut step = 0;
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad(format!("row {}: column {k} is not a number", row + 2)))
        };
        step = rec
            .get(0)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(format!("row {}: bad step index", row + 2)))?;
        s.t = num(1)?;
        for k in 0..dim {
            s.u.push(num(4 + k)?);
            s.v.push(num(4 + dim + k)?);
        }
        s.w.push(num(4 + 2 * dim)?);
        s.chi.push(num(5 + 2 * dim)?);
        xi.push(num(6 + 2 * dim)?);
    }
    Ok(Snapshot {
        step,
        state: s,
        xi: if step == 0 { None } else { Some(xi) },
    })
}

/// All `snap_<k>.csv` files of a directory, ordered by step.
pub fn read_snapshots(dir: &Path, dim: usize) -> Result<Vec<Snapshot>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = Vec::new();
    for e in entries {
        let e = e.map_err(|err| Error::io(dir, err))?;
        let name = e.file_name().to_string_lossy().into_owned();
        if let Some(k) = name
            .strip_prefix("snap_")
            .and_then(|r| r.strip_suffix(".csv"))
            .and_then(|k| k.parse::<usize>().ok())
        {
            found.push((k, e.path()));
        }
    }
    found.sort();
    if found.is_empty() {
        return Err(Error::Format {
            path: dir.to_path_buf(),
            message: "no snap_<k>.csv files".into(),
        });
    }
    found.iter().map(|(_, p)| read_snapshot(p, dim)).collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn write_report(path: &Path, report: &DiagnosticsReport) -> Result<()> {
    write_json(path, report)
}

/// Writes a header and rows of numbers.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e| csv_error(path, e);
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r.iter().map(|v| fmt_f64(*v))).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        for dim in [1, 2] {
            let mesh = Mesh::new(dim, 4).unwrap();
            let n = mesh.node_count();
            let state = FieldState {
                t: 0.1 + 0.2,
                u: (0..n * dim).map(|i| (i as f64).sin() / 3.0).collect(),
                v: (0..n * dim).map(|i| (i as f64).cos() * 1e-300).collect(),
                w: (0..n).map(|i| 1.0 / (i as f64 + 7.0)).collect(),
                chi: (0..n).map(|i| (i as f64 / n as f64).sqrt()).collect(),
            };
            let xi: Vec<f64> = (0..n).map(|i| -(i as f64) / 11.0).collect();
            let path = snapshot_path(dir.path(), 5);
            write_snapshot(&path, &mesh, 5, &state, Some(&xi)).unwrap();
            let back = read_snapshot(&path, dim).unwrap();
            assert_eq!(back.step, 5);
            assert_eq!(back.state, state);
            assert_eq!(back.xi.unwrap(), xi);
        }
    }

    #[test]
    fn timeseries_has_fixed_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ts.csv");
        write_timeseries(&path, &[TimeseriesRow::default()]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,tau,energy_total,energy_gradchi,energy_elastic,enthalpy_L1,w_min,chi_min,chi_max,R1,R2,R3,cancel_resid,outer_iters"
        );
        assert!(lines.next().unwrap().starts_with("0.0000000000000000e0,"));
    }
}
