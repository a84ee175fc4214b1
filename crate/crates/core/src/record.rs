//! Persisted run records.
//!
//! A record is a directory:
//!
//! - `meta.json`: scenario name, backend, scenario stamp, resolved config,
//!   solver parameters, scalar diagnostics and the snapshot list;
//! - `series.csv`: one row per recorded step with columns
//!   `t, y_1..y_n, u_1..u_n, e_1..e_n, funnel, margin, mass,
//!   cov_i_j (i <= j, row-major), h_norm, min_density`;
//! - `snapshots/t_<ms>.csv`: columns `x_1..x_n, p` on the snapshot grid.
//!
//! Floats are written in Rust's shortest round-trip form; quantities a
//! backend does not produce are written as `NaN`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Spectral,
    Fd,
    Ode,
}

impl Backend {
    pub const ALL: [Backend; 3] = [Backend::Spectral, Backend::Fd, Backend::Ode];

    pub fn name(&self) -> &'static str {
        match self {
            Backend::Spectral => "spectral",
            Backend::Fd => "fd",
            Backend::Ode => "ode",
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "spectral" => Ok(Backend::Spectral),
            "fd" => Ok(Backend::Fd),
            "ode" => Ok(Backend::Ode),
            other => Err(format!("unknown backend `{other}` (expected spectral, fd or ode)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotEntry {
    pub t: f64,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMeta {
    pub format_version: u32,
    pub scenario: String,
    pub backend: Backend,
    /// Canonical JSON of the physics (model, initial density, controller,
    /// disturbance, horizon); records are comparable iff stamps agree.
    pub stamp: String,
    pub dimension: usize,
    /// Backend parameters such as order, grid size and step.
    pub parameters: BTreeMap<String, serde_json::Value>,
    /// Scalar run diagnostics (e.g. truncation tail energy).
    #[serde(default)]
    pub diagnostics: BTreeMap<String, f64>,
    pub config: serde_json::Value,
    pub snapshots: Vec<SnapshotEntry>,
}

impl RunMeta {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let meta: RunMeta = serde_json::from_str(text)?;
        if meta.format_version != FORMAT_VERSION {
            return Err(Error::record(
                "meta.json",
                format!("unsupported format version {}", meta.format_version),
            ));
        }
        if meta.dimension == 0 || meta.dimension > crate::model::MAX_DIM {
            return Err(Error::record("meta.json", format!("invalid dimension {}", meta.dimension)));
        }
        for s in &meta.snapshots {
            if !s.t.is_finite() || !valid_snapshot_name(&s.file) {
                return Err(Error::record("meta.json", format!("invalid snapshot entry {:?}", s.file)));
            }
        }
        Ok(meta)
    }
}

fn valid_snapshot_name(name: &str) -> bool {
    name.strip_prefix("snapshots/t_")
        .and_then(|r| r.strip_suffix(".csv"))
        .is_some_and(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
}

pub fn snapshot_file_name(t: f64) -> String {
    format!("snapshots/t_{:05}.csv", (t * 1000.0).round() as u64)
}

/// Per-step time series; all columns have the same length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Series {
    pub dim: usize,
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
    pub funnel: Vec<f64>,
    pub margin: Vec<f64>,
    pub mass: Vec<f64>,
    /// Upper triangle of the covariance, row-major.
    pub cov: Vec<Vec<f64>>,
    pub h_norm: Vec<f64>,
    pub min_density: Vec<f64>,
}

/// One recorded row, used when appending.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub t: f64,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub e: Vec<f64>,
    pub funnel: f64,
    pub margin: f64,
    pub mass: f64,
    pub cov: Vec<f64>,
    pub h_norm: f64,
    pub min_density: f64,
}

pub fn cov_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

impl Series {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn push(&mut self, row: Row) {
        debug_assert_eq!(row.y.len(), self.dim);
        debug_assert_eq!(row.cov.len(), cov_len(self.dim));
        self.t.push(row.t);
        self.y.push(row.y);
        self.u.push(row.u);
        self.e.push(row.e);
        self.funnel.push(row.funnel);
        self.margin.push(row.margin);
        self.mass.push(row.mass);
        self.cov.push(row.cov);
        self.h_norm.push(row.h_norm);
        self.min_density.push(row.min_density);
    }

    pub fn header(dim: usize) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        for prefix in ["y", "u", "e"] {
            h.extend((1..=dim).map(|i| format!("{prefix}_{i}")));
        }
        h.extend(["funnel", "margin", "mass"].map(String::from));
        for i in 1..=dim {
            for j in i..=dim {
                h.push(format!("cov_{i}_{j}"));
            }
        }
        h.extend(["h_norm", "min_density"].map(String::from));
        h
    }

    /// Covariance matrix at row `r` from the stored upper triangle.
    pub fn covariance(&self, r: usize) -> nalgebra::DMatrix<f64> {
        let n = self.dim;
        let mut m = nalgebra::DMatrix::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                m[(i, j)] = self.cov[r][k];
                m[(j, i)] = self.cov[r][k];
                k += 1;
            }
        }
        m
    }

    pub fn to_csv(&self) -> String {
        let mut out = Series::header(self.dim).join(",");
        out.push('\n');
        for r in 0..self.len() {
            let mut fields: Vec<f64> = vec![self.t[r]];
            fields.extend(&self.y[r]);
            fields.extend(&self.u[r]);
            fields.extend(&self.e[r]);
            fields.extend([self.funnel[r], self.margin[r], self.mass[r]]);
            fields.extend(&self.cov[r]);
            fields.extend([self.h_norm[r], self.min_density[r]]);
            write_row(&mut out, &fields);
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let file = "series.csv";
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let dim = header.iter().filter(|h| h.starts_with("y_")).count();
        if dim == 0 || dim > crate::model::MAX_DIM {
            return Err(Error::record(file, format!("header declares {dim} output columns")));
        }
        if header != Series::header(dim) {
            return Err(Error::record(file, format!("unexpected header {header:?}")));
        }
        let width = header.len();
        let mut series = Series::new(dim);
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            if rec.len() != width {
                return Err(Error::record(file, format!("row {} has {} fields, expected {width}", line + 1, rec.len())));
            }
            let vals = rec
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::record(file, format!("row {}: {e}", line + 1)))?;
            let mut it = vals.into_iter();
            let mut take = |n: usize| -> Vec<f64> { it.by_ref().take(n).collect() };
            let t = take(1)[0];
            let y = take(dim);
            let u = take(dim);
            let e = take(dim);
            let fm = take(3);
            let cov = take(cov_len(dim));
            let tail = take(2);
            if !t.is_finite() || series.t.last().is_some_and(|&prev| !(t > prev)) {
                return Err(Error::record(file, format!("row {}: time {t} is not increasing", line + 1)));
            }
            series.push(Row {
                t,
                y,
                u,
                e,
                funnel: fm[0],
                margin: fm[1],
                mass: fm[2],
                cov,
                h_norm: tail[0],
                min_density: tail[1],
            });
        }
        Ok(series)
    }
}

/// Density values on a point set at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub dim: usize,
    /// Flattened points, `dim` coordinates each.
    pub points: Vec<f64>,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn header(dim: usize) -> Vec<String> {
        let mut h: Vec<String> = (1..=dim).map(|i| format!("x_{i}")).collect();
        h.push("p".into());
        h
    }

    pub fn to_csv(&self) -> String {
        let mut out = Snapshot::header(self.dim).join(",");
        out.push('\n');
        for (x, v) in self.points.chunks_exact(self.dim).zip(&self.values) {
            let mut fields = x.to_vec();
            fields.push(*v);
            write_row(&mut out, &fields);
        }
        out
    }

    pub fn parse_csv(text: &str, t: f64) -> Result<Self> {
        let file = "snapshot";
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        let dim = header.len().saturating_sub(1);
        if dim == 0 || dim > crate::model::MAX_DIM || header != Snapshot::header(dim) {
            return Err(Error::record(file, format!("unexpected header {header:?}")));
        }
        let mut points = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            if rec.len() != dim + 1 {
                return Err(Error::record(file, format!("row {} has {} fields", line + 1, rec.len())));
            }
            for (k, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|e| Error::record(file, format!("row {}: {e}", line + 1)))?;
                if k < dim {
                    if !v.is_finite() {
                        return Err(Error::record(file, format!("row {}: non-finite coordinate", line + 1)));
                    }
                    points.push(v);
                } else {
                    values.push(v);
                }
            }
        }
        Ok(Snapshot {
            t,
            dim,
            points,
            values,
        })
    }
}

fn write_row(out: &mut String, fields: &[f64]) {
    for (i, v) in fields.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v:?}");
    }
    out.push('\n');
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub meta: RunMeta,
    pub series: Series,
    pub snapshots: Vec<Snapshot>,
}

impl RunRecord {
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("snapshots"))?;
        fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&self.meta)? + "\n")?;
        fs::write(dir.join("series.csv"), self.series.to_csv())?;
        for (entry, snap) in self.meta.snapshots.iter().zip(&self.snapshots) {
            fs::write(dir.join(&entry.file), snap.to_csv())?;
        }
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let read = |name: &str| -> Result<String> {
            let path: PathBuf = dir.join(name);
            fs::read_to_string(&path).map_err(|e| Error::record(path, e.to_string()))
        };
        let meta = RunMeta::from_json_str(&read("meta.json")?).map_err(|e| in_file(dir, "meta.json", e))?;
        let series = Series::parse_csv(&read("series.csv")?).map_err(|e| in_file(dir, "series.csv", e))?;
        if series.dim != meta.dimension {
            return Err(Error::record(dir.join("series.csv"), "dimension disagrees with meta.json"));
        }
        let mut snapshots = Vec::with_capacity(meta.snapshots.len());
        for entry in &meta.snapshots {
            let snap = Snapshot::parse_csv(&read(&entry.file)?, entry.t).map_err(|e| in_file(dir, &entry.file, e))?;
            snapshots.push(snap);
        }
        Ok(RunRecord {
            meta,
            series,
            snapshots,
        })
    }
}

fn in_file(dir: &Path, name: &str, err: Error) -> Error {
    match err {
        Error::Record { message, .. } => Error::record(dir.join(name), message),
        other => Error::record(dir.join(name), other.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64) -> Row {
        Row {
            t,
            y: vec![t, -t],
            u: vec![0.1, 0.2],
            e: vec![f64::NAN, 1.0 / 3.0],
            funnel: 0.5,
            margin: 0.5,
            mass: 1.0,
            cov: vec![0.2, 0.0, 0.3],
            h_norm: 2.0,
            min_density: f64::NAN,
        }
    }

    #[test]
    fn header_layout() {
        assert_eq!(
            Series::header(2).join(","),
            "t,y_1,y_2,u_1,u_2,e_1,e_2,funnel,margin,mass,cov_1_1,cov_1_2,cov_2_2,h_norm,min_density"
        );
    }

    #[test]
    fn series_round_trip_keeps_bits() {
        let mut s = Series::new(2);
        s.push(row(0.0));
        s.push(row(0.1 + 0.2));
        let back = Series::parse_csv(&s.to_csv()).unwrap();
        assert_eq!(back.t, s.t);
        assert_eq!(back.y, s.y);
        assert!(back.e[0][0].is_nan());
        assert_eq!(back.e[1][1].to_bits(), (1.0f64 / 3.0).to_bits());
        assert_eq!(back.covariance(1)[(1, 1)], 0.3);
    }

    #[test]
    fn series_rejects_non_increasing_time() {
        let mut s = Series::new(2);
        s.push(row(1.0));
        s.push(row(1.0));
        assert!(Series::parse_csv(&s.to_csv()).is_err());
        assert!(Series::parse_csv("t,y_1\n0,1\n").is_err());
        assert!(Series::parse_csv("").is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let snap = Snapshot {
            t: 0.025,
            dim: 1,
            points: vec![-1.0, 0.0, 1.0],
            values: vec![0.0, 1e-300, -2.5],
        };
        let back = Snapshot::parse_csv(&snap.to_csv(), 0.025).unwrap();
        assert_eq!(back, snap);
        assert_eq!(snapshot_file_name(0.025), "snapshots/t_00025.csv");
        assert_eq!(snapshot_file_name(3.0), "snapshots/t_03000.csv");
    }

    #[test]
    fn meta_rejects_path_escapes() {
        let meta = RunMeta {
            format_version: FORMAT_VERSION,
            scenario: "x".into(),
            backend: Backend::Fd,
            stamp: "{}".into(),
            dimension: 1,
            parameters: BTreeMap::new(),
            diagnostics: BTreeMap::new(),
            config: serde_json::Value::Null,
            snapshots: vec![SnapshotEntry {
                t: 0.0,
                file: "../../etc/passwd".into(),
            }],
        };
        let text = serde_json::to_string(&meta).unwrap();
        assert!(RunMeta::from_json_str(&text).is_err());
    }
}
