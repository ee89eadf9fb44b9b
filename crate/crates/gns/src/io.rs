//! CSV, JSON and binary artifacts.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use gns_core::basis::BasisSet;
use gns_core::integrator::RefinementTable;
use gns_core::verifier::{BoundReport, SeparationSeries};
use gns_core::{GridField, Trajectory, TriadTensor};
use serde::{Deserialize, Serialize};

pub const TRAJECTORY_HEADER: [&str; 7] = ["t", "E", "gradE", "l4", "int_grad2", "int_f", "int_grad4"];
pub const STATES_HEADER: [&str; 3] = ["t", "j", "c_j"];

#[derive(Debug)]
pub struct IoError {
    pub path: PathBuf,
    /// 1-based line of the offending record, header included.
    pub line: Option<u64>,
    pub message: String,
}

impl fmt::Display for IoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}: row {} (line {l}): {}", self.path.display(), l.saturating_sub(1), self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

impl std::error::Error for IoError {}

fn err(path: &Path, line: Option<u64>, message: impl Into<String>) -> IoError {
    IoError {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn create(path: &Path) -> Result<csv::Writer<BufWriter<File>>, IoError> {
    let file = File::create(path).map_err(|e| err(path, None, e.to_string()))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn finish(path: &Path, mut w: csv::Writer<BufWriter<File>>) -> Result<(), IoError> {
    w.flush().map_err(|e| err(path, None, e.to_string()))
}

fn row<I: IntoIterator<Item = String>>(path: &Path, w: &mut csv::Writer<BufWriter<File>>, fields: I) -> Result<(), IoError> {
    w.write_record(fields).map_err(|e| err(path, None, e.to_string()))
}

/// Shortest exact representation; parses back bit for bit.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), IoError> {
    let mut w = create(path)?;
    row(path, &mut w, TRAJECTORY_HEADER.map(String::from))?;
    for (t, d) in traj.times.iter().zip(&traj.diagnostics) {
        let vals = [*t, d.energy, d.grad_sq, d.l4, d.int_grad_sq, d.int_forcing_norm, d.int_grad4];
        row(path, &mut w, vals.map(num))?;
    }
    finish(path, w)
}

pub fn write_states(path: &Path, traj: &Trajectory) -> Result<(), IoError> {
    let mut w = create(path)?;
    row(path, &mut w, STATES_HEADER.map(String::from))?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        for (j, c) in s.values().iter().enumerate() {
            row(path, &mut w, [num(*t), j.to_string(), num(*c)])?;
        }
    }
    finish(path, w)
}

fn reader(path: &Path, header: &[&str]) -> Result<csv::Reader<File>, IoError> {
    let file = File::open(path).map_err(|e| err(path, None, e.to_string()))?;
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let found = r.headers().map_err(|e| err(path, Some(1), e.to_string()))?;
    if found.iter().ne(header.iter().copied()) {
        return Err(err(path, Some(1), format!("expected header `{}`", header.join(","))));
    }
    Ok(r)
}

fn field<T: std::str::FromStr>(path: &Path, line: u64, rec: &csv::StringRecord, i: usize, name: &str) -> Result<T, IoError> {
    rec.get(i)
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| err(path, Some(line), format!("column `{name}` is not a valid number")))
}

fn records(path: &Path, r: &mut csv::Reader<File>) -> Result<Vec<(u64, csv::StringRecord)>, IoError> {
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line());
            err(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        out.push((line, rec));
    }
    Ok(out)
}

/// Rows of `trajectory.csv` in column order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryTable {
    pub rows: Vec<[f64; 7]>,
    /// File line of each row.
    pub lines: Vec<u64>,
}

impl TrajectoryTable {
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[i]).collect()
    }
}

pub fn read_trajectory(path: &Path) -> Result<TrajectoryTable, IoError> {
    let mut r = reader(path, &TRAJECTORY_HEADER)?;
    let mut table = TrajectoryTable {
        rows: Vec::new(),
        lines: Vec::new(),
    };
    for (line, rec) in records(path, &mut r)? {
        let mut vals = [0.0_f64; 7];
        for (i, v) in vals.iter_mut().enumerate() {
            *v = field(path, line, &rec, i, TRAJECTORY_HEADER[i])?;
            if !v.is_finite() {
                return Err(err(path, Some(line), format!("column `{}` is not finite", TRAJECTORY_HEADER[i])));
            }
        }
        if let Some(prev) = table.rows.last() {
            if vals[0] <= prev[0] {
                return Err(err(path, Some(line), "times must increase"));
            }
        }
        table.rows.push(vals);
        table.lines.push(line);
    }
    if table.rows.is_empty() {
        return Err(err(path, None, "no samples"));
    }
    Ok(table)
}

/// States grouped by sample time; every sample must list modes `0..n` in order.
pub fn read_states(path: &Path) -> Result<Vec<(f64, Vec<f64>)>, IoError> {
    let mut r = reader(path, &STATES_HEADER)?;
    let mut out: Vec<(f64, Vec<f64>)> = Vec::new();
    for (line, rec) in records(path, &mut r)? {
        let t: f64 = field(path, line, &rec, 0, "t")?;
        let j: usize = field(path, line, &rec, 1, "j")?;
        let c: f64 = field(path, line, &rec, 2, "c_j")?;
        if !(t.is_finite() && c.is_finite()) {
            return Err(err(path, Some(line), "non-finite value"));
        }
        match out.last_mut() {
            Some((t0, values)) if *t0 == t => {
                if j != values.len() {
                    return Err(err(path, Some(line), format!("expected mode index {}, found {j}", values.len())));
                }
                values.push(c);
            }
            last => {
                if let Some((t0, _)) = last {
                    if t <= *t0 {
                        return Err(err(path, Some(line), "times must increase"));
                    }
                }
                if j != 0 {
                    return Err(err(path, Some(line), format!("sample at t = {t} must start at mode 0")));
                }
                out.push((t, vec![c]));
            }
        }
    }
    if let Some(n) = out.first().map(|(_, v)| v.len()) {
        if let Some((t, v)) = out.iter().find(|(_, v)| v.len() != n) {
            return Err(err(path, None, format!("sample at t = {t} has {} modes, expected {n}", v.len())));
        }
    }
    Ok(out)
}

pub fn write_separation(path: &Path, series: &SeparationSeries) -> Result<(), IoError> {
    let mut w = create(path)?;
    row(path, &mut w, ["t", "phi", "envelope", "ratio"].map(String::from))?;
    for k in 0..series.times.len() {
        row(path, &mut w, [series.times[k], series.phi[k], series.envelope(k), series.ratio(k)].map(num))?;
    }
    finish(path, w)
}

pub fn write_convergence(path: &Path, table: &RefinementTable) -> Result<(), IoError> {
    let mut w = create(path)?;
    let low = table.rows.first().map(|r| r.low_modes.len()).unwrap_or(0);
    let mut header: Vec<String> = ["cutoff", "n", "diff"].map(String::from).to_vec();
    header.extend((0..low).map(|j| format!("c_{j}")));
    row(path, &mut w, header)?;
    for r in &table.rows {
        let mut rec = vec![r.cutoff.to_string(), r.modes.to_string(), r.difference.map(num).unwrap_or_default()];
        rec.extend(r.low_modes.iter().map(|v| num(*v)));
        row(path, &mut w, rec)?;
    }
    finish(path, w)
}

pub fn write_basis<W: Write>(out: W, basis: &BasisSet) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["j", "kx", "ky", "kz", "pol", "parity", "lambda"])?;
    for (j, m) in basis.modes().iter().enumerate() {
        let k = m.index.k;
        w.write_record([
            j.to_string(),
            k[0].to_string(),
            k[1].to_string(),
            k[2].to_string(),
            m.index.polarization.number().to_string(),
            m.index.parity.to_string(),
            m.eigenvalue.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tensor<W: Write>(out: W, tensor: &TriadTensor) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "j", "m", "value"])?;
    for e in tensor.entries() {
        w.write_record([e.i.to_string(), e.j.to_string(), e.m.to_string(), num(e.value)])?;
    }
    w.flush()?;
    Ok(())
}

/// Header line `M,cutoff` followed by row-major little-endian `f64` samples.
pub fn write_grid_binary(path: &Path, grid: &GridField) -> Result<(), IoError> {
    let file = File::create(path).map_err(|e| err(path, None, e.to_string()))?;
    let mut w = BufWriter::new(file);
    let io = |e: std::io::Error| err(path, None, e.to_string());
    writeln!(w, "{},{}", grid.resolution(), grid.cutoff()).map_err(io)?;
    for v in grid.values() {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_grid_binary(path: &Path) -> Result<GridField, IoError> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| err(path, None, e.to_string()))?;
    let nl = bytes.iter().position(|b| *b == b'\n').ok_or_else(|| err(path, Some(1), "missing header line"))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| err(path, Some(1), "header is not text"))?;
    let (m, k) = header.split_once(',').ok_or_else(|| err(path, Some(1), "header must be `M,cutoff`"))?;
    let m: usize = m.parse().map_err(|_| err(path, Some(1), "bad resolution"))?;
    let k: u32 = k.parse().map_err(|_| err(path, Some(1), "bad cutoff"))?;
    let body = &bytes[nl + 1..];
    if body.len() != m * m * m * 3 * 8 {
        return Err(err(path, None, format!("expected {} samples", m * m * m * 3)));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    GridField::new(m, k, values).map_err(|e| err(path, None, e.to_string()))
}

/// `ix,iy,iz,ux,uy,uz` per node.
pub fn write_grid_csv(path: &Path, grid: &GridField) -> Result<(), IoError> {
    let mut w = create(path)?;
    row(path, &mut w, ["ix", "iy", "iz", "ux", "uy", "uz"].map(String::from))?;
    let m = grid.resolution();
    for x in 0..m {
        for y in 0..m {
            for z in 0..m {
                let u = grid.at(x, y, z);
                row(path, &mut w, [x.to_string(), y.to_string(), z.to_string(), num(u[0]), num(u[1]), num(u[2])])?;
            }
        }
    }
    finish(path, w)
}

/// One entry of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub satisfied: bool,
    pub t: Option<f64>,
    pub slack: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

impl From<&BoundReport> for ReportRow {
    fn from(r: &BoundReport) -> Self {
        ReportRow {
            name: r.name.clone(),
            lhs: r.lhs,
            rhs: r.rhs,
            margin: r.margin,
            satisfied: r.satisfied,
            t: r.time,
            slack: r.slack,
            flag: r.flag.map(String::from),
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let file = File::create(path).map_err(|e| err(path, None, e.to_string()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| err(path, None, e.to_string()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| err(path, None, e.to_string()))
}

pub fn write_report(path: &Path, reports: &[BoundReport]) -> Result<(), IoError> {
    let rows: Vec<ReportRow> = reports.iter().map(ReportRow::from).collect();
    write_json(path, &rows)
}

pub fn read_report(path: &Path) -> Result<Vec<ReportRow>, IoError> {
    let file = File::open(path).map_err(|e| err(path, None, e.to_string()))?;
    serde_json::from_reader(file).map_err(|e| err(path, Some(e.line() as u64), e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: String,
    pub command: String,
    /// Canonical config text; parses back to the run configuration.
    pub config: String,
    pub tool_version: String,
    pub seed: u64,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
    pub failure_time: Option<f64>,
    pub exit_code: i32,
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<(), IoError> {
    write_json(path, manifest)
}

pub fn read_manifest(path: &Path) -> Result<Manifest, IoError> {
    let file = File::open(path).map_err(|e| err(path, None, e.to_string()))?;
    serde_json::from_reader(file).map_err(|e| err(path, Some(e.line() as u64), e.to_string()))
}
