//! File formats: stream CSV, decision graph, snapshots, event log, counters,
//! and metric reports.
//!
//! All numbers are written with Rust's shortest round-trip formatting, so
//! files do not depend on locale and re-read to the same bits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::cellspace::{CellId, CellStore, StreamPoint};
use crate::dptree::ClusterSnapshot;
use crate::engine::Counters;
use crate::error::{Error, Result};
use crate::evolution::EvolutionEvent;
use crate::tauctl::{display_delta, DecisionGraphPoint};

fn parse_err(line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        line: line as usize,
        msg: msg.into(),
    }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => parse_err(line, format!("expected {expected_len} fields, found {len}")),
        other => parse_err(line, format!("{other:?}")),
    }
}

fn num(field: &str, line: u64, what: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("{what}: cannot parse {field:?} as a number")))?;
    if !v.is_finite() {
        return Err(parse_err(line, format!("{what}: {field:?} is not finite")));
    }
    Ok(v)
}

/// Reads a stream CSV with header `t,x1,...,xd[,label]`.
///
/// Rows must have the header's width and non-decreasing `t`. Errors carry the
/// 1-based line number of the offending row.
pub fn read_stream(r: impl Read) -> Result<Vec<StreamPoint>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let labeled = cols.last() == Some(&"label");
    let dim = cols.len() - 1 - labeled as usize;
    if cols.first() != Some(&"t") || dim == 0 {
        return Err(parse_err(1, format!("header must be t,x1,...,xd[,label], got {:?}", cols.join(","))));
    }
    for (i, c) in cols[1..=dim].iter().enumerate() {
        if *c != format!("x{}", i + 1) {
            return Err(parse_err(1, format!("column {} should be x{}, got {c:?}", i + 2, i + 1)));
        }
    }
    let mut out = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let t = num(&rec[0], line, "t")?;
        if t < last {
            return Err(parse_err(line, format!("t = {t} is earlier than the previous row ({last})")));
        }
        last = t;
        let coords = (1..=dim)
            .map(|i| num(&rec[i], line, &format!("x{i}")))
            .collect::<Result<Vec<f64>>>()?;
        let mut p = StreamPoint::new(coords, t);
        if labeled {
            p.label = Some(rec[dim + 1].to_string());
        }
        out.push(p);
    }
    Ok(out)
}

pub fn read_stream_path(path: impl AsRef<Path>) -> Result<Vec<StreamPoint>> {
    read_stream(BufReader::new(File::open(path)?))
}

/// Writes points under a `t,x1,...,xd` header, plus `label` when any point
/// carries one. Points must share a dimension.
pub fn write_stream(w: impl Write, points: &[StreamPoint]) -> Result<()> {
    let dim = points.first().map_or(0, |p| p.coords.len());
    if let Some(p) = points.iter().find(|p| p.coords.len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            got: p.coords.len(),
        });
    }
    let labeled = points.iter().any(|p| p.label.is_some());
    let mut wtr = csv::Writer::from_writer(w);
    let mut head = vec!["t".to_string()];
    head.extend((1..=dim).map(|i| format!("x{i}")));
    if labeled {
        head.push("label".into());
    }
    wtr.write_record(&head).map_err(csv_err)?;
    let mut row = Vec::with_capacity(dim + 2);
    for p in points {
        row.clear();
        row.push(p.t.to_string());
        row.extend(p.coords.iter().map(f64::to_string));
        if labeled {
            row.push(p.label.clone().unwrap_or_default());
        }
        wtr.write_record(&row).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// `cell_id,rho,delta`, one row per active cell; the peak's infinite delta is
/// drawn at 1.1 × the largest finite one.
pub fn write_decision_graph(w: impl Write, points: &[DecisionGraphPoint]) -> Result<()> {
    let shown = display_delta(points);
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["cell_id", "rho", "delta"]).map_err(csv_err)?;
    for p in points {
        let delta = if p.delta.is_finite() { p.delta } else { shown };
        wtr.write_record([p.cell.to_string(), p.rho.to_string(), delta.to_string()])
            .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// One row of a snapshot file.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRow {
    pub cell: CellId,
    /// `None` for inactive cells.
    pub cluster: Option<CellId>,
    pub rho: f64,
    /// `None` for inactive cells; `+∞` for cluster roots with no denser cell.
    pub delta: Option<f64>,
    pub seed: Vec<f64>,
}

/// `cell_id,cluster_id,rho,delta,s1,...,sd`: clustered cells first by
/// cluster, then inactive cells with empty cluster and delta.
pub fn write_snapshot(w: impl Write, snap: &ClusterSnapshot, store: &CellStore) -> Result<()> {
    let dim = store.dim().unwrap_or(0);
    let mut wtr = csv::Writer::from_writer(w);
    let mut head: Vec<String> = ["cell_id", "cluster_id", "rho", "delta"].map(String::from).to_vec();
    head.extend((1..=dim).map(|i| format!("s{i}")));
    wtr.write_record(&head).map_err(csv_err)?;
    let mut row = |id: CellId, cluster: Option<CellId>| -> Result<()> {
        let c = store.get(id)?;
        let mut r = vec![
            id.to_string(),
            cluster.map_or(String::new(), |c| c.to_string()),
            store.cell_density_at(id, snap.time)?.to_string(),
            cluster.map_or(String::new(), |_| c.delta.to_string()),
        ];
        r.extend(c.seed.iter().map(f64::to_string));
        wtr.write_record(&r).map_err(csv_err)
    };
    for cl in &snap.clusters {
        for &m in &cl.members {
            row(m, Some(cl.id))?;
        }
    }
    for &id in &snap.outlier_cells {
        row(id, None)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_snapshot(r: impl Read) -> Result<Vec<SnapshotRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let width = rdr.headers().map_err(csv_err)?.len();
    if width < 5 {
        return Err(parse_err(1, "snapshot header needs cell_id,cluster_id,rho,delta and seed columns"));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = |s: &str| {
            s.parse::<u64>()
                .map(CellId)
                .map_err(|_| parse_err(line, format!("bad cell id {s:?}")))
        };
        let cluster = match &rec[1] {
            "" => None,
            s => Some(id(s)?),
        };
        let delta = match &rec[3] {
            "" => None,
            "inf" => Some(f64::INFINITY),
            s => Some(num(s, line, "delta")?),
        };
        out.push(SnapshotRow {
            cell: id(&rec[0])?,
            cluster,
            rho: num(&rec[2], line, "rho")?,
            delta,
            seed: (4..rec.len())
                .map(|i| num(&rec[i], line, "seed"))
                .collect::<Result<_>>()?,
        });
    }
    Ok(out)
}

/// Entry of a snapshot directory's `index.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotEntry {
    pub file: String,
    pub time: f64,
    pub tau: f64,
    pub clusters: usize,
}

pub const SNAPSHOT_INDEX: &str = "index.csv";

/// Writes numbered snapshot files into a directory, with an index.
pub struct SnapshotDir {
    dir: PathBuf,
    index: csv::Writer<File>,
    next: usize,
}

impl SnapshotDir {
    pub fn create(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        let mut index = csv::Writer::from_path(dir.join(SNAPSHOT_INDEX)).map_err(csv_err)?;
        index
            .write_record(["file", "time", "tau", "clusters"])
            .map_err(csv_err)?;
        Ok(SnapshotDir { dir, index, next: 0 })
    }

    pub fn write(&mut self, snap: &ClusterSnapshot, store: &CellStore) -> Result<()> {
        let name = format!("snapshot_{:06}.csv", self.next);
        self.next += 1;
        write_snapshot(BufWriter::new(File::create(self.dir.join(&name))?), snap, store)?;
        self.index
            .write_record([
                name,
                snap.time.to_string(),
                snap.tau.to_string(),
                snap.clusters.len().to_string(),
            ])
            .map_err(csv_err)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.index.flush()?;
        Ok(())
    }
}

pub fn read_snapshot_index(dir: impl AsRef<Path>) -> Result<Vec<SnapshotEntry>> {
    let mut rdr = csv::Reader::from_path(dir.as_ref().join(SNAPSHOT_INDEX)).map_err(csv_err)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push(SnapshotEntry {
            file: rec[0].to_string(),
            time: num(&rec[1], line, "time")?,
            tau: num(&rec[2], line, "tau")?,
            clusters: rec[3]
                .parse()
                .map_err(|_| parse_err(line, format!("bad cluster count {:?}", &rec[3])))?,
        });
    }
    Ok(out)
}

/// One JSON object per line, fields in the order
/// `time, kind, old_ids, new_ids, adjust_kind, cause`.
pub fn write_events(mut w: impl Write, events: &[EvolutionEvent]) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e).map_err(|err| Error::Io(err.into()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_events(r: impl BufRead) -> Result<Vec<EvolutionEvent>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| parse_err(i as u64 + 1, e.to_string()))?);
    }
    Ok(out)
}

/// `counter,value`.
pub fn write_counters(w: impl Write, counters: &Counters) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["counter", "value"]).map_err(csv_err)?;
    for (name, v) in counters.rows() {
        wtr.write_record([name.to_string(), v.to_string()]).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// `time,metric,value`.
pub fn write_metrics(w: impl Write, rows: &[(f64, String, f64)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["time", "metric", "value"]).map_err(csv_err)?;
    for (t, m, v) in rows {
        wtr.write_record([t.to_string(), m.clone(), v.to_string()])
            .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}
