//! CSV artifacts. Numbers use 17 significant digits so values round-trip exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::{GridSignal, TimeGrid};
use crate::solvers::BoundaryControls;

pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a header and columns of equal length.
pub fn write_columns(path: &Path, header: &[String], columns: &[&[f64]]) -> Result<()> {
    let rows = columns.first().map_or(0, |c| c.len());
    if let Some(c) = columns.iter().find(|c| c.len() != rows) {
        return Err(Error::Dimension { what: "CSV column", expected: rows, got: c.len() });
    }
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(header).map_err(io)?;
    for r in 0..rows {
        w.write_record(columns.iter().map(|c| fmt_num(c[r]))).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Time-series artifact: `t, target_i.., trace_i.., control_left?, control_right?`.
pub fn write_timeseries(
    path: &Path,
    grid: &TimeGrid,
    targets: &[GridSignal],
    traces: &[GridSignal],
    controls: &BoundaryControls,
) -> Result<()> {
    let times = grid.solve_times();
    let mut header = vec!["t".to_string()];
    let mut columns: Vec<&[f64]> = vec![&times];
    for (i, w) in targets.iter().enumerate() {
        header.push(format!("target_{}", i + 1));
        columns.push(w);
    }
    for (i, y) in traces.iter().enumerate() {
        header.push(format!("trace_{}", i + 1));
        columns.push(y);
    }
    if let Some(v) = &controls.left {
        header.push("control_left".into());
        columns.push(v);
    }
    if let Some(v) = &controls.right {
        header.push("control_right".into());
        columns.push(v);
    }
    write_columns(path, &header, &columns)
}

/// Reads the control columns back from a time-series artifact.
pub fn read_controls(path: &Path) -> Result<BoundaryControls> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Io(e.into()))?;
    let header = r.headers().map_err(|e| Error::Io(e.into()))?.clone();
    let left = header.iter().position(|h| h == "control_left");
    let right = header.iter().position(|h| h == "control_right");
    let (mut vl, mut vr) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Io(e.into()))?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Config(format!("{}: malformed number in column {i}", path.display())))
        };
        if let Some(i) = left {
            vl.push(parse(i)?);
        }
        if let Some(i) = right {
            vr.push(parse(i)?);
        }
    }
    if left.is_none() && right.is_none() {
        return Err(Error::Config(format!("{}: no control columns", path.display())));
    }
    Ok(BoundaryControls { left: left.map(|_| GridSignal(vl)), right: right.map(|_| GridSignal(vr)) })
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}
