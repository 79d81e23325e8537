//! CSV formats for moment series, grid functions, measures and trajectories.
//!
//! Every writer has a matching reader; floats are written in shortest
//! round-trip form, so a write/read cycle is lossless for `f64`.

use std::io::{Read, Write};
use std::path::Path;

use crate::depoly::{GridFunction, MomentSeries, Trajectory};
use crate::error::{Error, Result};
use crate::measures::Measure;
use crate::scalar::{lit, Real};

/// `kind, lo, hi, value` of one measure row.
type MeasureRow = (String, f64, f64, f64);

fn parse_err(context: &str, message: impl ToString) -> Error {
    Error::Parse { context: context.into(), message: message.to_string() }
}

fn flush<W: Write>(w: &mut csv::Writer<W>, context: &str) -> Result<()> {
    w.flush().map_err(|e| Error::Io { path: format!("<{context}>").into(), source: e })
}

/// Opens `path` for reading with the path attached to I/O errors.
pub fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    let f = std::fs::File::open(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    Ok(std::io::BufReader::new(f))
}

/// `t,M{k}` rows.
pub fn write_moment_series<T: Real, W: Write>(series: &MomentSeries<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t".to_string(), format!("M{}", series.k)]).map_err(|e| parse_err("moment CSV", e))?;
    for (t, v) in series.times.iter().zip(&series.values) {
        w.serialize((t.as_f64(), v.as_f64())).map_err(|e| parse_err("moment CSV", e))?;
    }
    flush(&mut w, "moment CSV")
}

/// Reads `t,M{k}`; the order `k` comes from the header, the noise level is
/// supplied by the caller.
pub fn read_moment_series<T: Real, R: Read>(reader: R, delta: T) -> Result<MomentSeries<T>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err("moment CSV", e))?.clone();
    let k = match (headers.len(), headers.get(0), headers.get(1)) {
        (2, Some("t"), Some(m)) => m
            .strip_prefix('M')
            .and_then(|k| k.parse::<u32>().ok())
            .ok_or_else(|| parse_err("moment CSV", format!("bad moment column `{m}`")))?,
        _ => return Err(parse_err("moment CSV", "expected header `t,M<k>`")),
    };
    let (mut times, mut values) = (Vec::new(), Vec::new());
    for rec in rdr.deserialize() {
        let (t, v): (f64, f64) = rec.map_err(|e| parse_err("moment CSV", e))?;
        times.push(lit(t));
        values.push(lit(v));
    }
    MomentSeries::new(k, times, values, delta)
}

/// `x,u` rows at the nodes `x_j = j·dx`.
pub fn write_grid_function<T: Real, W: Write>(u: &GridFunction<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "u"]).map_err(|e| parse_err("grid CSV", e))?;
    for (j, v) in u.values.iter().enumerate() {
        w.serialize((u.x(j).as_f64(), v.as_f64())).map_err(|e| parse_err("grid CSV", e))?;
    }
    flush(&mut w, "grid CSV")
}

pub fn read_grid_function<T: Real, R: Read>(reader: R) -> Result<GridFunction<T>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut rows: Vec<(f64, f64)> = Vec::new();
    for rec in rdr.deserialize() {
        rows.push(rec.map_err(|e| parse_err("grid CSV", e))?);
    }
    if rows.len() < 2 || rows[0].0 != 0.0 {
        return Err(parse_err("grid CSV", "need at least two nodes starting at x = 0"));
    }
    let dx = rows[1].0;
    for (j, r) in rows.iter().enumerate() {
        if (r.0 - dx * j as f64).abs() > 1e-9 * dx.max(1.0) * (j as f64 + 1.0) {
            return Err(parse_err("grid CSV", format!("node {j} is off the uniform grid")));
        }
    }
    GridFunction::new(lit(dx), rows.iter().map(|r| lit(r.1)).collect())
}

/// `kind,lo,hi,value` rows: `atom,x,x,w` and `cell,a,b,v`.
pub fn write_measure<T: Real, W: Write>(mu: &Measure<T>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["kind", "lo", "hi", "value"]).map_err(|e| parse_err("measure CSV", e))?;
    write_measure_rows(&mut w, None, mu)?;
    flush(&mut w, "measure CSV")
}

fn write_measure_rows<T: Real, W: Write>(w: &mut csv::Writer<W>, t: Option<f64>, mu: &Measure<T>) -> Result<()> {
    let err = |e| parse_err("measure CSV", e);
    for &(x, m) in mu.atoms() {
        match t {
            Some(t) => w.serialize((t, "atom", x.as_f64(), x.as_f64(), m.as_f64())),
            None => w.serialize(("atom", x.as_f64(), x.as_f64(), m.as_f64())),
        }
        .map_err(err)?;
    }
    for (a, b, v) in mu.cells() {
        match t {
            Some(t) => w.serialize((t, "cell", a.as_f64(), b.as_f64(), v.as_f64())),
            None => w.serialize(("cell", a.as_f64(), b.as_f64(), v.as_f64())),
        }
        .map_err(err)?;
    }
    Ok(())
}

fn measure_from_rows<T: Real>(rows: &[(String, f64, f64, f64)]) -> Result<Measure<T>> {
    let mut atoms = Vec::new();
    let mut grid: Vec<T> = Vec::new();
    let mut dens = Vec::new();
    for (kind, lo, hi, v) in rows {
        match kind.as_str() {
            "atom" => atoms.push((lit(*lo), lit(*v))),
            "cell" => {
                match grid.last() {
                    None => grid.push(lit(*lo)),
                    Some(&g) if g.as_f64() == *lo => {}
                    Some(_) => return Err(parse_err("measure CSV", "cells must be contiguous")),
                }
                grid.push(lit(*hi));
                dens.push(lit(*v));
            }
            other => return Err(parse_err("measure CSV", format!("unknown row kind `{other}`"))),
        }
    }
    Measure::new(atoms, grid, dens)
}

pub fn read_measure<T: Real, R: Read>(reader: R) -> Result<Measure<T>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut rows: Vec<(String, f64, f64, f64)> = Vec::new();
    for rec in rdr.deserialize() {
        rows.push(rec.map_err(|e| parse_err("measure CSV", e))?);
    }
    measure_from_rows(&rows)
}

/// `t,kind,lo,hi,value` rows, one block per recorded time.
pub fn write_measure_trajectory<T: Real, W: Write>(traj: &Trajectory<T, Measure<T>>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "kind", "lo", "hi", "value"]).map_err(|e| parse_err("trajectory CSV", e))?;
    for (t, mu) in traj.times.iter().zip(&traj.states) {
        write_measure_rows(&mut w, Some(t.as_f64()), mu)?;
    }
    flush(&mut w, "trajectory CSV")
}

pub fn read_measure_trajectory<T: Real, R: Read>(reader: R) -> Result<Trajectory<T, Measure<T>>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut blocks: Vec<(f64, Vec<MeasureRow>)> = Vec::new();
    for rec in rdr.deserialize() {
        let (t, kind, lo, hi, v): (f64, String, f64, f64, f64) = rec.map_err(|e| parse_err("trajectory CSV", e))?;
        match blocks.last_mut() {
            Some(b) if b.0 == t => b.1.push((kind, lo, hi, v)),
            _ => blocks.push((t, vec![(kind, lo, hi, v)])),
        }
    }
    let mut traj = Trajectory { times: Vec::new(), states: Vec::new() };
    for (t, rows) in blocks {
        traj.times.push(lit(t));
        traj.states.push(measure_from_rows(&rows)?);
    }
    Ok(traj)
}

/// `t,x,u` rows for grid-function trajectories.
pub fn write_grid_trajectory<T: Real, W: Write>(traj: &Trajectory<T, GridFunction<T>>, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "x", "u"]).map_err(|e| parse_err("trajectory CSV", e))?;
    for (t, u) in traj.times.iter().zip(&traj.states) {
        for (j, v) in u.values.iter().enumerate() {
            w.serialize((t.as_f64(), u.x(j).as_f64(), v.as_f64())).map_err(|e| parse_err("trajectory CSV", e))?;
        }
    }
    flush(&mut w, "trajectory CSV")
}

pub fn read_grid_trajectory<T: Real, R: Read>(reader: R) -> Result<Trajectory<T, GridFunction<T>>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut blocks: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
    for rec in rdr.deserialize() {
        let (t, x, u): (f64, f64, f64) = rec.map_err(|e| parse_err("trajectory CSV", e))?;
        match blocks.last_mut() {
            Some(b) if b.0 == t => b.1.push((x, u)),
            _ => blocks.push((t, vec![(x, u)])),
        }
    }
    let mut traj = Trajectory { times: Vec::new(), states: Vec::new() };
    for (t, rows) in blocks {
        if rows.len() < 2 {
            return Err(parse_err("trajectory CSV", "each time needs at least two nodes"));
        }
        traj.times.push(lit(t));
        traj.states.push(GridFunction::new(lit(rows[1].0 - rows[0].0), rows.iter().map(|r| lit(r.1)).collect())?);
    }
    Ok(traj)
}

/// Plain numeric table with a header (plot data).
pub fn write_table<W: Write>(header: &[&str], rows: &[Vec<f64>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header).map_err(|e| parse_err("table CSV", e))?;
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::invalid("table row length differs from header"));
        }
        w.serialize(r).map_err(|e| parse_err("table CSV", e))?;
    }
    flush(&mut w, "table CSV")
}

pub fn read_table<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers().map_err(|e| parse_err("table CSV", e))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        rows.push(rec.map_err(|e| parse_err("table CSV", e))?);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moment_series_round_trip() {
        let s = MomentSeries::new(1, vec![0.0, 0.1, 0.30000000000000004], vec![1.0, 0.9, 1.0 / 3.0], 0.0).unwrap();
        let mut buf = Vec::new();
        write_moment_series(&s, &mut buf).unwrap();
        assert!(buf.starts_with(b"t,M1\n"));
        let back: MomentSeries<f64> = read_moment_series(buf.as_slice(), 0.0).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn measure_round_trip() {
        let m = Measure::new(vec![(0.25, -0.5), (1.0, 2.0)], vec![0.0, 0.1, 0.7], vec![1.5, 0.2]).unwrap();
        let mut buf = Vec::new();
        write_measure(&m, &mut buf).unwrap();
        assert_eq!(read_measure::<f64, _>(buf.as_slice()).unwrap(), m);
        let traj = Trajectory { times: vec![0.0, 1.0], states: vec![m.clone(), m.scaled(0.5)] };
        let mut buf = Vec::new();
        write_measure_trajectory(&traj, &mut buf).unwrap();
        assert_eq!(read_measure_trajectory::<f64, _>(buf.as_slice()).unwrap(), traj);
    }

    #[test]
    fn grid_function_round_trip() {
        let u = GridFunction::sample(1.0 / 64.0, 64, |x: f64| x.sin());
        let mut buf = Vec::new();
        write_grid_function(&u, &mut buf).unwrap();
        assert_eq!(read_grid_function::<f64, _>(buf.as_slice()).unwrap(), u);
        let traj = Trajectory { times: vec![0.0, 0.5], states: vec![u.clone(), u.scaled(2.0)] };
        let mut buf = Vec::new();
        write_grid_trajectory(&traj, &mut buf).unwrap();
        assert_eq!(read_grid_trajectory::<f64, _>(buf.as_slice()).unwrap(), traj);
    }

    #[test]
    fn rejects_bad_header() {
        assert!(read_moment_series::<f64, _>("time,M0\n0,1\n1,0\n".as_bytes(), 0.0).is_err());
    }
}
