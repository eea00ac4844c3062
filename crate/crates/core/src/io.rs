//! CSV interchange formats.
//!
//! * points: `id,x,y[,x_cov,y_resp]` (ids `0..n` in any order)
//! * couplets: `i,l,dist`; unpaired sidecar: `id`
//!
//! Floats are written in Rust's shortest round-trip form, so a file read back
//! reproduces the values bit for bit.

use std::io::{Read, Write};
use std::path::Path;

use crate::coupling::{Couplet, CoupletSet};
use crate::error::{Error, Result};
use crate::spatial::{Point, PointSet};

fn open_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn parse_f64(field: &str, what: &str, line: u64) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}: invalid {what} '{field}'")))
}

fn parse_opt(field: Option<&str>, what: &str, line: u64) -> Result<Option<f64>> {
    match field.map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => parse_f64(v, what, line).map(Some),
    }
}

fn parse_usize(field: &str, what: &str, line: u64) -> Result<usize> {
    field
        .trim()
        .parse::<usize>()
        .map_err(|_| Error::Parse(format!("line {line}: invalid {what} '{field}'")))
}

fn expect_header(rdr: &mut csv::Reader<impl Read>, accepted: &[&[&str]]) -> Result<usize> {
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    accepted
        .iter()
        .position(|h| h.iter().copied().eq(header.iter().map(String::as_str)))
        .ok_or_else(|| {
            let wanted: Vec<String> = accepted.iter().map(|h| h.join(",")).collect();
            Error::Parse(format!(
                "unexpected header '{}' (expected {})",
                header.join(","),
                wanted.join(" or ")
            ))
        })
}

pub fn read_points<R: Read>(reader: R) -> Result<PointSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    expect_header(
        &mut rdr,
        &[&["id", "x", "y"], &["id", "x", "y", "x_cov", "y_resp"]],
    )?;
    let mut points = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let id = parse_usize(&rec[0], "id", line)?;
        let mut p = Point::new(
            id,
            parse_f64(&rec[1], "x", line)?,
            parse_f64(&rec[2], "y", line)?,
        );
        p.x_cov = parse_opt(rec.get(3), "x_cov", line)?;
        p.y_resp = parse_opt(rec.get(4), "y_resp", line)?;
        points.push(p);
    }
    PointSet::new(points)
}

pub fn write_points<W: Write>(writer: W, points: &PointSet) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["id", "x", "y", "x_cov", "y_resp"])?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for p in points.points() {
        wtr.write_record([
            p.id.to_string(),
            p.x.to_string(),
            p.y.to_string(),
            opt(p.x_cov),
            opt(p.y_resp),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_couplets<R: Read>(reader: R, n: usize) -> Result<CoupletSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    expect_header(&mut rdr, &[&["i", "l", "dist"]])?;
    let mut couplets = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        couplets.push(Couplet {
            i: parse_usize(&rec[0], "i", line)?,
            l: parse_usize(&rec[1], "l", line)?,
            dist: parse_f64(&rec[2], "dist", line)?,
        });
    }
    CoupletSet::from_couplets(n, couplets)
}

pub fn write_couplets<W: Write>(writer: W, cs: &CoupletSet) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["i", "l", "dist"])?;
    for c in cs.couplets() {
        wtr.write_record([c.i.to_string(), c.l.to_string(), c.dist.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_unpaired<W: Write>(writer: W, cs: &CoupletSet) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["id"])?;
    for id in cs.unpaired() {
        wtr.write_record([id.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_points_file(path: &Path) -> Result<PointSet> {
    let f = std::fs::File::open(path).map_err(|e| open_err(path, e))?;
    read_points(std::io::BufReader::new(f)).map_err(|e| match e {
        Error::Io(msg) => Error::Io(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn read_couplets_file(path: &Path, n: usize) -> Result<CoupletSet> {
    let f = std::fs::File::open(path).map_err(|e| open_err(path, e))?;
    read_couplets(std::io::BufReader::new(f), n).map_err(|e| match e {
        Error::Io(msg) => Error::Io(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Creates (truncating) `path` and hands a buffered writer to `body`.
pub fn write_file<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<()>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| open_err(dir, e))?;
    }
    let f = std::fs::File::create(path).map_err(|e| open_err(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    body(&mut w)?;
    w.flush().map_err(|e| open_err(path, e))?;
    Ok(())
}
