//! CSV tables. Every file starts with a header row naming its columns:
//!
//! * profile: `radius,left,right,mean`
//! * sources: `x,y,amplitude`
//! * comparison: `profile,n,with_sources,method,mean_log_mse,std_error,succeeded,failed`
//! * replicates: `replicate,method,log_mse,iterations,converged,lambda1,lambda2,error`
//! * bands: `radius,lo,hi,estimate` (natural-log emissivity)

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::{BootstrapBands, ComparisonTable, PointSource};
use crate::model::DoubledProfile;

pub const PROFILE_HEADER: [&str; 4] = ["radius", "left", "right", "mean"];
pub const SOURCES_HEADER: [&str; 3] = ["x", "y", "amplitude"];
pub const COMPARISON_HEADER: [&str; 8] =
    ["profile", "n", "with_sources", "method", "mean_log_mse", "std_error", "succeeded", "failed"];
pub const REPLICATES_HEADER: [&str; 8] =
    ["replicate", "method", "log_mse", "iterations", "converged", "lambda1", "lambda2", "error"];
pub const BANDS_HEADER: [&str; 4] = ["radius", "lo", "hi", "estimate"];

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        k => Error::Format(format!("csv: {k:?}")),
    }
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

/// Profile table of a doubled profile at shell midpoints, values divided
/// by `scale`.
pub fn profile_csv(profile: &DoubledProfile, scale: f64) -> Result<String> {
    let g = profile.grid();
    let (l, r, m) = (profile.left(), profile.right(), profile.mean());
    let mut w = writer(Vec::new());
    w.write_record(PROFILE_HEADER).map_err(csv_err)?;
    for j in 0..g.n_r() {
        let row = [g.shell_mid(j), l[j] / scale, r[j] / scale, m[j] / scale];
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    finish(w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileTable {
    pub radius: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub mean: Vec<f64>,
}

/// Rows of named numeric columns, checked against `header`.
fn read_numeric<const K: usize>(text: &str, header: [&str; K], what: &str) -> Result<Vec<[f64; K]>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let got = rdr.headers().map_err(csv_err)?.clone();
    if got.iter().collect::<Vec<_>>() != header {
        return Err(Error::Format(format!("{what} csv: expected columns {}, found {}", header.join(","), got.iter().collect::<Vec<_>>().join(","))));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let mut row = [0.0; K];
        for (k, f) in rec.iter().enumerate() {
            row[k] = f.parse().map_err(|_| Error::Format(format!("{what} csv line {line}: bad number '{f}'")))?;
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn parse_profile_csv(text: &str) -> Result<ProfileTable> {
    let rows = read_numeric(text, PROFILE_HEADER, "profile")?;
    Ok(ProfileTable {
        radius: rows.iter().map(|r| r[0]).collect(),
        left: rows.iter().map(|r| r[1]).collect(),
        right: rows.iter().map(|r| r[2]).collect(),
        mean: rows.iter().map(|r| r[3]).collect(),
    })
}

pub fn sources_csv(sources: &[PointSource]) -> Result<String> {
    let mut w = writer(Vec::new());
    w.write_record(SOURCES_HEADER).map_err(csv_err)?;
    for s in sources {
        w.write_record([s.x.to_string(), s.y.to_string(), s.amplitude.to_string()]).map_err(csv_err)?;
    }
    finish(w)
}

pub fn parse_sources_csv(text: &str) -> Result<Vec<PointSource>> {
    read_numeric(text, SOURCES_HEADER, "sources")?
        .into_iter()
        .map(|[x, y, a]| {
            if x < 0.0 || y < 0.0 || x.fract() != 0.0 || y.fract() != 0.0 || !(a >= 0.0) {
                return Err(Error::Format(format!("sources csv: bad source ({x}, {y}, {a})")));
            }
            Ok(PointSource { x: x as usize, y: y as usize, amplitude: a })
        })
        .collect()
}

pub fn comparison_csv(table: &ComparisonTable) -> Result<String> {
    let mut w = writer(Vec::new());
    w.write_record(COMPARISON_HEADER).map_err(csv_err)?;
    for s in &table.summary {
        w.write_record([
            table.profile.as_str().to_string(),
            table.n.to_string(),
            table.with_sources.to_string(),
            s.method.as_str().to_string(),
            s.mean.to_string(),
            s.std_error.to_string(),
            s.succeeded.to_string(),
            s.failed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

pub fn replicates_csv(table: &ComparisonTable) -> Result<String> {
    let mut w = writer(Vec::new());
    w.write_record(REPLICATES_HEADER).map_err(csv_err)?;
    for r in &table.replicates {
        w.write_record([
            r.replicate.to_string(),
            r.method.as_str().to_string(),
            r.log_mse.map(|v| v.to_string()).unwrap_or_default(),
            r.iterations.to_string(),
            r.converged.to_string(),
            r.lambda1.to_string(),
            r.lambda2.to_string(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// `(method, mean, std_error)` rows of a comparison table.
pub fn parse_comparison_csv(text: &str) -> Result<Vec<(String, f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let got = rdr.headers().map_err(csv_err)?.clone();
    if got.iter().collect::<Vec<_>>() != COMPARISON_HEADER {
        return Err(Error::Format("comparison csv: unexpected columns".into()));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let num = |k: usize| rec[k].parse::<f64>().map_err(|_| Error::Format(format!("comparison csv: bad number '{}'", &rec[k])));
        out.push((rec[3].to_string(), num(4)?, num(5)?));
    }
    Ok(out)
}

pub fn bands_csv(bands: &BootstrapBands) -> Result<String> {
    let mut w = writer(Vec::new());
    w.write_record(BANDS_HEADER).map_err(csv_err)?;
    for i in 0..bands.radius.len() {
        let row = [bands.radius[i], bands.lo[i], bands.hi[i], bands.estimate[i]];
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    finish(w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandsTable {
    pub radius: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub estimate: Vec<f64>,
}

pub fn parse_bands_csv(text: &str) -> Result<BandsTable> {
    let rows = read_numeric(text, BANDS_HEADER, "bands")?;
    Ok(BandsTable {
        radius: rows.iter().map(|r| r[0]).collect(),
        lo: rows.iter().map(|r| r[1]).collect(),
        hi: rows.iter().map(|r| r[2]).collect(),
        estimate: rows.iter().map(|r| r[3]).collect(),
    })
}

/// Which table a CSV holds, judged by its header row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    Profile,
    Sources,
    Comparison,
    Replicates,
    Bands,
}

pub fn detect_table(text: &str) -> Option<TableKind> {
    let first = text.lines().next()?.trim();
    let cols: Vec<&str> = first.split(',').map(str::trim).collect();
    match cols.as_slice() {
        c if c == PROFILE_HEADER => Some(TableKind::Profile),
        c if c == SOURCES_HEADER => Some(TableKind::Sources),
        c if c == COMPARISON_HEADER => Some(TableKind::Comparison),
        c if c == REPLICATES_HEADER => Some(TableKind::Replicates),
        c if c == BANDS_HEADER => Some(TableKind::Bands),
        _ => None,
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| super::image_file::with_path(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RadialGrid;

    #[test]
    fn profile_round_trip() {
        let g = RadialGrid::new(4, 8.0).unwrap();
        let p = DoubledProfile::from_halves(g, &[1.0, 0.5, 0.25, 1.0 / 3.0], &[2.0, 1.0, 0.5, 0.1]).unwrap();
        let text = profile_csv(&p, 1.0).unwrap();
        assert!(text.starts_with("radius,left,right,mean\n"));
        let t = parse_profile_csv(&text).unwrap();
        assert_eq!(t.radius, g.shell_mids());
        assert_eq!(t.left, p.left());
        assert_eq!(t.mean, p.mean());
        assert_eq!(detect_table(&text), Some(TableKind::Profile));
    }

    #[test]
    fn sources_round_trip() {
        let s = vec![PointSource { x: 3, y: 7, amplitude: 0.0015 }, PointSource { x: 0, y: 1, amplitude: 0.0 }];
        assert_eq!(parse_sources_csv(&sources_csv(&s).unwrap()).unwrap(), s);
    }

    #[test]
    fn bad_header_rejected() {
        assert!(parse_bands_csv("r,lo,hi,estimate\n1,2,3,4\n").is_err());
        assert!(parse_sources_csv("x,y,amplitude\n1.5,2,0.1\n").is_err());
    }
}
