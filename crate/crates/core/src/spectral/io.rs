//! Field snapshot files: a one-line JSON header followed by interleaved
//! little-endian (re, im) doubles; plus CSV export for 1-d fields.

use super::{Field, Grid, Space};
use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    n: u8,
    npts: usize,
    l: f64,
    space: Space,
    time: f64,
}

pub fn write_field(path: &Path, f: &Field, time: f64) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    let header = Header {
        n: f.grid.n,
        npts: f.grid.npts,
        l: f.grid.l,
        space: f.space,
        time,
    };
    let mut line = serde_json::to_string(&header).map_err(|e| Error::Serde(e.to_string()))?;
    line.push('\n');
    w.write_all(line.as_bytes())?;
    for v in &f.values {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<(Field, f64)> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: Header =
        serde_json::from_str(line.trim()).map_err(|e| Error::Serde(e.to_string()))?;
    let grid = Grid::new(header.n, header.npts, header.l)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let expect = grid.len() * 16;
    if bytes.len() != expect {
        return Err(Error::Serde(format!(
            "field payload is {} bytes, expected {expect}",
            bytes.len()
        )));
    }
    let values: Vec<Complex64> = bytes
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..16].try_into().unwrap()),
            )
        })
        .collect();
    Ok((
        Field {
            grid,
            space: header.space,
            values,
        },
        header.time,
    ))
}

/// CSV export (node coordinate, re, im); 1-d fields only.
pub fn write_field_csv(path: &Path, f: &Field) -> Result<()> {
    if f.grid.n != 1 {
        return Err(Error::InvalidConfig(
            "CSV field export is 1-d only".to_string(),
        ));
    }
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    let coord = match f.space {
        Space::Position => "x",
        Space::Frequency => "xi",
    };
    writeln!(w, "{coord},re,im")?;
    for (i, v) in f.values.iter().enumerate() {
        let c = match f.space {
            Space::Position => f.grid.x(i),
            Space::Frequency => f.grid.xi(i),
        };
        writeln!(w, "{c},{},{}", v.re, v.im)?;
    }
    w.flush()?;
    Ok(())
}
