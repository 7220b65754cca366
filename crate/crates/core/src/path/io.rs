//! Path serialization.
//!
//! Binary container, all integers and floats little-endian:
//!
//! ```text
//! magic      4 bytes  "FQVP"
//! version    u32      FORMAT_VERSION
//! dim        u32
//! intervals  u64      M (the body holds M + 1 rows)
//! horizon    f64      T
//! has_seed   u8       0 or 1
//! seed       u64      ignored when has_seed = 0
//! label_len  u32
//! label      label_len bytes of UTF-8
//! body       (M + 1) * dim f64, row-major
//! ```
//!
//! CSV: header `t,x1,..,xd`, one row per grid point.

use std::io::{Read, Write};

use super::{Grid, SampledPath};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FQVP";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_binary<W: Write>(path: &SampledPath, mut out: W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(path.dim() as u32).to_le_bytes())?;
    out.write_all(&(path.intervals() as u64).to_le_bytes())?;
    out.write_all(&path.horizon().to_le_bytes())?;
    out.write_all(&[u8::from(path.seed().is_some())])?;
    out.write_all(&path.seed().unwrap_or(0).to_le_bytes())?;
    let label = path.label().as_bytes();
    out.write_all(&(label.len() as u32).to_le_bytes())?;
    out.write_all(label)?;
    let mut body = Vec::with_capacity(path.values().len() * 8);
    for v in path.values() {
        body.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&body)?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(input: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input
        .read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    Ok(buf)
}

pub fn read_binary<R: Read>(mut input: R) -> Result<SampledPath> {
    let magic: [u8; 4] = read_array(&mut input)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic, not an FQVP file".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut input)?);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = u32::from_le_bytes(read_array(&mut input)?) as usize;
    let intervals = u64::from_le_bytes(read_array(&mut input)?) as usize;
    let horizon = f64::from_le_bytes(read_array(&mut input)?);
    let has_seed = read_array::<1, _>(&mut input)?[0];
    let seed = u64::from_le_bytes(read_array(&mut input)?);
    let label_len = u32::from_le_bytes(read_array(&mut input)?) as usize;
    let mut label = vec![0u8; label_len];
    input
        .read_exact(&mut label)
        .map_err(|e| Error::Format(format!("truncated label: {e}")))?;
    let label = String::from_utf8(label).map_err(|_| Error::Format("label is not UTF-8".into()))?;
    let grid = Grid::new(intervals, horizon)?;
    let count = grid
        .len()
        .checked_mul(dim)
        .ok_or_else(|| Error::Format("body size overflows".into()))?;
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() != count * 8 {
        return Err(Error::Format(format!(
            "expected {} body bytes, found {}",
            count * 8,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    SampledPath::new(grid, dim, values, label, (has_seed == 1).then_some(seed))
}

pub fn write_csv<W: Write>(path: &SampledPath, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=path.dim()).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(path.dim() + 1);
    for k in 0..path.grid_size() {
        record.clear();
        record.push(path.time(k).to_string());
        record.extend(path.row(k).iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a CSV path; the time column must be a uniform grid starting at 0.
pub fn read_csv<R: Read>(input: R, label: &str) -> Result<SampledPath> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "t" {
        return Err(Error::Format("CSV header must be t,x1..xd".into()));
    }
    let dim = headers.len() - 1;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for record in r.records() {
        let record = record?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("not a number: {s:?}")))
        };
        times.push(parse(&record[0])?);
        for field in record.iter().skip(1) {
            values.push(parse(field)?);
        }
    }
    if times.len() < 2 {
        return Err(Error::Format("CSV path needs at least two rows".into()));
    }
    let intervals = times.len() - 1;
    let horizon = times[intervals];
    let grid = Grid::new(intervals, horizon)?;
    for (k, &t) in times.iter().enumerate() {
        if (t - grid.time(k)).abs() > 1e-9 * horizon {
            return Err(Error::Format(format!("row {k}: time {t} is off the uniform grid")));
        }
    }
    SampledPath::new(grid, dim, values, label, None)
}
