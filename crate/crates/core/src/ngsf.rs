//! NGSF binary field files.
//!
//! Layout, all little-endian:
//!
//! ```text
//! b"NGSF"  u32 version  u32 N  u32 M[N]  f64 L[N]  f64 alpha
//! version 1: f64 values[M_1·…·M_N]              (row-major, last axis fastest)
//! version 2: f64 time  f64 re[…]  f64 im[…]     (complex snapshot)
//! ```
//!
//! A trajectory file is a concatenation of version-2 records.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Field, TorusGrid};

pub const MAGIC: &[u8; 4] = b"NGSF";
pub const VERSION_REAL: u32 = 1;
pub const VERSION_COMPLEX: u32 = 2;

/// One complex snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexRecord {
    pub grid: Arc<TorusGrid>,
    pub alpha: f64,
    pub time: f64,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

fn write_header<W: Write>(w: &mut W, version: u32, grid: &TorusGrid, alpha: f64) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&version.to_le_bytes())?;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    for &m in grid.points() {
        w.write_all(&(m as u32).to_le_bytes())?;
    }
    for &l in grid.lengths() {
        w.write_all(&l.to_le_bytes())?;
    }
    w.write_all(&alpha.to_le_bytes())?;
    Ok(())
}

fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(f64::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes).map_err(truncated)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == ErrorKind::UnexpectedEof {
        Error::Format("unexpected end of file".into())
    } else {
        Error::Io(e)
    }
}

/// Reads the header after the magic; returns `(version, grid, alpha)`.
fn read_header_body<R: Read>(r: &mut R) -> Result<(u32, Arc<TorusGrid>, f64)> {
    let version = read_u32(r)?;
    if version != VERSION_REAL && version != VERSION_COMPLEX {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = read_u32(r)? as usize;
    if n == 0 || n > 8 {
        return Err(Error::Format(format!("unsupported dimension {n}")));
    }
    let points = (0..n)
        .map(|_| read_u32(r).map(|m| m as usize))
        .collect::<Result<Vec<_>>>()?;
    let lengths = (0..n).map(|_| read_f64(r)).collect::<Result<Vec<_>>>()?;
    let alpha = read_f64(r)?;
    let grid = TorusGrid::new(lengths, points).map_err(|e| Error::Format(e.to_string()))?;
    Ok((version, Arc::new(grid), alpha))
}

fn read_magic<R: Read>(r: &mut R) -> Result<Option<()>> {
    let mut magic = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut magic[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(Error::Format("unexpected end of file".into())),
            Ok(k) => got += k,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    Ok(Some(()))
}

pub fn write_field<W: Write>(w: &mut W, u: &Field, alpha: f64) -> Result<()> {
    write_header(w, VERSION_REAL, u.grid(), alpha)?;
    write_f64s(w, u.values())
}

/// Reads one real field and the stored order `α`.
pub fn read_field<R: Read>(r: &mut R) -> Result<(Field, f64)> {
    read_magic(r)?.ok_or_else(|| Error::Format("empty file".into()))?;
    let (version, grid, alpha) = read_header_body(r)?;
    if version != VERSION_REAL {
        return Err(Error::Format("expected a real field record".into()));
    }
    let values = read_f64s(r, grid.len())?;
    let field = Field::from_values(&grid, values).map_err(|e| Error::Format(e.to_string()))?;
    Ok((field, alpha))
}

pub fn write_complex<W: Write>(w: &mut W, record: &ComplexRecord) -> Result<()> {
    let n = record.grid.len();
    if record.re.len() != n || record.im.len() != n {
        return Err(Error::GridMismatch);
    }
    write_header(w, VERSION_COMPLEX, &record.grid, record.alpha)?;
    w.write_all(&record.time.to_le_bytes())?;
    write_f64s(w, &record.re)?;
    write_f64s(w, &record.im)
}

/// Next complex record, or `None` at a clean end of input.
pub fn read_complex<R: Read>(r: &mut R) -> Result<Option<ComplexRecord>> {
    if read_magic(r)?.is_none() {
        return Ok(None);
    }
    let (version, grid, alpha) = read_header_body(r)?;
    if version != VERSION_COMPLEX {
        return Err(Error::Format("expected a complex snapshot record".into()));
    }
    let time = read_f64(r)?;
    let re = read_f64s(r, grid.len())?;
    let im = read_f64s(r, grid.len())?;
    Ok(Some(ComplexRecord {
        grid,
        alpha,
        time,
        re,
        im,
    }))
}

pub fn save_field(path: &Path, u: &Field, alpha: f64) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_field(&mut w, u, alpha)?;
    w.flush()?;
    Ok(())
}

pub fn load_field(path: &Path) -> Result<(Field, f64)> {
    read_field(&mut BufReader::new(File::open(path)?))
}

pub fn save_trajectory(path: &Path, records: &[ComplexRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for rec in records {
        write_complex(&mut w, rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_trajectory(path: &Path) -> Result<Vec<ComplexRecord>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    while let Some(rec) = read_complex(&mut r)? {
        out.push(rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_round_trip_is_bitwise() {
        let g = Arc::new(TorusGrid::new(vec![3.0, 5.5], vec![8, 10]).unwrap());
        let u = Field::from_fn(&g, |x| x[0].sin() * x[1] + 1e-300);
        let mut buf = Vec::new();
        write_field(&mut buf, &u, 0.75).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 4 + 8 + 16 + 8 + 80 * 8);
        let (v, alpha) = read_field(&mut buf.as_slice()).unwrap();
        assert_eq!(alpha, 0.75);
        assert_eq!(u, v);
    }

    #[test]
    fn complex_sequence_round_trip() {
        let g = Arc::new(TorusGrid::cubic(1, 2.0, 8).unwrap());
        let recs: Vec<ComplexRecord> = (0..3)
            .map(|k| ComplexRecord {
                grid: Arc::clone(&g),
                alpha: 1.5,
                time: k as f64 * 0.01,
                re: vec![k as f64; 8],
                im: vec![-(k as f64); 8],
            })
            .collect();
        let mut buf = Vec::new();
        for r in &recs {
            write_complex(&mut buf, r).unwrap();
        }
        let mut slice = buf.as_slice();
        let mut back = Vec::new();
        while let Some(r) = read_complex(&mut slice).unwrap() {
            back.push(r);
        }
        assert_eq!(back, recs);
    }

    #[test]
    fn rejects_corrupt_input() {
        let g = Arc::new(TorusGrid::cubic(1, 2.0, 8).unwrap());
        let mut buf = Vec::new();
        write_field(&mut buf, &Field::zeros(&g), 1.0).unwrap();
        assert!(matches!(read_field(&mut &buf[..buf.len() - 1]), Err(Error::Format(_))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_field(&mut bad.as_slice()), Err(Error::Format(_))));
        let mut odd = buf.clone();
        odd[12] = 7;
        assert!(matches!(read_field(&mut odd.as_slice()), Err(Error::Format(_))));
    }
}
