//! Self-describing binary field files.
//!
//! ```text
//! MADFIELD 1
//! dtype complex128
//! dims 2
//! points 256 256
//! extents 32 32
//! time 0.64
//!
//! <little-endian row-major payload>
//! ```
//! Complex values are stored as interleaved `(re, im)` pairs.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, RealField};

const MAGIC: &str = "MADFIELD 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    Complex128,
    Float64,
}

impl DType {
    pub fn name(self) -> &'static str {
        match self {
            DType::Complex128 => "complex128",
            DType::Float64 => "float64",
        }
    }

    fn width(self) -> usize {
        match self {
            DType::Complex128 => 16,
            DType::Float64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldHeader {
    pub dtype: DType,
    pub grid: Grid,
    pub time: f64,
}

impl FieldHeader {
    pub fn payload_len(&self) -> usize {
        self.grid.len() * self.dtype.width()
    }
}

#[derive(Debug, Clone)]
pub enum FieldData {
    Complex(ComplexField),
    Real(RealField),
}

impl FieldData {
    pub fn grid(&self) -> &Grid {
        match self {
            FieldData::Complex(f) => f.grid(),
            FieldData::Real(f) => f.grid(),
        }
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn header_text(dtype: DType, grid: &Grid, time: f64) -> String {
    // `{:?}` on f64 prints the shortest round-tripping representation.
    let extents: Vec<String> = grid.extents().iter().map(|e| format!("{e:?}")).collect();
    format!(
        "{MAGIC}\ndtype {}\ndims {}\npoints {}\nextents {}\ntime {time:?}\n\n",
        dtype.name(),
        grid.dims(),
        join(grid.points()),
        extents.join(" "),
    )
}

/// Encodes a field into the file format.
pub fn encode_field(field: &FieldData, time: f64) -> Vec<u8> {
    let (dtype, grid) = match field {
        FieldData::Complex(f) => (DType::Complex128, f.grid()),
        FieldData::Real(f) => (DType::Float64, f.grid()),
    };
    let mut out = header_text(dtype, grid, time).into_bytes();
    out.reserve(grid.len() * dtype.width());
    match field {
        FieldData::Complex(f) => {
            for z in f.values() {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        FieldData::Real(f) => {
            for v in f.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

pub fn write_field(field: &FieldData, time: f64, path: &Path) -> Result<()> {
    let mut f = File::create(path)?;
    f.write_all(&encode_field(field, time))?;
    Ok(())
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn read_line(reader: &mut impl BufRead) -> Result<String> {
    let mut line = String::new();
    if reader.read_line(&mut line)? == 0 {
        return Err(format_err("truncated header"));
    }
    if !line.ends_with('\n') {
        return Err(format_err("truncated header"));
    }
    line.pop();
    Ok(line)
}

fn keyed<'a>(line: &'a str, key: &str) -> Result<&'a str> {
    line.strip_prefix(key)
        .and_then(|r| r.strip_prefix(' '))
        .ok_or_else(|| format_err(format!("expected `{key}` line, found `{line}`")))
}

fn parse_list<T: std::str::FromStr>(s: &str, key: &str) -> Result<Vec<T>> {
    s.split_whitespace()
        .map(|t| t.parse().map_err(|_| format_err(format!("bad value `{t}` in `{key}`"))))
        .collect()
}

fn parse_header(reader: &mut impl BufRead) -> Result<FieldHeader> {
    let magic = read_line(reader)?;
    if magic != MAGIC {
        return Err(format_err(format!("bad magic or version `{magic}`")));
    }
    let dtype = match keyed(&read_line(reader)?, "dtype")? {
        "complex128" => DType::Complex128,
        "float64" => DType::Float64,
        other => return Err(format_err(format!("unknown dtype `{other}`"))),
    };
    let dims: usize = keyed(&read_line(reader)?, "dims")?
        .parse()
        .map_err(|_| format_err("bad `dims`"))?;
    let points: Vec<usize> = parse_list(keyed(&read_line(reader)?, "points")?, "points")?;
    let extents: Vec<f64> = parse_list(keyed(&read_line(reader)?, "extents")?, "extents")?;
    let time: f64 = keyed(&read_line(reader)?, "time")?
        .parse()
        .map_err(|_| format_err("bad `time`"))?;
    if !read_line(reader)?.is_empty() {
        return Err(format_err("missing blank line after header"));
    }
    if points.len() != dims || extents.len() != dims {
        return Err(format_err("`points`/`extents` do not match `dims`"));
    }
    let grid = Grid::new(&extents, &points).map_err(|e| format_err(format!("invalid grid: {e}")))?;
    Ok(FieldHeader { dtype, grid, time })
}

/// Reads only the header.
pub fn inspect_field(path: &Path) -> Result<FieldHeader> {
    parse_header(&mut BufReader::new(File::open(path)?))
}

pub fn decode_field(bytes: &[u8]) -> Result<(FieldData, f64)> {
    let mut cursor = bytes;
    let header = parse_header(&mut cursor)?;
    read_payload(header, &mut cursor)
}

fn read_payload(header: FieldHeader, reader: &mut impl Read) -> Result<(FieldData, f64)> {
    let mut payload = Vec::with_capacity(header.payload_len());
    reader.read_to_end(&mut payload)?;
    if payload.len() != header.payload_len() {
        return Err(format_err(format!(
            "payload is {} bytes, expected {}",
            payload.len(),
            header.payload_len()
        )));
    }
    let f = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
    let data = match header.dtype {
        DType::Complex128 => FieldData::Complex(ComplexField::new(
            header.grid,
            payload.chunks_exact(16).map(|c| Complex64::new(f(&c[..8]), f(&c[8..]))).collect(),
        )?),
        DType::Float64 => FieldData::Real(RealField::new(header.grid, payload.chunks_exact(8).map(f).collect())?),
    };
    Ok((data, header.time))
}

pub fn read_field(path: &Path) -> Result<(FieldData, f64)> {
    let mut reader = BufReader::new(File::open(path)?);
    let header = parse_header(&mut reader)?;
    read_payload(header, &mut reader)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ComplexField {
        let g = Grid::new(&[3.5, 2.0], &[8, 16]).unwrap();
        let mut k = 0.0;
        ComplexField::from_fn(&g, |x| {
            k += 1.0;
            Complex64::new(x[0].sin() * k, 1.0 / (k + x[1]))
        })
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let f = sample();
        let (back, t) = decode_field(&encode_field(&FieldData::Complex(f.clone()), 0.1 + 0.2)).unwrap();
        assert_eq!(t.to_bits(), (0.1f64 + 0.2).to_bits());
        let FieldData::Complex(b) = back else { panic!("dtype") };
        assert!(f.values().iter().zip(b.values()).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));
        assert_eq!(b.grid(), f.grid());
    }

    #[test]
    fn truncation_and_magic_are_rejected() {
        let bytes = encode_field(&FieldData::Real(sample().density()), 0.0);
        assert!(matches!(decode_field(&bytes[..bytes.len() - 1]), Err(Error::Format(_))));
        let mut longer = bytes.clone();
        longer.push(0);
        assert!(matches!(decode_field(&longer), Err(Error::Format(_))));
        let mut bad = bytes.clone();
        bad[9] = b'2';
        assert!(matches!(decode_field(&bad), Err(Error::Format(_))));
        assert!(matches!(decode_field(&bytes[..20]), Err(Error::Format(_))));
    }
}
