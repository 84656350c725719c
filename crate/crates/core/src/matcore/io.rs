//! Matrix files.
//!
//! Binary `.mxb` layout: magic `MXB1`, `rows` and `cols` as little-endian
//! `u64`, then `rows * cols` little-endian `f64` values in row-major order.
//!
//! Text layout: comma-separated values, one matrix row per line, no header.
//! Values are written with 17 significant digits.

use std::fs;
use std::path::Path;

use crate::error::{ParseError, Result};
use crate::matcore::matrix::MAX_ELEMENTS;
use crate::matcore::DenseMatrix;

pub const MXB_MAGIC: &[u8; 4] = b"MXB1";
const HEADER_LEN: usize = 4 + 8 + 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    Text,
    Binary,
}

impl MatrixFormat {
    /// `.mxb` is binary, anything else is text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("mxb") => MatrixFormat::Binary,
            _ => MatrixFormat::Text,
        }
    }
}

pub fn encode_mxb(m: &DenseMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.data().len());
    out.extend_from_slice(MXB_MAGIC);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes one matrix from the front of `bytes`, returning it with the
/// number of bytes consumed.
pub fn decode_mxb_prefix(bytes: &[u8]) -> Result<(DenseMatrix, usize)> {
    if bytes.len() < HEADER_LEN {
        return Err(ParseError::MalformedHeader(format!("{} header bytes", bytes.len())).into());
    }
    if &bytes[..4] != MXB_MAGIC {
        return Err(ParseError::MalformedHeader("bad magic".into()).into());
    }
    let rows = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
    let count = match rows.checked_mul(cols) {
        Some(c) if rows > 0 && cols > 0 && c <= MAX_ELEMENTS => c,
        _ => return Err(ParseError::MalformedHeader(format!("dimensions {rows}x{cols}")).into()),
    };
    let payload = &bytes[HEADER_LEN..];
    let available = payload.len() / 8;
    if available < count {
        return Err(ParseError::Truncated {
            expected: count,
            found: available,
        }
        .into());
    }
    let mut data = Vec::with_capacity(count);
    for (i, chunk) in payload.chunks_exact(8).take(count).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(ParseError::NonFinite(i).into());
        }
        data.push(v);
    }
    Ok((DenseMatrix::new(rows, cols, data)?, HEADER_LEN + 8 * count))
}

/// Decodes a complete `.mxb` buffer; trailing bytes are an error.
pub fn decode_mxb(bytes: &[u8]) -> Result<DenseMatrix> {
    let (m, used) = decode_mxb_prefix(bytes)?;
    if used != bytes.len() {
        return Err(ParseError::MalformedHeader(format!(
            "{} trailing bytes after payload",
            bytes.len() - used
        ))
        .into());
    }
    Ok(m)
}

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn encode_text(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|&v| format_f64(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn decode_text(text: &str) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut position = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                ParseError::BadValue(format!("line {}: {:?}", lineno + 1, field.trim()))
            })?;
            if !v.is_finite() {
                return Err(ParseError::NonFinite(position).into());
            }
            row.push(v);
            position += 1;
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(ParseError::Truncated {
                    expected: first.len(),
                    found: row.len(),
                }
                .into());
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(ParseError::MalformedHeader("empty matrix file".into()).into());
    }
    DenseMatrix::from_rows(&rows)
}

pub fn write_matrix(path: &Path, m: &DenseMatrix, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::Binary => fs::write(path, encode_mxb(m))?,
        MatrixFormat::Text => fs::write(path, encode_text(m))?,
    }
    Ok(())
}

pub fn read_matrix(path: &Path, format: MatrixFormat) -> Result<DenseMatrix> {
    match format {
        MatrixFormat::Binary => decode_mxb(&fs::read(path)?),
        MatrixFormat::Text => decode_text(&fs::read_to_string(path)?),
    }
}

/// Reads a matrix choosing the format from the file extension.
pub fn load(path: &Path) -> Result<DenseMatrix> {
    read_matrix(path, MatrixFormat::from_path(path))
}

pub fn save(path: &Path, m: &DenseMatrix) -> Result<()> {
    write_matrix(path, m, MatrixFormat::from_path(path))
}
