use std::fs;
use std::path::Path;

use crate::error::{Error, ParseError, Result};
use crate::matcore::io::{decode_mxb_prefix, encode_mxb};
use crate::matcore::DenseMatrix;

pub const ENVELOPE_MAGIC: &[u8; 4] = b"TENV";
pub const ENVELOPE_VERSION: u8 = 0x01;

/// Protocol tag byte. Tasks go to the cloud, results come back.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvelopeKind {
    /// `X'`, `Y'`.
    MmcTask,
    /// `Z'`.
    MmcResult,
    /// `𝒳'`, `𝒴'` as an `m×1` column.
    LrTask,
    /// `β'` as an `n×1` column.
    LrResult,
    /// `B`.
    EvdTask,
    /// Eigenvalues as a `1×n` row, then eigenvector columns.
    EvdResult,
}

impl EnvelopeKind {
    pub fn tag(self) -> u8 {
        match self {
            EnvelopeKind::MmcTask => 0x01,
            EnvelopeKind::LrTask => 0x02,
            EnvelopeKind::EvdTask => 0x03,
            EnvelopeKind::MmcResult => 0x81,
            EnvelopeKind::LrResult => 0x82,
            EnvelopeKind::EvdResult => 0x83,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        Ok(match tag {
            0x01 => EnvelopeKind::MmcTask,
            0x02 => EnvelopeKind::LrTask,
            0x03 => EnvelopeKind::EvdTask,
            0x81 => EnvelopeKind::MmcResult,
            0x82 => EnvelopeKind::LrResult,
            0x83 => EnvelopeKind::EvdResult,
            other => return Err(ParseError::MalformedHeader(format!("unknown protocol tag {other:#04x}")).into()),
        })
    }

    /// Number of matrices the payload must hold.
    pub fn arity(self) -> usize {
        match self {
            EnvelopeKind::MmcTask | EnvelopeKind::LrTask | EnvelopeKind::EvdResult => 2,
            _ => 1,
        }
    }
}

/// Tagged list of matrices. Only ciphertexts and results ever go in here.
#[derive(Clone, Debug, PartialEq)]
pub struct Envelope {
    kind: EnvelopeKind,
    matrices: Vec<DenseMatrix>,
}

impl Envelope {
    pub fn new(kind: EnvelopeKind, matrices: Vec<DenseMatrix>) -> Result<Self> {
        if matrices.len() != kind.arity() {
            return Err(Error::Parameter(format!(
                "{kind:?} envelope holds {} matrices, expected {}",
                matrices.len(),
                kind.arity()
            )));
        }
        Ok(Self { kind, matrices })
    }

    pub fn kind(&self) -> EnvelopeKind {
        self.kind
    }

    pub fn matrices(&self) -> &[DenseMatrix] {
        &self.matrices
    }

    pub fn into_matrices(self) -> Vec<DenseMatrix> {
        self.matrices
    }

    /// `TENV | version | tag | count u64 | (len u64 | mxb)*`, little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(ENVELOPE_MAGIC);
        out.push(ENVELOPE_VERSION);
        out.push(self.kind.tag());
        out.extend_from_slice(&(self.matrices.len() as u64).to_le_bytes());
        for m in &self.matrices {
            let body = encode_mxb(m);
            out.extend_from_slice(&(body.len() as u64).to_le_bytes());
            out.extend_from_slice(&body);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 6 || &bytes[..4] != ENVELOPE_MAGIC {
            return Err(ParseError::MalformedHeader("missing TENV magic".into()).into());
        }
        if bytes[4] != ENVELOPE_VERSION {
            return Err(ParseError::VersionMismatch {
                expected: ENVELOPE_VERSION,
                found: bytes[4],
            }
            .into());
        }
        let kind = EnvelopeKind::from_tag(bytes[5])?;
        let mut pos = 6;
        let count = read_u64(bytes, &mut pos)? as usize;
        if count != kind.arity() {
            return Err(ParseError::MalformedHeader(format!(
                "{kind:?} envelope declares {count} matrices, expected {}",
                kind.arity()
            ))
            .into());
        }
        let mut matrices = Vec::with_capacity(count);
        for _ in 0..count {
            let len = read_u64(bytes, &mut pos)? as usize;
            let available = bytes.len() - pos;
            if len > available {
                return Err(ParseError::Truncated {
                    expected: len,
                    found: available,
                }
                .into());
            }
            let (m, used) = decode_mxb_prefix(&bytes[pos..pos + len])?;
            if used != len {
                return Err(ParseError::MalformedHeader(format!("matrix record of {len} bytes holds {used}")).into());
            }
            matrices.push(m);
            pos += len;
        }
        if pos != bytes.len() {
            return Err(ParseError::MalformedHeader(format!("{} trailing bytes", bytes.len() - pos)).into());
        }
        Self::new(kind, matrices)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn read_u64(bytes: &[u8], pos: &mut usize) -> Result<u64> {
    let end = *pos + 8;
    if end > bytes.len() {
        return Err(ParseError::Truncated {
            expected: 8,
            found: bytes.len() - *pos,
        }
        .into());
    }
    let v = u64::from_le_bytes(bytes[*pos..end].try_into().expect("8 bytes"));
    *pos = end;
    Ok(v)
}
