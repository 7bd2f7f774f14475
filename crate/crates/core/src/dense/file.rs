//! Embedding matrix files.
//!
//! ```text
//! offset size
//!  0     4    magic "CLRE"
//!  4     4    version, u32 LE (1)
//!  8     8    row count, u64 LE
//! 16     4    dim, u32 LE
//! 20     1    dtype tag (1 = f32 IEEE-754 LE)
//! 21    11    zero padding
//! 32    ...   row-major payload, rows × dim × 4 bytes
//! ```
//!
//! The companion ids file has one doc_id per line, row-aligned.

use std::io::Write;
use std::path::Path;

use super::{norm, normalize, EmbeddingMatrix, IdMap, NORM_TOLERANCE, RENORMALIZE_TOLERANCE};
use crate::codec::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::io;

const MAGIC: &[u8; 4] = b"CLRE";
pub const EMBEDDING_FORMAT_VERSION: u32 = 1;
const DTYPE_F32: u8 = 1;
const HEADER_LEN: usize = 32;

pub fn write_embeddings(path: &Path, m: &EmbeddingMatrix) -> Result<()> {
    let mut w = ByteWriter::with_capacity(HEADER_LEN + m.as_slice().len() * 4);
    w.bytes(MAGIC);
    w.u32(EMBEDDING_FORMAT_VERSION);
    w.u64(m.count() as u64);
    w.u32(m.dim() as u32);
    w.u8(DTYPE_F32);
    w.pad_to(HEADER_LEN);
    for &x in m.as_slice() {
        w.f32(x);
    }
    std::fs::write(path, w.as_slice()).map_err(|e| Error::io(path, e))
}

/// Raw rows and dim as stored, without any norm check.
pub fn read_embeddings(path: &Path) -> Result<(Vec<f32>, usize)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = ByteReader::new(&bytes);
    r.expect_magic(MAGIC)?;
    r.expect_version(EMBEDDING_FORMAT_VERSION)?;
    let rows = r.u64()? as usize;
    let dim = r.u32()? as usize;
    let dtype = r.u8()?;
    if dtype != DTYPE_F32 {
        return Err(Error::Format(format!("unsupported dtype tag {dtype}")));
    }
    if dim == 0 {
        return Err(Error::Format("dimension 0".into()));
    }
    let pad = r.take(HEADER_LEN - r.position())?;
    if pad.iter().any(|&b| b != 0) {
        return Err(Error::Format("non-zero header padding".into()));
    }
    let payload = r.remaining();
    let expected = rows.saturating_mul(dim).saturating_mul(4);
    if payload != expected {
        return Err(Error::DimensionMismatch {
            expected: rows.saturating_mul(dim),
            actual: payload / 4,
        });
    }
    let data = (0..rows * dim).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
    Ok((data, dim))
}

pub fn write_ids(path: &Path, ids: &IdMap) -> Result<()> {
    let mut w = io::create(path)?;
    for id in ids.ids() {
        writeln!(w, "{id}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_ids(path: &Path) -> Result<IdMap> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    IdMap::new(
        text.lines()
            .map(|l| l.trim_end_matches('\r').to_owned())
            .collect(),
    )
}

#[derive(Debug, Clone)]
pub struct LoadedEmbeddings {
    pub matrix: EmbeddingMatrix,
    pub ids: IdMap,
    /// Rows whose stored norm was off by more than the strict tolerance
    /// and were rescaled.
    pub renormalized: Vec<usize>,
}

/// Reads and validates a matrix with its ids.
///
/// Rows within [`RENORMALIZE_TOLERANCE`] of unit norm are rescaled to unit
/// length; rows further off, and non-finite rows, are rejected.
pub fn load_embeddings(matrix: &Path, ids: &Path) -> Result<LoadedEmbeddings> {
    let (mut data, dim) = read_embeddings(matrix)?;
    let ids = read_ids(ids)?;
    let rows = data.len() / dim;
    if ids.len() != rows {
        return Err(Error::CountMismatch {
            what: "ids vs matrix rows".into(),
            left: ids.len(),
            right: rows,
        });
    }
    let mut renormalized = Vec::new();
    for (row, v) in data.chunks_exact_mut(dim).enumerate() {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row });
        }
        let n = norm(v);
        let off = (n - 1.0).abs();
        if off > RENORMALIZE_TOLERANCE {
            return Err(Error::BadNorm { row, norm: n });
        }
        if off > NORM_TOLERANCE {
            renormalized.push(row);
        }
        normalize(v).expect("norm is near one");
    }
    Ok(LoadedEmbeddings {
        matrix: EmbeddingMatrix::new(data, dim)?,
        ids,
        renormalized,
    })
}
