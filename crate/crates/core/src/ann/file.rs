//! HNSW index files. All integers little-endian.
//!
//! ```text
//! magic "CLRH", version u32 (1)
//! m u32, ef_construction u32, ef_search u32 (0 = adaptive),
//! level_multiplier f64, seed u64
//! model name (u32 length + UTF-8)
//! dim u32, count u64, entry point u32, max level u32
//! count × doc_id (u32 length + UTF-8)
//! count × dim × f32 vectors
//! per node: level u8, then per layer 0..=level: degree u32, degree × u32
//! CRC-32 (IEEE) of every preceding byte, u32
//! ```

use std::path::Path;

use super::{HnswIndex, HnswParams, MAX_LEVEL};
use crate::codec::{ByteReader, ByteWriter};
use crate::dense::{EmbeddingMatrix, IdMap};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CLRH";
pub const HNSW_FORMAT_VERSION: u32 = 1;

impl HnswIndex {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::with_capacity(64 + self.vectors.as_slice().len() * 4);
        w.bytes(MAGIC);
        w.u32(HNSW_FORMAT_VERSION);
        w.u32(self.params.m as u32);
        w.u32(self.params.ef_construction as u32);
        w.u32(self.params.ef_search.unwrap_or(0) as u32);
        w.f64(self.params.level_multiplier);
        w.u64(self.seed);
        w.str(&self.model);
        w.u32(self.dim() as u32);
        w.u64(self.len() as u64);
        w.u32(self.entry);
        w.u32(self.max_level as u32);
        for id in self.ids.ids() {
            w.str(id);
        }
        for &x in self.vectors.as_slice() {
            w.f32(x);
        }
        for layers in &self.links {
            w.u8((layers.len() - 1) as u8);
            for list in layers {
                w.u32(list.len() as u32);
                for &nb in list {
                    w.u32(nb);
                }
            }
        }
        let crc = crc32fast::hash(w.as_slice());
        w.u32(crc);
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.expect_magic(MAGIC)?;
        r.expect_version(HNSW_FORMAT_VERSION)?;
        if bytes.len() < 12 {
            return Err(Error::Format("file too short for checksum".into()));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(trailer.try_into().expect("four bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let mut r = ByteReader::new(body);
        r.take(8)?;
        let m = r.u32()? as usize;
        let ef_construction = r.u32()? as usize;
        let ef_search = match r.u32()? {
            0 => None,
            ef => Some(ef as usize),
        };
        let level_multiplier = r.f64()?;
        let params = HnswParams {
            m,
            ef_construction,
            ef_search,
            level_multiplier,
        };
        params.validate().map_err(|e| Error::Format(e.to_string()))?;
        let seed = r.u64()?;
        let model = r.str()?;
        let dim = r.u32()? as usize;
        let count = r.len_prefix(dim.saturating_mul(4))?;
        let entry = r.u32()?;
        let max_level = r.u32()? as usize;
        if dim == 0 || count == 0 || entry as usize >= count {
            return Err(Error::Format("inconsistent index header".into()));
        }
        let ids = (0..count).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
        let data = (0..count * dim).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        let mut links = Vec::with_capacity(count);
        for _ in 0..count {
            let level = r.u8()? as usize;
            if level > MAX_LEVEL {
                return Err(Error::Format(format!("node level {level} out of range")));
            }
            let mut layers = Vec::with_capacity(level + 1);
            for _ in 0..=level {
                let degree = r.u32()? as usize;
                if degree * 4 > r.remaining() {
                    return Err(Error::Format("adjacency list exceeds file".into()));
                }
                layers.push((0..degree).map(|_| r.u32()).collect::<Result<Vec<_>>>()?);
            }
            links.push(layers);
        }
        r.finish()?;
        let index = HnswIndex {
            params,
            seed,
            model,
            vectors: EmbeddingMatrix::new(data, dim).map_err(|e| Error::Format(e.to_string()))?,
            ids: IdMap::new(ids)?,
            links,
            entry,
            max_level,
        };
        index
            .check_invariants()
            .map_err(|e| Error::Format(format!("invalid graph: {e}")))?;
        Ok(index)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        HnswIndex::from_bytes(&bytes)
    }
}
