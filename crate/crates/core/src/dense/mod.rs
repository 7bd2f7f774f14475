//! Unit-norm embedding matrices and exact cosine top-k.

mod file;
mod toy;

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

pub use file::{
    load_embeddings, read_embeddings, read_ids, write_embeddings, write_ids, LoadedEmbeddings,
    EMBEDDING_FORMAT_VERSION,
};
pub use toy::{toy_embed, ToyEmbedder};

use crate::error::{Error, Result};
use crate::eval::{top_k, Hit, RunList};

/// Rows must be this close to unit norm to be accepted as-is.
pub const NORM_TOLERANCE: f64 = 1e-4;

/// Rows this close to unit norm are re-normalized on load; others rejected.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-2;

/// Queries scored per block by [`ExactSearcher`].
pub const DEFAULT_BLOCK_SIZE: usize = 256;

/// Dot product accumulated in f64, left to right.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

pub(crate) fn norm(v: &[f32]) -> f64 {
    dot(v, v).sqrt()
}

/// Row-major `count × dim` matrix of f32 whose rows have unit L2 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    data: Vec<f32>,
    dim: usize,
}

impl EmbeddingMatrix {
    /// Wraps row-major data, checking finiteness and the unit-norm invariant.
    pub fn new(data: Vec<f32>, dim: usize) -> Result<Self> {
        let m = Self::unchecked(data, dim)?;
        for (row, v) in m.rows().enumerate() {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { row });
            }
            let n = norm(v);
            if (n - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::BadNorm { row, norm: n });
            }
        }
        Ok(m)
    }

    /// L2-normalizes every row. Zero and non-finite rows are rejected.
    pub fn from_rows_normalized(mut data: Vec<f32>, dim: usize) -> Result<Self> {
        Self::unchecked(Vec::new(), dim)?;
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: data.len() % dim,
            });
        }
        for (row, v) in data.chunks_exact_mut(dim).enumerate() {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { row });
            }
            normalize(v).ok_or(Error::BadNorm { row, norm: 0.0 })?;
        }
        Ok(EmbeddingMatrix { data, dim })
    }

    fn unchecked(data: Vec<f32>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be at least 1"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: data.len() % dim,
            });
        }
        Ok(EmbeddingMatrix { data, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// A new matrix holding the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> EmbeddingMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.dim);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        EmbeddingMatrix { data, dim: self.dim }
    }
}

/// Scales `v` to unit length in place; `None` for a zero vector.
pub(crate) fn normalize(v: &mut [f32]) -> Option<()> {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    for x in v.iter_mut() {
        *x = (*x as f64 / n) as f32;
    }
    Some(())
}

/// Row → doc_id, bijective.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IdMap {
    ids: Vec<String>,
    rows: HashMap<String, usize>,
}

impl IdMap {
    pub fn new(ids: Vec<String>) -> Result<Self> {
        let mut rows = HashMap::with_capacity(ids.len());
        for (row, id) in ids.iter().enumerate() {
            if id.is_empty() || id.chars().any(char::is_whitespace) {
                return Err(Error::invalid(format!("invalid id {id:?} at row {row}")));
            }
            if rows.insert(id.clone(), row).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(IdMap { ids, rows })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, row: usize) -> &str {
        &self.ids[row]
    }

    pub fn row(&self, id: &str) -> Option<usize> {
        self.rows.get(id).copied()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn select(&self, rows: &[usize]) -> IdMap {
        IdMap::new(rows.iter().map(|&r| self.ids[r].clone()).collect())
            .expect("a subset of unique ids is unique")
    }
}

/// Brute-force cosine retrieval over a fixed document matrix.
#[derive(Debug, Clone)]
pub struct ExactSearcher<'a> {
    docs: &'a EmbeddingMatrix,
    ids: &'a IdMap,
    block_size: usize,
}

impl<'a> ExactSearcher<'a> {
    pub fn new(docs: &'a EmbeddingMatrix, ids: &'a IdMap) -> Result<Self> {
        if docs.count() != ids.len() {
            return Err(Error::CountMismatch {
                what: "document rows vs ids".into(),
                left: docs.count(),
                right: ids.len(),
            });
        }
        Ok(ExactSearcher {
            docs,
            ids,
            block_size: DEFAULT_BLOCK_SIZE,
        })
    }

    pub fn with_block_size(mut self, block_size: usize) -> Self {
        self.block_size = block_size.max(1);
        self
    }

    /// Top-`k` rows by dot product, ties by row.
    pub fn search_rows(&self, query: &[f32], k: usize) -> Result<Vec<(usize, f64)>> {
        if query.len() != self.docs.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.docs.dim(),
                actual: query.len(),
            });
        }
        let scored = self.docs.rows().map(|d| dot(query, d)).enumerate().collect();
        Ok(top_k(scored, k))
    }

    pub fn search(&self, query: &[f32], k: usize) -> Result<Vec<Hit>> {
        Ok(self
            .search_rows(query, k)?
            .into_iter()
            .map(|(r, s)| Hit::new(self.ids.id(r), s))
            .collect())
    }

    /// Scores query blocks in parallel; the run is assembled in query order.
    pub fn search_batch(
        &self,
        queries: &EmbeddingMatrix,
        query_ids: &IdMap,
        k: usize,
        tag: &str,
    ) -> Result<RunList> {
        if queries.dim() != self.docs.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.docs.dim(),
                actual: queries.dim(),
            });
        }
        if queries.count() != query_ids.len() {
            return Err(Error::CountMismatch {
                what: "query rows vs ids".into(),
                left: queries.count(),
                right: query_ids.len(),
            });
        }
        let rows: Vec<usize> = (0..queries.count()).collect();
        let blocks: Vec<Vec<Vec<Hit>>> = rows
            .par_chunks(self.block_size)
            .map(|block| {
                block
                    .iter()
                    .map(|&q| self.search(queries.row(q), k))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let mut run = RunList::new(tag);
        for (q, hits) in blocks.into_iter().flatten().enumerate() {
            run.insert(query_ids.id(q), hits)?;
        }
        Ok(run)
    }
}

/// Exact top-`k` for every query row.
pub fn exact_topk(
    queries: &EmbeddingMatrix,
    query_ids: &IdMap,
    docs: &EmbeddingMatrix,
    doc_ids: &IdMap,
    k: usize,
) -> Result<RunList> {
    ExactSearcher::new(docs, doc_ids)?.search_batch(queries, query_ids, k, "dense")
}

/// Loads a matrix/ids file pair; see [`load_embeddings`].
pub fn load(matrix: &Path, ids: &Path) -> Result<(EmbeddingMatrix, IdMap)> {
    load_embeddings(matrix, ids).map(|l| (l.matrix, l.ids))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(dim: usize, axis: usize) -> Vec<f32> {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        v
    }

    fn ids(n: usize) -> IdMap {
        IdMap::new((0..n).map(|i| format!("d{i}")).collect()).unwrap()
    }

    #[test]
    fn rejects_non_unit_rows() {
        assert!(EmbeddingMatrix::new(vec![1.0, 1.0], 2).is_err());
        assert!(EmbeddingMatrix::new(vec![f32::NAN, 1.0], 2).is_err());
        assert!(EmbeddingMatrix::new(vec![1.0, 0.0, 0.0], 2).is_err());
        assert!(EmbeddingMatrix::new(vec![0.6, 0.8], 2).is_ok());
    }

    #[test]
    fn identical_query_ranks_first() {
        let mut data = Vec::new();
        for axis in 0..4 {
            data.extend(unit(4, axis));
        }
        let docs = EmbeddingMatrix::new(data, 4).unwrap();
        let ids = ids(4);
        let s = ExactSearcher::new(&docs, &ids).unwrap();
        let hits = s.search(docs.row(2), 4).unwrap();
        assert_eq!(hits[0].doc_id, "d2");
        assert!((hits[0].score - 1.0).abs() < 1e-6);
    }

    #[test]
    fn orthogonal_query_keeps_row_order() {
        let mut data = Vec::new();
        for axis in 0..3 {
            data.extend(unit(4, axis));
        }
        let docs = EmbeddingMatrix::new(data, 4).unwrap();
        let ids = ids(3);
        let hits = ExactSearcher::new(&docs, &ids)
            .unwrap()
            .search(&unit(4, 3), 10)
            .unwrap();
        let order: Vec<_> = hits.iter().map(|h| h.doc_id.as_str()).collect();
        assert_eq!(order, ["d0", "d1", "d2"]);
        assert!(hits.iter().all(|h| h.score.abs() < 1e-6));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let docs = EmbeddingMatrix::new(unit(4, 0), 4).unwrap();
        let ids = ids(1);
        let s = ExactSearcher::new(&docs, &ids).unwrap();
        assert!(matches!(
            s.search(&[1.0, 0.0], 1),
            Err(Error::DimensionMismatch {
                expected: 4,
                actual: 2
            })
        ));
    }

    #[test]
    fn block_size_does_not_change_results() {
        let docs = toy_embed(&["a b", "c d", "a c", "e"], 16, 1).unwrap();
        let q = toy_embed(&["a", "c", "e", "b d"], 16, 1).unwrap();
        let (dids, qids) = (
            ids(4),
            IdMap::new((0..4).map(|i| format!("q{i}")).collect()).unwrap(),
        );
        let base = ExactSearcher::new(&docs, &dids).unwrap();
        let a = base
            .clone()
            .with_block_size(1)
            .search_batch(&q, &qids, 3, "t")
            .unwrap();
        let b = base.with_block_size(256).search_batch(&q, &qids, 3, "t").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn id_map_rejects_duplicates() {
        assert!(IdMap::new(vec!["a".into(), "a".into()]).is_err());
        assert!(IdMap::new(vec!["has space".into()]).is_err());
    }
}
