//! BM25 inverted index.
//!
//! Scoring for a document `d` and query tokens `t1..tn` (repeated tokens
//! count once per occurrence):
//!
//! ```text
//! score(d) = Σ idf(t) · tf·(k1 + 1) / (tf + k1·(1 − b + b·len(d)/avglen))
//! idf(t)   = ln(1 + (N − df + 0.5) / (df + 0.5))
//! ```
//!
//! The `+1` inside the logarithm keeps every idf positive, so any document
//! sharing a token with the query scores above zero and every other document
//! is left out of the results.
//!
//! # Index file (`CLXI`, version 1)
//!
//! All integers little-endian; `str` is a u32 byte length then UTF-8 bytes.
//!
//! ```text
//! magic       4 bytes  "CLXI"
//! version     u32      1
//! field       u8       0 = original, 1 = translated
//! k1          f64
//! b           f64
//! doc_count   u64
//! doc_ids     doc_count × str
//! doc_lengths doc_count × u32
//! term_count  u64
//! postings    term_count × { term: str, n: u64, n × { row: u32, tf: u32 } }
//! ```
//!
//! Terms are stored in byte order, postings by ascending row.

mod tokenize;

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use tokenize::{token_count, tokenize, truncate_text};

use crate::codec::{ByteReader, ByteWriter};
use crate::corpus::{Corpus, QuerySet};
use crate::error::{Error, Result};
use crate::eval::{Hit, RunList};

const MAGIC: &[u8; 4] = b"CLXI";
pub const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self> {
        if !(k1.is_finite() && k1 >= 0.0) {
            return Err(Error::invalid(format!("k1 must be >= 0, got {k1}")));
        }
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::invalid(format!("b must be in [0, 1], got {b}")));
        }
        Ok(Bm25Params { k1, b })
    }
}

/// Which text of a document is indexed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    #[default]
    Original,
    Translated,
}

impl FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "original" => Ok(Field::Original),
            "translated" => Ok(Field::Translated),
            other => Err(Error::invalid(format!("unknown field {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub row: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    postings: BTreeMap<String, Vec<Posting>>,
    doc_lengths: Vec<u32>,
    doc_ids: Vec<String>,
    avg_doc_length: f64,
    field: Field,
    params: Bm25Params,
}

impl InvertedIndex {
    pub fn build(corpus: &Corpus, field: Field, params: Bm25Params) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Empty("corpus".into()));
        }
        let texts: Vec<&str> = corpus
            .docs()
            .iter()
            .map(|d| match field {
                Field::Original => Ok(d.text.as_str()),
                Field::Translated => d
                    .translated_text
                    .as_deref()
                    .ok_or_else(|| Error::MissingTranslation(d.doc_id.clone())),
            })
            .collect::<Result<_>>()?;

        let tokenized: Vec<Vec<String>> = texts.par_iter().map(|t| tokenize(t)).collect();

        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(tokenized.len());
        for (row, tokens) in tokenized.into_iter().enumerate() {
            doc_lengths.push(tokens.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_insert(0) += 1;
            }
            for (term, tf) in tf {
                postings
                    .entry(term)
                    .or_default()
                    .push(Posting { row: row as u32, tf });
            }
        }
        let doc_ids = corpus.docs().iter().map(|d| d.doc_id.clone()).collect();
        Ok(InvertedIndex::from_parts(
            postings,
            doc_lengths,
            doc_ids,
            field,
            params,
        ))
    }

    fn from_parts(
        postings: BTreeMap<String, Vec<Posting>>,
        doc_lengths: Vec<u32>,
        doc_ids: Vec<String>,
        field: Field,
        params: Bm25Params,
    ) -> Self {
        let avg_doc_length = if doc_lengths.is_empty() {
            0.0
        } else {
            doc_lengths.iter().map(|&l| l as f64).sum::<f64>() / doc_lengths.len() as f64
        };
        InvertedIndex {
            postings,
            doc_lengths,
            doc_ids,
            avg_doc_length,
            field,
            params,
        }
    }

    pub fn doc_count(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn idf(&self, df: usize) -> f64 {
        let n = self.doc_count() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_weight(&self, idf: f64, tf: u32, len: u32) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = tf as f64;
        let rel_len = if self.avg_doc_length > 0.0 {
            len as f64 / self.avg_doc_length
        } else {
            0.0
        };
        idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * rel_len))
    }

    /// Top-`k` documents by BM25 score, ties by row. Zero scores are omitted.
    pub fn search(&self, query_text: &str, k: usize) -> Vec<Hit> {
        let mut scores = vec![0.0f64; self.doc_count()];
        let mut touched = Vec::new();
        for term in tokenize(query_text) {
            let postings = self.postings(&term);
            if postings.is_empty() {
                continue;
            }
            let idf = self.idf(postings.len());
            for p in postings {
                let row = p.row as usize;
                if scores[row] == 0.0 {
                    touched.push(row);
                }
                scores[row] += self.term_weight(idf, p.tf, self.doc_lengths[row]);
            }
        }
        let scored = touched.into_iter().map(|r| (r, scores[r])).collect();
        crate::eval::top_k(scored, k)
            .into_iter()
            .map(|(row, score)| Hit::new(self.doc_ids[row].clone(), score))
            .collect()
    }

    /// Searches every query in parallel.
    pub fn search_all(&self, queries: &QuerySet, k: usize, tag: &str) -> Result<RunList> {
        let results: Vec<(String, Vec<Hit>)> = queries
            .queries()
            .par_iter()
            .map(|q| (q.query_id.clone(), self.search(&q.text, k)))
            .collect();
        let mut run = RunList::new(tag);
        for (q, hits) in results {
            run.insert(q, hits)?;
        }
        Ok(run)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::default();
        w.bytes(MAGIC);
        w.u32(INDEX_FORMAT_VERSION);
        w.u8(match self.field {
            Field::Original => 0,
            Field::Translated => 1,
        });
        w.f64(self.params.k1);
        w.f64(self.params.b);
        w.u64(self.doc_count() as u64);
        for id in &self.doc_ids {
            w.str(id);
        }
        for &len in &self.doc_lengths {
            w.u32(len);
        }
        w.u64(self.postings.len() as u64);
        for (term, list) in &self.postings {
            w.str(term);
            w.u64(list.len() as u64);
            for p in list {
                w.u32(p.row);
                w.u32(p.tf);
            }
        }
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        r.expect_magic(MAGIC)?;
        r.expect_version(INDEX_FORMAT_VERSION)?;
        let field = match r.u8()? {
            0 => Field::Original,
            1 => Field::Translated,
            other => return Err(Error::Format(format!("unknown field tag {other}"))),
        };
        let params = Bm25Params::new(r.f64()?, r.f64()?)?;
        let n = r.len_prefix(8)?;
        let doc_ids = (0..n).map(|_| r.str()).collect::<Result<Vec<_>>>()?;
        let doc_lengths = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
        let terms = r.len_prefix(12)?;
        let mut postings = BTreeMap::new();
        for _ in 0..terms {
            let term = r.str()?;
            let count = r.len_prefix(8)?;
            let mut list = Vec::with_capacity(count);
            for _ in 0..count {
                let p = Posting {
                    row: r.u32()?,
                    tf: r.u32()?,
                };
                if p.row as usize >= n || list.last().is_some_and(|l: &Posting| l.row >= p.row) {
                    return Err(Error::Format(format!("bad posting list for {term:?}")));
                }
                list.push(p);
            }
            postings.insert(term, list);
        }
        r.finish()?;
        Ok(InvertedIndex::from_parts(
            postings,
            doc_lengths,
            doc_ids,
            field,
            params,
        ))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        InvertedIndex::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::lang::LanguageCode;

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::new(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| Document {
                    doc_id: format!("d{i}"),
                    lang: LanguageCode::new("en").unwrap(),
                    text: t.to_string(),
                    translated_text: None,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_document_index() {
        let idx = InvertedIndex::build(&corpus(&["a b c"]), Field::Original, Bm25Params::default()).unwrap();
        assert_eq!(idx.doc_count(), 1);
        assert_eq!(idx.avg_doc_length(), 3.0);
    }

    #[test]
    fn postings_match_hand_counts() {
        let idx = InvertedIndex::build(
            &corpus(&["cat dog cat", "dog bird", "cat cat cat fish"]),
            Field::Original,
            Bm25Params::default(),
        )
        .unwrap();
        let p = |term| {
            idx.postings(term)
                .iter()
                .map(|p| (p.row, p.tf))
                .collect::<Vec<_>>()
        };
        assert_eq!(p("cat"), [(0, 2), (2, 3)]);
        assert_eq!(p("dog"), [(0, 1), (1, 1)]);
        assert_eq!(p("bird"), [(1, 1)]);
        assert_eq!(p("fish"), [(2, 1)]);
        assert_eq!(idx.terms().count(), 4);
        assert_eq!(idx.doc_lengths(), [3, 2, 4]);
        assert_eq!(idx.avg_doc_length(), 3.0);
    }

    #[test]
    fn translated_field_requires_translations() {
        let mut docs = corpus(&["a", "b"]).docs().to_vec();
        docs[0].translated_text = Some("x".into());
        let err = InvertedIndex::build(
            &Corpus::new(docs).unwrap(),
            Field::Translated,
            Bm25Params::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingTranslation(id) if id == "d1"));
    }

    #[test]
    fn no_overlap_returns_nothing() {
        let idx =
            InvertedIndex::build(&corpus(&["a b", "c d"]), Field::Original, Bm25Params::default()).unwrap();
        assert!(idx.search("zzz", 10).is_empty());
        assert!(idx.search("", 10).is_empty());
    }

    #[test]
    fn single_term_closed_form() {
        let idx = InvertedIndex::build(
            &corpus(&["apple pie", "banana split sundae", "cherry"]),
            Field::Original,
            Bm25Params::default(),
        )
        .unwrap();
        let hits = idx.search("banana", 10);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].doc_id, "d1");
        // N = 3, df = 1, tf = 1, len = 3, avglen = 2
        let idf = (1.0f64 + (3.0 - 1.0 + 0.5) / (1.0 + 0.5)).ln();
        let expected = idf * 1.0 * 2.2 / (1.0 + 1.2 * (1.0 - 0.75 + 0.75 * 3.0 / 2.0));
        assert!((hits[0].score - expected).abs() < 1e-12);
    }

    #[test]
    fn params_validate() {
        assert!(Bm25Params::new(-1.0, 0.5).is_err());
        assert!(Bm25Params::new(1.0, 1.5).is_err());
        assert!(Bm25Params::new(0.0, 0.0).is_ok());
    }

    #[test]
    fn file_round_trip() {
        let idx = InvertedIndex::build(
            &corpus(&["東京 tower", "tower bridge", "Привет мир"]),
            Field::Original,
            Bm25Params::new(0.9, 0.4).unwrap(),
        )
        .unwrap();
        let bytes = idx.to_bytes();
        assert_eq!(&bytes[..4], b"CLXI");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        let back = InvertedIndex::from_bytes(&bytes).unwrap();
        assert_eq!(back, idx);
        assert_eq!(back.search("tower", 5), idx.search("tower", 5));
    }

    #[test]
    fn rejects_truncated_and_wrong_version() {
        let idx = InvertedIndex::build(&corpus(&["a b"]), Field::Original, Bm25Params::default()).unwrap();
        let bytes = idx.to_bytes();
        assert!(InvertedIndex::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(
            InvertedIndex::from_bytes(&bad),
            Err(Error::Version { found: 9, .. })
        ));
    }
}
