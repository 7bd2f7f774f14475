//! Multilingual documents, queries and relevance judgments.
//!
//! Corpus and query files hold one JSON object per line:
//!
//! ```text
//! {"doc_id":"d1","lang":"en","text":"...","translated_text":"..."}
//! {"query_id":"q1","lang":"de","text":"..."}
//! ```
//!
//! `translated_text` is optional. Blank lines and lines starting with `#`
//! are skipped. Qrels use the TREC layout, see [`Qrels`].

mod prepare;
mod qrels;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use prepare::{canonical_text, dedupe_and_rebalance, sample_queries, Rebalanced};
pub use qrels::Qrels;

use crate::error::{Error, Result};
use crate::io;
use crate::lang::{LanguageCode, LanguagePair, LanguageSet};

/// Default truncation budget, in engine tokens.
pub const DEFAULT_TRUNCATION_BUDGET: usize = 512;

/// Default retrieval depth.
pub const DEFAULT_DEPTH: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub lang: LanguageCode,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translated_text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub lang: LanguageCode,
    pub text: String,
}

#[derive(Deserialize)]
struct RawDocument {
    doc_id: String,
    lang: String,
    text: String,
    #[serde(default)]
    translated_text: Option<String>,
}

#[derive(Deserialize)]
struct RawQuery {
    query_id: String,
    lang: String,
    text: String,
}

/// An immutable, validated document collection. Row order is file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    docs: Vec<Document>,
    rows: HashMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids and blank texts.
    pub fn new(docs: Vec<Document>) -> Result<Self> {
        let mut rows = HashMap::with_capacity(docs.len());
        for (row, doc) in docs.iter().enumerate() {
            if doc.text.trim().is_empty() {
                return Err(Error::invalid(format!(
                    "document {:?} has empty text",
                    doc.doc_id
                )));
            }
            if rows.insert(doc.doc_id.clone(), row).is_some() {
                return Err(Error::DuplicateId(doc.doc_id.clone()));
            }
        }
        Ok(Corpus { docs, rows })
    }

    pub fn read(path: &Path, languages: &LanguageSet) -> Result<Self> {
        let mut docs = Vec::new();
        let mut seen = HashMap::new();
        for (line, raw) in io::read_jsonl::<RawDocument>(path)? {
            let lang = languages.resolve(&raw.lang)?;
            if raw.text.trim().is_empty() {
                return Err(io::malformed(path, line, "empty text"));
            }
            if seen.insert(raw.doc_id.clone(), line).is_some() {
                return Err(Error::DuplicateId(raw.doc_id));
            }
            docs.push(Document {
                doc_id: raw.doc_id,
                lang,
                text: raw.text,
                translated_text: raw.translated_text,
            });
        }
        Corpus::new(docs)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        io::write_jsonl(path, &self.docs)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.rows.get(doc_id).map(|&r| &self.docs[r])
    }

    pub fn row_of(&self, doc_id: &str) -> Option<usize> {
        self.rows.get(doc_id).copied()
    }

    pub fn lang_of(&self, doc_id: &str) -> Result<&LanguageCode> {
        self.get(doc_id)
            .map(|d| &d.lang)
            .ok_or_else(|| Error::UnknownDocument(doc_id.to_owned()))
    }

    pub fn language_counts(&self) -> BTreeMap<LanguageCode, usize> {
        let mut counts = BTreeMap::new();
        for doc in &self.docs {
            *counts.entry(doc.lang.clone()).or_insert(0) += 1;
        }
        counts
    }

    /// Applies [`crate::lexical::truncate_text`] to every text field.
    pub fn truncated(&self, budget: usize) -> Corpus {
        let docs = self
            .docs
            .iter()
            .map(|d| Document {
                doc_id: d.doc_id.clone(),
                lang: d.lang.clone(),
                text: crate::lexical::truncate_text(&d.text, budget),
                translated_text: d
                    .translated_text
                    .as_deref()
                    .map(|t| crate::lexical::truncate_text(t, budget)),
            })
            .collect();
        Corpus {
            docs,
            rows: self.rows.clone(),
        }
    }
}

/// An ordered set of queries with unique ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuerySet {
    queries: Vec<Query>,
    rows: HashMap<String, usize>,
}

impl QuerySet {
    pub fn new(queries: Vec<Query>) -> Result<Self> {
        let mut rows = HashMap::with_capacity(queries.len());
        for (row, q) in queries.iter().enumerate() {
            if q.text.trim().is_empty() {
                return Err(Error::invalid(format!("query {:?} has empty text", q.query_id)));
            }
            if rows.insert(q.query_id.clone(), row).is_some() {
                return Err(Error::DuplicateId(q.query_id.clone()));
            }
        }
        Ok(QuerySet { queries, rows })
    }

    pub fn read(path: &Path, languages: &LanguageSet) -> Result<Self> {
        let mut queries = Vec::new();
        for (line, raw) in io::read_jsonl::<RawQuery>(path)? {
            let lang = languages.resolve(&raw.lang)?;
            if raw.text.trim().is_empty() {
                return Err(io::malformed(path, line, "empty text"));
            }
            queries.push(Query {
                query_id: raw.query_id,
                lang,
                text: raw.text,
            });
        }
        QuerySet::new(queries)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        io::write_jsonl(path, &self.queries)
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn get(&self, query_id: &str) -> Option<&Query> {
        self.rows.get(query_id).map(|&r| &self.queries[r])
    }

    /// Queries restricted to one ID set, in this set's order.
    pub fn filter(&self, mut keep: impl FnMut(&Query) -> bool) -> QuerySet {
        let queries: Vec<Query> = self.queries.iter().filter(|q| keep(q)).cloned().collect();
        QuerySet::new(queries).expect("a subset of a valid query set is valid")
    }
}

/// Language pair of every judged query: the query's language and the
/// language of its gold document.
pub fn query_pairs(
    queries: &QuerySet,
    qrels: &Qrels,
    corpus: &Corpus,
) -> Result<BTreeMap<String, LanguagePair>> {
    let mut pairs = BTreeMap::new();
    for q in queries.queries() {
        let Some(gold) = qrels.gold(&q.query_id) else {
            continue;
        };
        let doc_lang = corpus.lang_of(gold)?.clone();
        pairs.insert(q.query_id.clone(), LanguagePair::new(q.lang.clone(), doc_lang));
    }
    Ok(pairs)
}

/// Summary of a prepared collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub dataset_name: String,
    pub retrieval_depth: usize,
    pub per_language_doc_counts: BTreeMap<LanguageCode, usize>,
    pub truncation_budget: usize,
    pub seed: u64,
}

impl CorpusManifest {
    pub fn describe(
        dataset_name: &str,
        corpus: &Corpus,
        retrieval_depth: usize,
        truncation_budget: usize,
        seed: u64,
    ) -> Result<Self> {
        if retrieval_depth == 0 {
            return Err(Error::invalid("retrieval depth must be at least 1"));
        }
        Ok(CorpusManifest {
            dataset_name: dataset_name.to_owned(),
            retrieval_depth,
            per_language_doc_counts: corpus.language_counts(),
            truncation_budget,
            seed,
        })
    }

    pub fn doc_count(&self) -> usize {
        self.per_language_doc_counts.values().sum()
    }
}
