use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use unicode_normalization::UnicodeNormalization;

use super::{Corpus, Document, QuerySet};
use crate::error::{Error, Result};
use crate::lang::{LanguageCode, LanguagePair};
use crate::seeded_rng;

/// NFC form with every whitespace run collapsed to one space and the ends
/// trimmed. Two documents are duplicates iff their canonical texts match.
pub fn canonical_text(text: &str) -> String {
    let nfc: String = text.nfc().collect();
    nfc.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Result of [`dedupe_and_rebalance`].
#[derive(Debug, Clone)]
pub struct Rebalanced {
    pub corpus: Corpus,
    /// Dropped duplicate doc_id → the doc_id that represents it.
    pub merged: BTreeMap<String, String>,
}

/// Drops exact duplicates (first occurrence wins), then spreads the unique
/// pool evenly over `languages`.
///
/// Document order is preserved. Language labels are dealt round-robin and
/// shuffled with `seed`, so per-language counts differ by at most one.
pub fn dedupe_and_rebalance(corpus: &Corpus, languages: &[LanguageCode], seed: u64) -> Result<Rebalanced> {
    if corpus.is_empty() {
        return Err(Error::Empty("corpus".into()));
    }
    if languages.is_empty() {
        return Err(Error::Empty("language list".into()));
    }
    let mut distinct = languages.to_vec();
    distinct.sort();
    distinct.dedup();
    if distinct.len() != languages.len() {
        return Err(Error::invalid("language list contains duplicates"));
    }

    let mut first_by_text: HashMap<String, &str> = HashMap::new();
    let mut merged = BTreeMap::new();
    let mut unique: Vec<Document> = Vec::new();
    for doc in corpus.docs() {
        match first_by_text.get(&canonical_text(&doc.text)) {
            Some(&kept) => {
                merged.insert(doc.doc_id.clone(), kept.to_owned());
            }
            None => {
                first_by_text.insert(canonical_text(&doc.text), &doc.doc_id);
                unique.push(doc.clone());
            }
        }
    }

    if unique.len() < languages.len() {
        return Err(Error::Insufficient {
            what: "unique documents for rebalancing".into(),
            needed: languages.len(),
            available: unique.len(),
        });
    }

    let mut labels: Vec<&LanguageCode> = languages.iter().cycle().take(unique.len()).collect();
    labels.shuffle(&mut seeded_rng(seed, "rebalance"));
    for (doc, lang) in unique.iter_mut().zip(labels) {
        doc.lang = lang.clone();
    }

    Ok(Rebalanced {
        corpus: Corpus::new(unique)?,
        merged,
    })
}

/// Draws `n` distinct queries of the pair's query language, uniformly
/// without replacement. The result is in draw order.
pub fn sample_queries(pool: &QuerySet, pair: &LanguagePair, n: usize, seed: u64) -> Result<QuerySet> {
    let eligible: Vec<_> = pool
        .queries()
        .iter()
        .filter(|q| q.lang == pair.query_lang)
        .collect();
    if n > eligible.len() {
        return Err(Error::Insufficient {
            what: format!("queries for pair {pair}"),
            needed: n,
            available: eligible.len(),
        });
    }
    let mut rng = seeded_rng(seed, &format!("sample-queries/{pair}"));
    let picked = rand::seq::index::sample(&mut rng, eligible.len(), n);
    QuerySet::new(picked.into_iter().map(|i| eligible[i].clone()).collect())
}
