use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::lang::LanguagePair;

const EMPTY_QUERY_MARK: &str = "empty-query";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub doc_id: String,
    pub score: f64,
}

impl Hit {
    pub fn new(doc_id: impl Into<String>, score: f64) -> Self {
        Hit {
            doc_id: doc_id.into(),
            score,
        }
    }
}

/// Ranked results for a set of queries.
///
/// Every list is ordered by non-increasing score and holds each doc_id at
/// most once. Queries iterate in id order, which keeps written runs stable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunList {
    tag: String,
    lists: BTreeMap<String, Vec<Hit>>,
    pairs: BTreeMap<String, LanguagePair>,
}

impl RunList {
    pub fn new(tag: impl Into<String>) -> Self {
        RunList {
            tag: tag.into(),
            ..Default::default()
        }
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn set_tag(&mut self, tag: impl Into<String>) {
        self.tag = tag.into();
    }

    /// Adds or replaces one query's list after checking its invariants.
    pub fn insert(&mut self, query_id: impl Into<String>, hits: Vec<Hit>) -> Result<()> {
        let query_id = query_id.into();
        validate_hits(&query_id, &hits)?;
        self.lists.insert(query_id, hits);
        Ok(())
    }

    pub fn get(&self, query_id: &str) -> Option<&[Hit]> {
        self.lists.get(query_id).map(Vec::as_slice)
    }

    pub fn contains(&self, query_id: &str) -> bool {
        self.lists.contains_key(query_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Hit])> {
        self.lists.iter().map(|(q, h)| (q.as_str(), h.as_slice()))
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.lists.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn set_pair(&mut self, query_id: impl Into<String>, pair: LanguagePair) {
        self.pairs.insert(query_id.into(), pair);
    }

    pub fn set_pairs(&mut self, pairs: &BTreeMap<String, LanguagePair>) {
        for (q, p) in pairs {
            if self.lists.contains_key(q) {
                self.pairs.insert(q.clone(), p.clone());
            }
        }
    }

    pub fn pair(&self, query_id: &str) -> Option<&LanguagePair> {
        self.pairs.get(query_id)
    }

    pub fn pairs(&self) -> &BTreeMap<String, LanguagePair> {
        &self.pairs
    }

    /// Keeps the first `k` hits of every list.
    pub fn truncated(&self, k: usize) -> RunList {
        let mut out = self.clone();
        for hits in out.lists.values_mut() {
            hits.truncate(k);
        }
        out
    }

    /// Reads a TREC run: `query_id Q0 doc_id rank score tag`.
    ///
    /// Lines are ordered by rank within each query; the tag of the first
    /// line becomes the run tag. A `# empty-query <id>` comment declares a
    /// query that retrieved nothing.
    pub fn read_trec(path: &Path) -> Result<Self> {
        let mut rows: BTreeMap<String, Vec<(usize, Hit)>> = BTreeMap::new();
        let mut tag = None;
        for (line, text) in io::read_all_lines(path)? {
            if let Some(comment) = text.strip_prefix('#') {
                if let Some(q) = comment.trim().strip_prefix(EMPTY_QUERY_MARK) {
                    rows.entry(q.trim().to_owned()).or_default();
                }
                continue;
            }
            let f: Vec<&str> = text.split_whitespace().collect();
            if f.len() != 6 {
                return Err(io::malformed(
                    path,
                    line,
                    format!("expected 6 fields, found {}", f.len()),
                ));
            }
            let rank: usize = f[3]
                .parse()
                .map_err(|_| io::malformed(path, line, format!("bad rank {:?}", f[3])))?;
            let score: f64 = f[4]
                .parse()
                .map_err(|_| io::malformed(path, line, format!("bad score {:?}", f[4])))?;
            tag.get_or_insert_with(|| f[5].to_owned());
            rows.entry(f[0].to_owned())
                .or_default()
                .push((rank, Hit::new(f[2], score)));
        }
        let mut run = RunList::new(tag.unwrap_or_default());
        for (q, mut hits) in rows {
            hits.sort_by_key(|(rank, _)| *rank);
            run.insert(q, hits.into_iter().map(|(_, h)| h).collect())?;
        }
        Ok(run)
    }

    /// Writes a TREC run. `header` lines are emitted as `#` comments.
    pub fn write_trec(&self, path: &Path, header: &[String]) -> Result<()> {
        let mut w = io::create(path)?;
        let tag = if self.tag.is_empty() { "run" } else { &self.tag };
        let err = |e| Error::io(path, e);
        for line in header {
            writeln!(w, "# {line}").map_err(err)?;
        }
        for (q, hits) in &self.lists {
            if hits.is_empty() {
                writeln!(w, "# {EMPTY_QUERY_MARK} {q}").map_err(err)?;
            }
            for (i, h) in hits.iter().enumerate() {
                writeln!(w, "{q} Q0 {} {} {} {tag}", h.doc_id, i + 1, h.score).map_err(err)?;
            }
        }
        w.flush().map_err(err)
    }
}

fn validate_hits(query_id: &str, hits: &[Hit]) -> Result<()> {
    let mut seen = HashSet::with_capacity(hits.len());
    for (i, h) in hits.iter().enumerate() {
        if !h.score.is_finite() {
            return Err(Error::invalid(format!(
                "query {query_id:?}: non-finite score for {:?}",
                h.doc_id
            )));
        }
        if !seen.insert(h.doc_id.as_str()) {
            return Err(Error::invalid(format!(
                "query {query_id:?}: document {:?} ranked twice",
                h.doc_id
            )));
        }
        if i > 0 && hits[i - 1].score < h.score {
            return Err(Error::invalid(format!(
                "query {query_id:?}: scores increase at rank {}",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Score descending, then row ascending.
pub(crate) fn rank_order(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// The `k` best `(row, score)` entries under [`rank_order`].
pub(crate) fn top_k(mut scored: Vec<(usize, f64)>, k: usize) -> Vec<(usize, f64)> {
    if k == 0 {
        return Vec::new();
    }
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, rank_order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(rank_order);
    scored
}
