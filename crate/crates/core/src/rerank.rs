//! Candidate sets for second-stage re-ranking, training-pair export, and the
//! file exchange with an external scorer.
//!
//! Scoring requests are JSONL records `{query_id, doc_id, query_text,
//! doc_text}`; responses are `{query_id, doc_id, score}`. Training pairs add
//! `label` (0/1) and `difficulty` (`easy`/`hard`).

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Qrels, Query, QuerySet, DEFAULT_DEPTH};
use crate::error::{Error, Result};
use crate::eval::{Hit, RunList};
use crate::io;

/// Re-ranking depth used when none is given.
pub const DEFAULT_RERANK_DEPTH: usize = DEFAULT_DEPTH;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub query_id: String,
    pub doc_ids: Vec<String>,
    /// 1-based first-stage rank of each candidate. An injected gold document
    /// takes the rank of the position it occupies.
    pub first_stage_ranks: BTreeMap<String, usize>,
    /// Whether the gold document had to be inserted.
    #[serde(default)]
    pub injected: bool,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.first_stage_ranks.contains_key(doc_id)
    }
}

/// Top-`depth` candidates of one query with the gold document guaranteed.
///
/// If gold is missing it replaces the item at position `depth`; a shorter
/// list gets gold appended instead.
pub fn candidates_for(query_id: &str, hits: &[Hit], qrels: &Qrels, depth: usize) -> Result<CandidateSet> {
    if depth == 0 {
        return Err(Error::invalid("candidate depth must be at least 1"));
    }
    let gold = qrels
        .gold(query_id)
        .ok_or_else(|| Error::NoGold(query_id.to_owned()))?;
    let mut doc_ids: Vec<String> = hits.iter().take(depth).map(|h| h.doc_id.clone()).collect();
    let injected = !doc_ids.iter().any(|d| d == gold);
    if injected {
        if doc_ids.len() == depth {
            doc_ids[depth - 1] = gold.to_owned();
        } else {
            doc_ids.push(gold.to_owned());
        }
    }
    let first_stage_ranks = doc_ids
        .iter()
        .enumerate()
        .map(|(i, d)| (d.clone(), i + 1))
        .collect();
    Ok(CandidateSet {
        query_id: query_id.to_owned(),
        doc_ids,
        first_stage_ranks,
        injected,
    })
}

/// Candidate sets for every judged query, in query-id order.
pub fn make_candidates(run: &RunList, qrels: &Qrels, depth: usize) -> Result<Vec<CandidateSet>> {
    qrels
        .query_ids()
        .map(|q| {
            let hits = run.get(q).ok_or_else(|| Error::MissingRunQuery(q.to_owned()))?;
            candidates_for(q, hits, qrels, depth)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Hard,
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Difficulty::Easy => "easy",
            Difficulty::Hard => "hard",
        })
    }
}

impl FromStr for Difficulty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(Difficulty::Easy),
            "hard" => Ok(Difficulty::Hard),
            _ => Err(Error::invalid(format!("unknown negative mode {s:?} (easy|hard)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub query_id: String,
    pub query_text: String,
    pub doc_id: String,
    pub doc_text: String,
    pub label: u8,
    pub difficulty: Difficulty,
}

fn pair_for(
    query: &Query,
    corpus: &Corpus,
    doc_id: &str,
    label: u8,
    difficulty: Difficulty,
) -> Result<TrainingPair> {
    let doc = corpus
        .get(doc_id)
        .ok_or_else(|| Error::UnknownDocument(doc_id.to_owned()))?;
    Ok(TrainingPair {
        query_id: query.query_id.clone(),
        query_text: query.text.clone(),
        doc_id: doc_id.to_owned(),
        doc_text: doc.text.clone(),
        label,
        difficulty,
    })
}

/// `m` non-relevant documents for `query`.
///
/// Easy: uniform draws without replacement over corpus documents whose grade
/// is not above 0 (unjudged included), seeded per query. Hard: the `m`
/// highest-ranked such documents of the first-stage run.
pub fn sample_negatives(
    query: &Query,
    qrels: &Qrels,
    corpus: &Corpus,
    run: Option<&RunList>,
    mode: Difficulty,
    m: usize,
    seed: u64,
) -> Result<Vec<TrainingPair>> {
    if m == 0 {
        return Err(Error::invalid("number of negatives must be at least 1"));
    }
    let qid = query.query_id.as_str();
    let chosen: Vec<&str> = match mode {
        Difficulty::Easy => {
            let pool: Vec<&str> = corpus
                .docs()
                .iter()
                .map(|d| d.doc_id.as_str())
                .filter(|d| !qrels.is_relevant(qid, d))
                .collect();
            if pool.len() < m {
                return Err(insufficient(qid, m, pool.len()));
            }
            let mut rng = crate::seeded_rng(seed, &format!("negatives/{qid}"));
            rand::seq::index::sample(&mut rng, pool.len(), m)
                .into_iter()
                .map(|i| pool[i])
                .collect()
        }
        Difficulty::Hard => {
            let run = run.ok_or_else(|| Error::invalid("hard negatives need a first-stage run"))?;
            let hits = run
                .get(qid)
                .ok_or_else(|| Error::MissingRunQuery(qid.to_owned()))?;
            let pool: Vec<&str> = hits
                .iter()
                .map(|h| h.doc_id.as_str())
                .filter(|d| !qrels.is_relevant(qid, d))
                .collect();
            if pool.len() < m {
                return Err(insufficient(qid, m, pool.len()));
            }
            pool[..m].to_vec()
        }
    };
    chosen
        .into_iter()
        .map(|d| pair_for(query, corpus, d, 0, mode))
        .collect()
}

fn insufficient(query_id: &str, needed: usize, available: usize) -> Error {
    Error::Insufficient {
        what: format!("negatives for query {query_id:?}"),
        needed,
        available,
    }
}

/// Positives (every judged relevant document present in the corpus) followed
/// by `m` negatives, for each query that has judgments.
pub fn training_pairs(
    queries: &QuerySet,
    qrels: &Qrels,
    corpus: &Corpus,
    run: Option<&RunList>,
    mode: Difficulty,
    m: usize,
    seed: u64,
) -> Result<Vec<TrainingPair>> {
    let per_query: Vec<Vec<TrainingPair>> = queries
        .queries()
        .par_iter()
        .filter(|q| qrels.contains_query(&q.query_id))
        .map(|q| {
            let mut out = Vec::new();
            for (d, _) in qrels.relevant(&q.query_id) {
                if corpus.get(d).is_some() {
                    out.push(pair_for(q, corpus, d, 1, mode)?);
                }
            }
            out.extend(sample_negatives(q, qrels, corpus, run, mode, m, seed)?);
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(per_query.into_iter().flatten().collect())
}

pub fn write_training_pairs(path: &Path, pairs: &[TrainingPair]) -> Result<()> {
    io::write_jsonl(path, pairs)
}

pub fn read_training_pairs(path: &Path) -> Result<Vec<TrainingPair>> {
    Ok(io::read_jsonl(path)?.into_iter().map(|(_, p)| p).collect())
}

/// External relevance scores keyed by `(query_id, doc_id)`.
pub type ScoreMap = BTreeMap<(String, String), f64>;

/// Candidates re-sorted by score descending, ties kept in first-stage order.
pub fn apply_external_scores(candidates: &CandidateSet, scores: &ScoreMap) -> Result<Vec<Hit>> {
    let mut scored = Vec::with_capacity(candidates.len());
    for d in &candidates.doc_ids {
        let key = (candidates.query_id.clone(), d.clone());
        let &s = scores.get(&key).ok_or_else(|| Error::MissingScore {
            query_id: key.0.clone(),
            doc_id: key.1.clone(),
        })?;
        if !s.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite score for {:?}/{:?}",
                key.0, key.1
            )));
        }
        scored.push(Hit::new(d, s));
    }
    scored.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(scored)
}

/// Applies scores to every candidate set.
pub fn rerank_all(candidates: &[CandidateSet], scores: &ScoreMap, tag: &str) -> Result<RunList> {
    let lists: Vec<Vec<Hit>> = candidates
        .par_iter()
        .map(|c| apply_external_scores(c, scores))
        .collect::<Result<_>>()?;
    let mut run = RunList::new(tag);
    for (c, hits) in candidates.iter().zip(lists) {
        run.insert(&c.query_id, hits)?;
    }
    Ok(run)
}

pub fn write_candidates(path: &Path, candidates: &[CandidateSet]) -> Result<()> {
    io::write_jsonl(path, candidates)
}

pub fn read_candidates(path: &Path) -> Result<Vec<CandidateSet>> {
    let sets: Vec<CandidateSet> = io::read_jsonl(path)?.into_iter().map(|(_, c)| c).collect();
    for c in &sets {
        let unique: HashSet<&String> = c.doc_ids.iter().collect();
        if unique.len() != c.doc_ids.len() || c.first_stage_ranks.len() != c.doc_ids.len() {
            return Err(Error::Format(format!(
                "inconsistent candidate set for {:?}",
                c.query_id
            )));
        }
    }
    Ok(sets)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringRequest {
    pub query_id: String,
    pub doc_id: String,
    pub query_text: String,
    pub doc_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringResponse {
    pub query_id: String,
    pub doc_id: String,
    pub score: f64,
}

/// One request per candidate, texts taken from the query set and corpus.
pub fn scoring_requests(
    candidates: &[CandidateSet],
    queries: &QuerySet,
    corpus: &Corpus,
) -> Result<Vec<ScoringRequest>> {
    let mut out = Vec::new();
    for c in candidates {
        let q = queries
            .get(&c.query_id)
            .ok_or_else(|| Error::invalid(format!("unknown query {:?}", c.query_id)))?;
        for d in &c.doc_ids {
            let doc = corpus.get(d).ok_or_else(|| Error::UnknownDocument(d.clone()))?;
            out.push(ScoringRequest {
                query_id: c.query_id.clone(),
                doc_id: d.clone(),
                query_text: q.text.clone(),
                doc_text: doc.text.clone(),
            });
        }
    }
    Ok(out)
}

pub fn export_scoring_requests(
    path: &Path,
    candidates: &[CandidateSet],
    queries: &QuerySet,
    corpus: &Corpus,
) -> Result<usize> {
    let requests = scoring_requests(candidates, queries, corpus)?;
    io::write_jsonl(path, &requests)?;
    Ok(requests.len())
}

pub fn read_scoring_requests(path: &Path) -> Result<Vec<ScoringRequest>> {
    Ok(io::read_jsonl(path)?.into_iter().map(|(_, r)| r).collect())
}

pub fn write_scores(path: &Path, responses: &[ScoringResponse]) -> Result<()> {
    io::write_jsonl(path, responses)
}

/// Reads a response file. A repeated pair is accepted only with the same score.
pub fn import_scores(path: &Path) -> Result<ScoreMap> {
    let mut map = ScoreMap::new();
    for (line, r) in io::read_jsonl::<ScoringResponse>(path)? {
        if !r.score.is_finite() {
            return Err(io::malformed(path, line, "score is not finite"));
        }
        match map.insert((r.query_id.clone(), r.doc_id.clone()), r.score) {
            Some(prev) if prev != r.score => {
                return Err(Error::ConflictingScore {
                    query_id: r.query_id,
                    doc_id: r.doc_id,
                })
            }
            _ => {}
        }
    }
    Ok(map)
}
