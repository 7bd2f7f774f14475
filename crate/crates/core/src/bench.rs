//! Interleaved latency comparison of exact and approximate dense retrieval.
//!
//! For each language pair the exact engine runs first, then the ANN engine;
//! each call records its completion time on a monotonic clock. Timestamps are
//! min-max normalized to [0, 1] and scaled by the pair count. Every adjacent
//! (exact, ann) event pair yields the difference `t_ann − t_exact`, so
//! exact→ann transitions give non-negative values and ann→exact transitions
//! non-positive ones.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ann::{HnswIndex, HnswParams};
use crate::corpus::Corpus;
use crate::dense::{EmbeddingMatrix, ExactSearcher, IdMap};
use crate::error::{Error, Result};
use crate::eval::{Hit, RunList};
use crate::lang::LanguagePair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Ann,
}

impl Method {
    pub fn swapped(self) -> Method {
        match self {
            Method::Exact => Method::Ann,
            Method::Ann => Method::Exact,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::Ann => "ann",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub pair: LanguagePair,
    pub method: Method,
    /// Seconds since the start of the measured loop.
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyTrace {
    pub events: Vec<TraceEvent>,
    pub pair_count: usize,
}

impl LatencyTrace {
    /// Checks that methods alternate, each pair gets one event per method
    /// back to back, and timestamps never decrease.
    pub fn new(events: Vec<TraceEvent>, pair_count: usize) -> Result<Self> {
        if pair_count == 0 {
            return Err(Error::invalid("pair count must be at least 1"));
        }
        for (i, w) in events.windows(2).enumerate() {
            if w[0].method == w[1].method {
                return Err(Error::invalid(format!(
                    "events {i} and {} use the same method",
                    i + 1
                )));
            }
            if w[1].t < w[0].t || !w[1].t.is_finite() {
                return Err(Error::invalid(format!("timestamp decreases at event {}", i + 1)));
            }
            if i % 2 == 0 && w[0].pair != w[1].pair {
                return Err(Error::invalid(format!(
                    "events {i} and {} belong to different pairs",
                    i + 1
                )));
            }
        }
        Ok(LatencyTrace { events, pair_count })
    }

    /// Trace from bare timestamps, alternating exact and ann over synthetic
    /// pair labels.
    pub fn from_timestamps(ts: &[f64], pair_count: usize) -> Result<Self> {
        let pair: LanguagePair = "xx-yy".parse()?;
        let events = ts
            .iter()
            .enumerate()
            .map(|(i, &t)| TraceEvent {
                pair: pair.clone(),
                method: if i % 2 == 0 { Method::Exact } else { Method::Ann },
                t,
            })
            .collect();
        LatencyTrace::new(events, pair_count)
    }

    pub fn with_swapped_labels(&self) -> LatencyTrace {
        LatencyTrace {
            events: self
                .events
                .iter()
                .map(|e| TraceEvent {
                    method: e.method.swapped(),
                    ..e.clone()
                })
                .collect(),
            pair_count: self.pair_count,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub pair_count: usize,
    /// Timestamps after normalization and scaling, in trace order.
    pub normalized: Vec<f64>,
    /// Mean `t_ann − t_exact` over exact→ann transitions.
    pub exact_to_ann: f64,
    /// Mean `t_ann − t_exact` over ann→exact transitions.
    pub ann_to_exact: f64,
    pub mean_difference: f64,
    /// All timestamps were equal; every difference is reported as 0.
    pub degenerate: bool,
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

pub fn normalize_and_summarize(trace: &LatencyTrace) -> Result<LatencySummary> {
    if trace.len() < 2 {
        return Err(Error::Insufficient {
            what: "trace timestamps".into(),
            needed: 2,
            available: trace.len(),
        });
    }
    let scale = trace.pair_count as f64;
    let lo = trace.events.iter().map(|e| e.t).fold(f64::INFINITY, f64::min);
    let hi = trace.events.iter().map(|e| e.t).fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Ok(LatencySummary {
            pair_count: trace.pair_count,
            normalized: vec![0.0; trace.len()],
            exact_to_ann: 0.0,
            ann_to_exact: 0.0,
            mean_difference: 0.0,
            degenerate: true,
        });
    }
    let normalized: Vec<f64> = trace
        .events
        .iter()
        .map(|e| (e.t - lo) / (hi - lo) * scale)
        .collect();
    let (mut forward, mut backward) = (Vec::new(), Vec::new());
    for (i, w) in trace.events.windows(2).enumerate() {
        let (a, b) = (normalized[i], normalized[i + 1]);
        match (w[0].method, w[1].method) {
            (Method::Exact, Method::Ann) => forward.push(b - a),
            (Method::Ann, Method::Exact) => backward.push(a - b),
            _ => unreachable!("trace alternates"),
        }
    }
    let exact_to_ann = mean(&forward);
    let ann_to_exact = mean(&backward);
    Ok(LatencySummary {
        pair_count: trace.pair_count,
        normalized,
        exact_to_ann,
        ann_to_exact,
        mean_difference: (exact_to_ann + ann_to_exact) / 2.0,
        degenerate: false,
    })
}

/// Queries and documents of one language pair.
#[derive(Debug, Clone)]
pub struct PairWorkload {
    pub pair: LanguagePair,
    pub query_ids: IdMap,
    pub queries: EmbeddingMatrix,
    pub doc_ids: IdMap,
    pub docs: EmbeddingMatrix,
}

/// Groups queries by pair; each pair searches the documents written in its
/// document language. Pairs without documents are skipped.
pub fn split_by_pair(
    pairs: &BTreeMap<String, LanguagePair>,
    queries: &EmbeddingMatrix,
    query_ids: &IdMap,
    docs: &EmbeddingMatrix,
    doc_ids: &IdMap,
    corpus: &Corpus,
) -> Result<Vec<PairWorkload>> {
    let mut by_pair: BTreeMap<&LanguagePair, Vec<usize>> = BTreeMap::new();
    for (row, qid) in query_ids.ids().iter().enumerate() {
        if let Some(p) = pairs.get(qid) {
            by_pair.entry(p).or_default().push(row);
        }
    }
    let mut out = Vec::new();
    for (pair, rows) in by_pair {
        let mut doc_rows = Vec::new();
        for (row, d) in doc_ids.ids().iter().enumerate() {
            if corpus.lang_of(d)? == &pair.doc_lang {
                doc_rows.push(row);
            }
        }
        if doc_rows.is_empty() {
            continue;
        }
        out.push(PairWorkload {
            pair: pair.clone(),
            query_ids: query_ids.select(&rows),
            queries: queries.select(&rows),
            doc_ids: doc_ids.select(&doc_rows),
            docs: docs.select(&doc_rows),
        });
    }
    Ok(out)
}

/// One side of the comparison. Implementations should search sequentially.
pub trait RetrievalEngine {
    fn method(&self) -> Method;
    fn retrieve(&mut self, workload: &PairWorkload, k: usize) -> Result<RunList>;
}

fn sequential_run(
    workload: &PairWorkload,
    tag: &str,
    mut search: impl FnMut(&[f32]) -> Result<Vec<Hit>>,
) -> Result<RunList> {
    let mut run = RunList::new(tag);
    for (row, q) in workload.queries.rows().enumerate() {
        let qid = workload.query_ids.id(row);
        run.insert(qid, search(q)?)?;
        run.set_pair(qid, workload.pair.clone());
    }
    Ok(run)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExactEngine;

impl RetrievalEngine for ExactEngine {
    fn method(&self) -> Method {
        Method::Exact
    }

    fn retrieve(&mut self, workload: &PairWorkload, k: usize) -> Result<RunList> {
        let searcher = ExactSearcher::new(&workload.docs, &workload.doc_ids)?;
        sequential_run(workload, "exact", |q| searcher.search(q, k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexAccess {
    /// Open the pair's index file for every call.
    #[default]
    PerPair,
    /// Keep every index in memory.
    Shared,
}

impl FromStr for IndexAccess {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-pair" => Ok(IndexAccess::PerPair),
            "shared" => Ok(IndexAccess::Shared),
            _ => Err(Error::invalid(format!(
                "unknown index access {s:?} (per-pair|shared)"
            ))),
        }
    }
}

pub struct AnnEngine {
    access: IndexAccess,
    ef: Option<usize>,
    files: BTreeMap<String, PathBuf>,
    loaded: BTreeMap<String, HnswIndex>,
}

impl AnnEngine {
    /// Builds one index per workload and stores it under `dir`.
    pub fn build(
        workloads: &[PairWorkload],
        params: HnswParams,
        seed: u64,
        access: IndexAccess,
        ef: Option<usize>,
        dir: &Path,
    ) -> Result<Self> {
        let mut files = BTreeMap::new();
        let mut loaded = BTreeMap::new();
        for w in workloads {
            let label = w.pair.to_string();
            let index = HnswIndex::build(&w.docs, &w.doc_ids, params, seed)?;
            let path = dir.join(format!("{label}.clrh"));
            index.save(&path)?;
            files.insert(label.clone(), path);
            if access == IndexAccess::Shared {
                loaded.insert(label, index);
            }
        }
        Ok(AnnEngine {
            access,
            ef,
            files,
            loaded,
        })
    }
}

impl RetrievalEngine for AnnEngine {
    fn method(&self) -> Method {
        Method::Ann
    }

    fn retrieve(&mut self, workload: &PairWorkload, k: usize) -> Result<RunList> {
        let label = workload.pair.to_string();
        let no_index = || Error::invalid(format!("no index for pair {label}"));
        let opened;
        let index = match self.access {
            IndexAccess::PerPair => {
                opened = HnswIndex::load(self.files.get(&label).ok_or_else(no_index)?)?;
                &opened
            }
            IndexAccess::Shared => self.loaded.get(&label).ok_or_else(no_index)?,
        };
        let ef = self.ef.unwrap_or_else(|| index.params().ef_for(k)).max(k);
        sequential_run(workload, "ann", |q| index.search(q, k, ef))
    }
}

#[derive(Debug, Clone)]
pub struct Interleaved {
    pub trace: LatencyTrace,
    /// Wall time of every measured call, in trace order.
    pub durations: Vec<(LanguagePair, Method, f64)>,
    pub exact_runs: BTreeMap<String, RunList>,
    pub ann_runs: BTreeMap<String, RunList>,
    /// Per pair: mean fraction of the exact top-k also returned by ANN.
    pub overlap: BTreeMap<String, f64>,
}

impl Interleaved {
    /// `1 − overlap`, per pair.
    pub fn recall_gap(&self) -> BTreeMap<String, f64> {
        self.overlap.iter().map(|(p, o)| (p.clone(), 1.0 - o)).collect()
    }
}

/// Mean per-query fraction of `exact`'s documents that `approx` also returned.
pub fn run_overlap(exact: &RunList, approx: &RunList) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for (q, hits) in exact.iter() {
        if hits.is_empty() {
            continue;
        }
        let other: HashSet<&str> = approx
            .get(q)
            .unwrap_or_default()
            .iter()
            .map(|h| h.doc_id.as_str())
            .collect();
        let shared = hits.iter().filter(|h| other.contains(h.doc_id.as_str())).count();
        total += shared as f64 / hits.len() as f64;
        n += 1;
    }
    if n == 0 {
        1.0
    } else {
        total / n as f64
    }
}

/// Runs exact then ANN retrieval for every workload, after one discarded
/// warm-up round on the first workload.
pub fn run_interleaved<'e>(
    workloads: &[PairWorkload],
    exact: &mut (dyn RetrievalEngine + 'e),
    ann: &mut (dyn RetrievalEngine + 'e),
    k: usize,
    pair_count: usize,
) -> Result<Interleaved> {
    if workloads.is_empty() {
        return Err(Error::Empty("no language pairs to benchmark".into()));
    }
    let fail = |engine: Method, pair: &LanguagePair, completed: usize, e: Error| Error::Bench {
        engine: engine.to_string(),
        pair: pair.to_string(),
        completed,
        reason: e.to_string(),
    };
    let first = &workloads[0];
    for engine in [&mut *exact, &mut *ann] {
        engine
            .retrieve(first, k)
            .map_err(|e| fail(engine.method(), &first.pair, 0, e))?;
    }

    let mut events = Vec::with_capacity(workloads.len() * 2);
    let mut durations = Vec::with_capacity(workloads.len() * 2);
    let mut exact_runs = BTreeMap::new();
    let mut ann_runs = BTreeMap::new();
    let start = Instant::now();
    for w in workloads {
        for engine in [&mut *exact, &mut *ann] {
            let method = engine.method();
            let before = start.elapsed().as_secs_f64();
            let run = engine
                .retrieve(w, k)
                .map_err(|e| fail(method, &w.pair, events.len(), e))?;
            let t = start.elapsed().as_secs_f64();
            events.push(TraceEvent {
                pair: w.pair.clone(),
                method,
                t,
            });
            durations.push((w.pair.clone(), method, t - before));
            match method {
                Method::Exact => exact_runs.insert(w.pair.to_string(), run),
                Method::Ann => ann_runs.insert(w.pair.to_string(), run),
            };
        }
    }
    let overlap = exact_runs
        .iter()
        .map(|(p, e)| (p.clone(), run_overlap(e, &ann_runs[p])))
        .collect();
    Ok(Interleaved {
        trace: LatencyTrace::new(events, pair_count)?,
        durations,
        exact_runs,
        ann_runs,
        overlap,
    })
}

/// One cell group of a latency table: a method on a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub method: Method,
    pub dataset: String,
    /// Normalized time attributed to the method.
    pub time: f64,
    pub recall: Option<f64>,
}

/// Rows for a summary: ANN is charged the exact→ann difference, exact the
/// (negated) ann→exact difference.
pub fn latency_rows(
    dataset: &str,
    summary: &LatencySummary,
    recall: &BTreeMap<Method, f64>,
) -> Vec<LatencyRow> {
    vec![
        LatencyRow {
            method: Method::Exact,
            dataset: dataset.to_owned(),
            time: -summary.ann_to_exact,
            recall: recall.get(&Method::Exact).copied(),
        },
        LatencyRow {
            method: Method::Ann,
            dataset: dataset.to_owned(),
            time: summary.exact_to_ann,
            recall: recall.get(&Method::Ann).copied(),
        },
    ]
}

/// Method rows, with time and recall columns per dataset.
pub fn render_latency_table(rows: &[LatencyRow], k: usize) -> String {
    let mut datasets: Vec<&str> = rows.iter().map(|r| r.dataset.as_str()).collect();
    datasets.sort_unstable();
    datasets.dedup();
    let mut out = String::new();
    let _ = write!(out, "{:<8}", "method");
    for d in &datasets {
        let _ = write!(out, " {:>14} {:>14}", format!("{d} time"), format!("{d} R@{k}"));
    }
    out.push('\n');
    for m in [Method::Exact, Method::Ann] {
        let _ = write!(out, "{:<8}", m.to_string());
        for d in &datasets {
            match rows.iter().find(|r| r.method == m && r.dataset == *d) {
                Some(r) => {
                    let recall = r.recall.map_or("-".to_owned(), |v| format!("{v:.4}"));
                    let _ = write!(out, " {:>14.4} {:>14}", r.time, recall);
                }
                None => {
                    let _ = write!(out, " {:>14} {:>14}", "-", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}
