//! Recall@K and nDCG@K, per language pair and macro-averaged.

mod report;
mod run;

use std::collections::BTreeMap;

pub use report::{MetricReport, PairMetrics};
pub(crate) use run::top_k;
pub use run::{Hit, RunList};

use crate::corpus::Qrels;
use crate::error::{Error, Result};

/// Label for queries that carry no language pair.
pub const UNPAIRED: &str = "all";

/// Which grades count as relevant for Recall: `grade > relevance_threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalOptions {
    pub relevance_threshold: u32,
}

/// 1.0 if any of the first `k` hits has grade above the threshold.
pub fn query_recall(hits: &[Hit], judged: &BTreeMap<String, u32>, k: usize, threshold: u32) -> f64 {
    let found = hits
        .iter()
        .take(k)
        .any(|h| judged.get(&h.doc_id).is_some_and(|&g| g > threshold));
    if found {
        1.0
    } else {
        0.0
    }
}

fn gain(grade: u32) -> f64 {
    2f64.powi(grade as i32) - 1.0
}

fn discount(rank: usize) -> f64 {
    ((rank + 1) as f64).log2()
}

/// nDCG@k with exponential gain `2^g − 1` and `log2(rank + 1)` discount;
/// 0 when no judged document has positive grade.
pub fn query_ndcg(hits: &[Hit], judged: &BTreeMap<String, u32>, k: usize) -> f64 {
    let dcg: f64 = hits
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, h)| gain(judged.get(&h.doc_id).copied().unwrap_or(0)) / discount(i + 1))
        .sum();
    let mut ideal: Vec<u32> = judged.values().copied().filter(|&g| g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| gain(g) / discount(i + 1))
        .sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// The run and the qrels must cover exactly the same queries.
pub fn check_coverage(run: &RunList, qrels: &Qrels) -> Result<()> {
    if let Some(q) = run.query_ids().find(|q| !qrels.contains_query(q)) {
        return Err(Error::UnjudgedQuery(q.to_owned()));
    }
    if let Some(q) = qrels.query_ids().find(|q| !run.contains(q)) {
        return Err(Error::MissingRunQuery(q.to_owned()));
    }
    Ok(())
}

fn pair_label(run: &RunList, query_id: &str) -> String {
    run.pair(query_id)
        .map(|p| p.to_string())
        .unwrap_or_else(|| UNPAIRED.to_owned())
}

fn per_pair<F>(run: &RunList, qrels: &Qrels, k: usize, metric: F) -> Result<BTreeMap<String, f64>>
where
    F: Fn(&[Hit], &BTreeMap<String, u32>, usize) -> f64,
{
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (q, hits) in run.iter() {
        let judged = qrels
            .judged(q)
            .ok_or_else(|| Error::UnjudgedQuery(q.to_owned()))?;
        let slot = sums.entry(pair_label(run, q)).or_insert((0.0, 0));
        slot.0 += metric(hits, judged, k);
        slot.1 += 1;
    }
    Ok(sums.into_iter().map(|(p, (s, n))| (p, s / n as f64)).collect())
}

/// Recall@k per language pair (grade > 0 is relevant).
pub fn recall_at_k(run: &RunList, qrels: &Qrels, k: usize) -> Result<BTreeMap<String, f64>> {
    per_pair(run, qrels, k, |h, j, k| query_recall(h, j, k, 0))
}

/// Mean nDCG@k per language pair.
pub fn ndcg_at_k(run: &RunList, qrels: &Qrels, k: usize) -> Result<BTreeMap<String, f64>> {
    per_pair(run, qrels, k, query_ndcg)
}

/// Per-pair Recall and nDCG at every cutoff in `ks`, plus macro and micro
/// averages. Fails if run and qrels do not cover the same queries.
pub fn evaluate(run: &RunList, qrels: &Qrels, ks: &[usize], options: EvalOptions) -> Result<MetricReport> {
    check_coverage(run, qrels)?;
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::invalid("cutoffs must be non-empty and >= 1"));
    }
    let mut pairs: BTreeMap<String, PairMetrics> = BTreeMap::new();
    for (q, hits) in run.iter() {
        let judged = qrels.judged(q).expect("coverage checked");
        let label = pair_label(run, q);
        let entry = pairs
            .entry(label.clone())
            .or_insert_with(|| PairMetrics::empty(&label));
        entry.queries += 1;
        for &k in ks {
            *entry.recall.entry(k).or_insert(0.0) +=
                query_recall(hits, judged, k, options.relevance_threshold);
            *entry.ndcg.entry(k).or_insert(0.0) += query_ndcg(hits, judged, k);
        }
    }
    for p in pairs.values_mut() {
        let n = p.queries as f64;
        p.recall.values_mut().for_each(|v| *v /= n);
        p.ndcg.values_mut().for_each(|v| *v /= n);
    }
    MetricReport::aggregate(run.tag(), pairs.into_values().collect())
}
