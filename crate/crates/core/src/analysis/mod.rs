//! Document-language retrieval bias and typological-similarity correlation.
//!
//! Bias statistics look at the top `depth` documents of each ranked list,
//! rank 1 by default.

mod stats;
mod typology;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use stats::{average_ranks, pearson, spearman};
pub use typology::{
    correlate_similarity_with_performance, render_correlation_table, typological_similarity, Correlation,
    CorrelationOptions, CorrelationRow, FeatureSet, TypologicalVector, TypologyTable,
};

use crate::corpus::{Corpus, Qrels, QuerySet};
use crate::error::{Error, Result};
use crate::eval::RunList;
use crate::lang::LanguageCode;

pub const DEFAULT_BIAS_DEPTH: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SameLanguageRate {
    pub depth: usize,
    /// Over all queries of the run.
    pub overall: f64,
    pub queries: usize,
    pub per_query_language: BTreeMap<LanguageCode, f64>,
}

fn query_lang<'a>(queries: &'a QuerySet, query_id: &str) -> Result<&'a LanguageCode> {
    queries
        .get(query_id)
        .map(|q| &q.lang)
        .ok_or_else(|| Error::invalid(format!("run query {query_id:?} is not in the query set")))
}

fn check_depth(depth: usize) -> Result<()> {
    if depth == 0 {
        return Err(Error::invalid("bias depth must be at least 1"));
    }
    Ok(())
}

/// Fraction of queries whose top-`depth` documents include one written in
/// the query's language.
pub fn same_language_rate(
    run: &RunList,
    queries: &QuerySet,
    corpus: &Corpus,
    depth: usize,
) -> Result<SameLanguageRate> {
    check_depth(depth)?;
    if run.is_empty() {
        return Err(Error::Empty("run has no queries".into()));
    }
    let mut per_lang: BTreeMap<LanguageCode, (usize, usize)> = BTreeMap::new();
    for (q, hits) in run.iter() {
        let lang = query_lang(queries, q)?;
        let mut hit = false;
        for h in hits.iter().take(depth) {
            hit |= corpus.lang_of(&h.doc_id)? == lang;
        }
        let slot = per_lang.entry(lang.clone()).or_default();
        slot.0 += usize::from(hit);
        slot.1 += 1;
    }
    let (same, total) = per_lang.values().fold((0, 0), |(s, t), &(a, b)| (s + a, t + b));
    Ok(SameLanguageRate {
        depth,
        overall: same as f64 / total as f64,
        queries: total,
        per_query_language: per_lang
            .into_iter()
            .map(|(l, (s, t))| (l, s as f64 / t as f64))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageDistribution {
    pub depth: usize,
    /// Queries whose gold document is in another language.
    pub queries: usize,
    /// Share of retrieved documents per corpus language; sums to 1.
    pub shares: BTreeMap<LanguageCode, f64>,
    /// `1 / number of corpus languages`.
    pub uniform: f64,
    /// Each language's share of the corpus itself.
    pub corpus_shares: BTreeMap<LanguageCode, f64>,
}

/// Languages of the top-`depth` retrieved documents, over queries whose gold
/// document is not in the query language.
pub fn retrieved_language_distribution(
    run: &RunList,
    queries: &QuerySet,
    corpus: &Corpus,
    qrels: &Qrels,
    depth: usize,
) -> Result<LanguageDistribution> {
    check_depth(depth)?;
    let corpus_counts = corpus.language_counts();
    let mut counts: BTreeMap<LanguageCode, usize> = corpus_counts.keys().map(|l| (l.clone(), 0)).collect();
    let mut used = 0;
    let mut retrieved = 0usize;
    for (q, hits) in run.iter() {
        let Some(gold) = qrels.gold(q) else {
            continue;
        };
        if corpus.lang_of(gold)? == query_lang(queries, q)? {
            continue;
        }
        used += 1;
        for h in hits.iter().take(depth) {
            *counts.entry(corpus.lang_of(&h.doc_id)?.clone()).or_default() += 1;
            retrieved += 1;
        }
    }
    if used == 0 {
        return Err(Error::Empty(
            "no query has its gold document in another language".into(),
        ));
    }
    if retrieved == 0 {
        return Err(Error::Empty("filtered queries retrieved no documents".into()));
    }
    let total_docs = corpus.len() as f64;
    Ok(LanguageDistribution {
        depth,
        queries: used,
        shares: counts
            .into_iter()
            .map(|(l, c)| (l, c as f64 / retrieved as f64))
            .collect(),
        uniform: 1.0 / corpus_counts.len() as f64,
        corpus_shares: corpus_counts
            .into_iter()
            .map(|(l, c)| (l, c as f64 / total_docs))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub run_tag: String,
    pub depth: usize,
    pub same_language: SameLanguageRate,
    /// Absent when every gold document shares its query's language.
    pub distribution: Option<LanguageDistribution>,
}

pub fn bias_report(
    run: &RunList,
    queries: &QuerySet,
    corpus: &Corpus,
    qrels: &Qrels,
    depth: usize,
) -> Result<BiasReport> {
    let same_language = same_language_rate(run, queries, corpus, depth)?;
    let distribution = match retrieved_language_distribution(run, queries, corpus, qrels, depth) {
        Ok(d) => Some(d),
        Err(Error::Empty(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(BiasReport {
        run_tag: run.tag().to_owned(),
        depth,
        same_language,
        distribution,
    })
}

impl BiasReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "run {}: documents considered per query: top {}",
            self.run_tag, self.depth
        );
        let _ = writeln!(out, "{:<8} {:>10}", "query", "same-lang");
        for (l, r) in &self.same_language.per_query_language {
            let _ = writeln!(out, "{:<8} {:>10.4}", l.as_str(), r);
        }
        let _ = writeln!(out, "{:<8} {:>10.4}", "all", self.same_language.overall);
        if let Some(d) = &self.distribution {
            let _ = writeln!(
                out,
                "\nretrieved language when gold is cross-lingual ({} queries)",
                d.queries
            );
            let _ = writeln!(
                out,
                "{:<8} {:>10} {:>10} {:>10}",
                "doc", "share", "uniform", "corpus"
            );
            for (l, s) in &d.shares {
                let _ = writeln!(
                    out,
                    "{:<8} {:>10.4} {:>10.4} {:>10.4}",
                    l.as_str(),
                    s,
                    d.uniform,
                    d.corpus_shares.get(l).copied().unwrap_or(0.0)
                );
            }
        }
        out
    }
}
