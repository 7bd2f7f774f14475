use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub pair: String,
    pub queries: usize,
    pub recall: BTreeMap<usize, f64>,
    pub ndcg: BTreeMap<usize, f64>,
}

impl PairMetrics {
    pub(crate) fn empty(pair: &str) -> Self {
        PairMetrics {
            pair: pair.to_owned(),
            queries: 0,
            recall: BTreeMap::new(),
            ndcg: BTreeMap::new(),
        }
    }
}

/// Per-pair metrics with macro (unweighted over pairs) and micro (weighted
/// by query count) averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub run_tag: String,
    pub pairs: Vec<PairMetrics>,
    pub macro_recall: BTreeMap<usize, f64>,
    pub macro_ndcg: BTreeMap<usize, f64>,
    pub micro_recall: BTreeMap<usize, f64>,
    pub micro_ndcg: BTreeMap<usize, f64>,
    pub total_queries: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Record {
    Header {
        fields: BTreeMap<String, Value>,
    },
    Pair(PairMetrics),
    Macro {
        recall: BTreeMap<usize, f64>,
        ndcg: BTreeMap<usize, f64>,
    },
    Micro {
        recall: BTreeMap<usize, f64>,
        ndcg: BTreeMap<usize, f64>,
        queries: usize,
    },
}

fn mean_over<'a>(
    pairs: &'a [PairMetrics],
    pick: impl Fn(&'a PairMetrics) -> &'a BTreeMap<usize, f64>,
    weighted: bool,
) -> BTreeMap<usize, f64> {
    let mut sums: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for p in pairs {
        let w = if weighted { p.queries as f64 } else { 1.0 };
        for (&k, &v) in pick(p) {
            let s = sums.entry(k).or_insert((0.0, 0.0));
            s.0 += w * v;
            s.1 += w;
        }
    }
    sums.into_iter()
        .map(|(k, (s, w))| (k, if w > 0.0 { s / w } else { 0.0 }))
        .collect()
}

impl MetricReport {
    /// Combines per-pair values. At least one pair is required.
    pub fn aggregate(run_tag: &str, mut pairs: Vec<PairMetrics>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Empty("no language pairs to aggregate".into()));
        }
        for p in &pairs {
            let values = p.recall.values().chain(p.ndcg.values());
            if let Some(v) = values.into_iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::invalid(format!(
                    "metric value {v} for {} outside [0, 1]",
                    p.pair
                )));
            }
        }
        pairs.sort_by(|a, b| a.pair.cmp(&b.pair));
        Ok(MetricReport {
            run_tag: run_tag.to_owned(),
            macro_recall: mean_over(&pairs, |p| &p.recall, false),
            macro_ndcg: mean_over(&pairs, |p| &p.ndcg, false),
            micro_recall: mean_over(&pairs, |p| &p.recall, true),
            micro_ndcg: mean_over(&pairs, |p| &p.ndcg, true),
            total_queries: pairs.iter().map(|p| p.queries).sum(),
            pairs,
        })
    }

    pub fn pair(&self, label: &str) -> Option<&PairMetrics> {
        self.pairs.iter().find(|p| p.pair == label)
    }

    /// Recall@k by pair label.
    pub fn recall_by_pair(&self, k: usize) -> BTreeMap<String, f64> {
        self.pairs
            .iter()
            .filter_map(|p| p.recall.get(&k).map(|&v| (p.pair.clone(), v)))
            .collect()
    }

    /// One JSON record per line, each an object with a single key naming
    /// its kind: `header`, one `pair` per language pair, `macro`, `micro`.
    pub fn write_jsonl(&self, path: &Path, header: BTreeMap<String, Value>) -> Result<()> {
        let mut fields = header;
        fields.insert("run_tag".into(), Value::String(self.run_tag.clone()));
        let mut records = vec![Record::Header { fields }];
        records.extend(self.pairs.iter().cloned().map(Record::Pair));
        records.push(Record::Macro {
            recall: self.macro_recall.clone(),
            ndcg: self.macro_ndcg.clone(),
        });
        records.push(Record::Micro {
            recall: self.micro_recall.clone(),
            ndcg: self.micro_ndcg.clone(),
            queries: self.total_queries,
        });
        io::write_jsonl(path, &records)
    }

    /// Reads the per-pair records of a report and recomputes the averages.
    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let mut tag = String::new();
        let mut pairs = Vec::new();
        for (_, rec) in io::read_jsonl::<Record>(path)? {
            match rec {
                Record::Header { fields } => {
                    if let Some(Value::String(t)) = fields.get("run_tag") {
                        tag = t.clone();
                    }
                }
                Record::Pair(p) => pairs.push(p),
                Record::Macro { .. } | Record::Micro { .. } => {}
            }
        }
        MetricReport::aggregate(&tag, pairs)
    }

    /// Plain-text table, one row per pair plus the averages.
    pub fn render_table(&self) -> String {
        let ks: Vec<usize> = self.macro_recall.keys().copied().collect();
        let mut out = String::new();
        let _ = write!(out, "{:<10} {:>7}", "pair", "queries");
        for k in &ks {
            let _ = write!(out, " {:>10} {:>10}", format!("R@{k}"), format!("nDCG@{k}"));
        }
        out.push('\n');
        let mut row = |label: &str, n: usize, r: &BTreeMap<usize, f64>, d: &BTreeMap<usize, f64>| {
            let _ = write!(out, "{label:<10} {n:>7}");
            for k in &ks {
                let _ = write!(
                    out,
                    " {:>10.4} {:>10.4}",
                    r.get(k).unwrap_or(&0.0),
                    d.get(k).unwrap_or(&0.0)
                );
            }
            out.push('\n');
        };
        for p in &self.pairs {
            row(&p.pair, p.queries, &p.recall, &p.ndcg);
        }
        row("macro", self.total_queries, &self.macro_recall, &self.macro_ndcg);
        row("micro", self.total_queries, &self.micro_recall, &self.micro_ndcg);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(label: &str, queries: usize, r: f64) -> PairMetrics {
        PairMetrics {
            pair: label.into(),
            queries,
            recall: [(100, r)].into(),
            ndcg: [(100, r / 2.0)].into(),
        }
    }

    #[test]
    fn one_pair_macro_is_that_pair() {
        let rep = MetricReport::aggregate("t", vec![pair("en-de", 5, 0.3)]).unwrap();
        assert_eq!(rep.macro_recall[&100], 0.3);
        assert_eq!(rep.micro_recall[&100], 0.3);
    }

    #[test]
    fn macro_ignores_query_counts() {
        let rep = MetricReport::aggregate("t", vec![pair("a-b", 10, 0.2), pair("c-d", 1000, 0.8)]).unwrap();
        assert!((rep.macro_recall[&100] - 0.5).abs() < 1e-15);
        assert!(rep.micro_recall[&100] > 0.79);
    }

    #[test]
    fn empty_and_out_of_range_inputs() {
        assert!(MetricReport::aggregate("t", vec![]).is_err());
        assert!(MetricReport::aggregate("t", vec![pair("a-b", 1, 1.5)]).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let rep =
            MetricReport::aggregate("bm25", vec![pair("en-de", 3, 0.25), pair("ja-en", 4, 1.0)]).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        rep.write_jsonl(f.path(), [("seed".to_string(), Value::from(7))].into())
            .unwrap();
        assert_eq!(MetricReport::read_jsonl(f.path()).unwrap(), rep);
        assert!(rep.render_table().contains("macro"));
    }
}
