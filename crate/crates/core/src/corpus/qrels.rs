use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io;

/// Graded relevance judgments, `query_id → doc_id → grade`.
///
/// Read from and written to the TREC qrels layout, one judgment per line:
///
/// ```text
/// query_id 0 doc_id grade
/// ```
///
/// Every query must have at least one judgment with grade > 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    /// Builds judgments from `(query_id, doc_id, grade)` triples.
    pub fn from_triples<I, Q, D>(triples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Q, D, i64)>,
        Q: Into<String>,
        D: Into<String>,
    {
        let mut judgments: BTreeMap<String, BTreeMap<String, u32>> = BTreeMap::new();
        for (q, d, grade) in triples {
            let (q, d) = (q.into(), d.into());
            if grade < 0 {
                return Err(Error::NegativeGrade {
                    query_id: q,
                    doc_id: d,
                    grade,
                });
            }
            let grade =
                u32::try_from(grade).map_err(|_| Error::invalid(format!("grade {grade} out of range")))?;
            let per_query = judgments.entry(q.clone()).or_default();
            if per_query.insert(d.clone(), grade).is_some() {
                return Err(Error::DuplicateId(format!("{q}/{d}")));
            }
        }
        for (q, docs) in &judgments {
            if !docs.values().any(|&g| g > 0) {
                return Err(Error::NoGold(q.clone()));
            }
        }
        Ok(Qrels { judgments })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut triples = Vec::new();
        for (line, text) in io::read_lines(path)? {
            let fields: Vec<&str> = text.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(io::malformed(
                    path,
                    line,
                    format!("expected 4 fields, found {}", fields.len()),
                ));
            }
            let grade: i64 = fields[3]
                .parse()
                .map_err(|_| io::malformed(path, line, format!("bad grade {:?}", fields[3])))?;
            triples.push((fields[0].to_owned(), fields[2].to_owned(), grade));
        }
        Qrels::from_triples(triples)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = io::create(path)?;
        for (q, docs) in &self.judgments {
            for (d, g) in docs {
                writeln!(w, "{q} 0 {d} {g}").map_err(|e| Error::io(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> Option<u32> {
        self.judgments.get(query_id)?.get(doc_id).copied()
    }

    pub fn judged(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(query_id)
    }

    pub fn contains_query(&self, query_id: &str) -> bool {
        self.judgments.contains_key(query_id)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn num_queries(&self) -> usize {
        self.judgments.len()
    }

    /// Documents with grade > 0.
    pub fn relevant(&self, query_id: &str) -> impl Iterator<Item = (&str, u32)> {
        self.judgments
            .get(query_id)
            .into_iter()
            .flat_map(|docs| docs.iter().filter(|(_, &g)| g > 0))
            .map(|(d, &g)| (d.as_str(), g))
    }

    /// The query's gold document: highest grade, lowest doc_id among equals.
    pub fn gold(&self, query_id: &str) -> Option<&str> {
        let mut best: Option<(&str, u32)> = None;
        for (d, g) in self.relevant(query_id) {
            if best.is_none_or(|(_, bg)| g > bg) {
                best = Some((d, g));
            }
        }
        best.map(|(d, _)| d)
    }

    pub fn is_relevant(&self, query_id: &str, doc_id: &str) -> bool {
        self.grade(query_id, doc_id).is_some_and(|g| g > 0)
    }

    /// Keeps only the listed queries.
    pub fn restrict<'a>(&self, query_ids: impl IntoIterator<Item = &'a str>) -> Qrels {
        let judgments = query_ids
            .into_iter()
            .filter_map(|q| self.judgments.get_key_value(q))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        Qrels { judgments }
    }

    /// Rewrites doc ids through `map`; used after deduplication merges
    /// documents. Colliding judgments keep the higher grade.
    pub fn remap_docs(&self, map: &BTreeMap<String, String>) -> Qrels {
        let mut judgments: BTreeMap<String, BTreeMap<String, u32>> = BTreeMap::new();
        for (q, docs) in &self.judgments {
            let out = judgments.entry(q.clone()).or_default();
            for (d, &g) in docs {
                let d = map.get(d).unwrap_or(d);
                let slot = out.entry(d.clone()).or_insert(g);
                *slot = (*slot).max(g);
            }
        }
        Qrels { judgments }
    }
}
