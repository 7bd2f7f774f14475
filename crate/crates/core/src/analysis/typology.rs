//! Typological feature vectors and their correlation with retrieval quality.
//!
//! Vector files are tab-separated: `lang`, `feature_set`, then one field per
//! dimension. An empty field marks a missing value.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::stats::spearman;
use crate::error::{Error, Result};
use crate::io;
use crate::lang::{LanguageCode, LanguagePair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    Geographic,
    Syntax,
    Phonology,
    Inventory,
    Genealogical,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 5] = [
        FeatureSet::Geographic,
        FeatureSet::Syntax,
        FeatureSet::Phonology,
        FeatureSet::Inventory,
        FeatureSet::Genealogical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::Geographic => "geographic",
            FeatureSet::Syntax => "syntax",
            FeatureSet::Phonology => "phonology",
            FeatureSet::Inventory => "inventory",
            FeatureSet::Genealogical => "genealogical",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureSet::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown feature set {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypologicalVector {
    pub lang: LanguageCode,
    pub feature_set: FeatureSet,
    pub values: Vec<Option<f64>>,
}

impl TypologicalVector {
    pub fn new(lang: LanguageCode, feature_set: FeatureSet, values: Vec<Option<f64>>) -> Result<Self> {
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite {feature_set} value for {lang}"
            )));
        }
        Ok(TypologicalVector {
            lang,
            feature_set,
            values,
        })
    }
}

/// Cosine similarity over the dimensions present in both vectors.
///
/// `None` when no dimension is shared or a masked vector has zero norm.
pub fn typological_similarity(a: &TypologicalVector, b: &TypologicalVector) -> Result<Option<f64>> {
    if a.feature_set != b.feature_set {
        return Err(Error::invalid(format!(
            "cannot compare {} with {} features",
            a.feature_set, b.feature_set
        )));
    }
    if a.values.len() != b.values.len() {
        return Err(Error::DimensionMismatch {
            expected: a.values.len(),
            actual: b.values.len(),
        });
    }
    let (mut dot, mut na, mut nb, mut shared) = (0.0, 0.0, 0.0, 0usize);
    for (x, y) in a.values.iter().zip(&b.values) {
        if let (Some(x), Some(y)) = (x, y) {
            dot += x * y;
            na += x * x;
            nb += y * y;
            shared += 1;
        }
    }
    if shared == 0 || na == 0.0 || nb == 0.0 {
        return Ok(None);
    }
    // sqrt(x * x) == x exactly, so a vector compared with itself gives 1.0.
    Ok(Some((dot / (na * nb).sqrt()).clamp(-1.0, 1.0)))
}

/// All vectors of a file, keyed by feature set and language.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TypologyTable {
    vectors: BTreeMap<(FeatureSet, LanguageCode), TypologicalVector>,
}

impl TypologyTable {
    /// Vectors of one feature set must all have the same length.
    pub fn new(vectors: Vec<TypologicalVector>) -> Result<Self> {
        let mut dims: BTreeMap<FeatureSet, usize> = BTreeMap::new();
        let mut table = BTreeMap::new();
        for v in vectors {
            let dim = *dims.entry(v.feature_set).or_insert(v.values.len());
            if dim != v.values.len() {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: v.values.len(),
                });
            }
            let key = (v.feature_set, v.lang.clone());
            if table.contains_key(&key) {
                return Err(Error::DuplicateId(format!("{} {}", key.1, key.0)));
            }
            table.insert(key, v);
        }
        Ok(TypologyTable { vectors: table })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut vectors = Vec::new();
        for (line, text) in io::read_lines(path)? {
            let mut fields = text.split('\t');
            let (Some(lang), Some(set)) = (fields.next(), fields.next()) else {
                return Err(io::malformed(
                    path,
                    line,
                    "expected lang<TAB>feature_set<TAB>values",
                ));
            };
            let lang: LanguageCode = lang
                .trim()
                .parse()
                .map_err(|e: Error| io::malformed(path, line, e.to_string()))?;
            let set: FeatureSet = set
                .trim()
                .parse()
                .map_err(|e: Error| io::malformed(path, line, e.to_string()))?;
            let values = fields
                .map(|f| match f.trim() {
                    "" => Ok(None),
                    v => v
                        .parse::<f64>()
                        .map(Some)
                        .map_err(|_| io::malformed(path, line, format!("bad value {v:?}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            vectors.push(
                TypologicalVector::new(lang, set, values)
                    .map_err(|e| io::malformed(path, line, e.to_string()))?,
            );
        }
        TypologyTable::new(vectors)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for v in self.vectors.values() {
            let _ = write!(out, "{}\t{}", v.lang, v.feature_set);
            for x in &v.values {
                out.push('\t');
                if let Some(x) = x {
                    let _ = write!(out, "{x}");
                }
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn get(&self, lang: &LanguageCode, set: FeatureSet) -> Option<&TypologicalVector> {
        self.vectors.get(&(set, lang.clone()))
    }

    pub fn feature_sets(&self) -> Vec<FeatureSet> {
        let mut sets: Vec<FeatureSet> = self.vectors.keys().map(|(s, _)| *s).collect();
        sets.dedup();
        sets
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CorrelationOptions {
    /// Keep pairs whose query and document languages are the same.
    pub include_same_language: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub feature_set: FeatureSet,
    pub rho: f64,
    pub pairs_used: usize,
    /// Pairs whose similarity is undefined (empty shared support, zero norm).
    pub undefined: usize,
    /// Pairs with a language that has no vector in the table.
    pub missing_vector: usize,
    pub same_language_excluded: usize,
}

/// Spearman correlation between per-pair similarity and per-pair recall.
///
/// `recall` is keyed by pair label (`xx-yy`); other labels are rejected.
pub fn correlate_similarity_with_performance(
    recall: &BTreeMap<String, f64>,
    table: &TypologyTable,
    feature_set: FeatureSet,
    options: CorrelationOptions,
) -> Result<Correlation> {
    let mut sims = Vec::new();
    let mut values = Vec::new();
    let mut out = Correlation {
        feature_set,
        rho: 0.0,
        pairs_used: 0,
        undefined: 0,
        missing_vector: 0,
        same_language_excluded: 0,
    };
    for (label, &r) in recall {
        let pair: LanguagePair = label.parse()?;
        if pair.is_same_language() && !options.include_same_language {
            out.same_language_excluded += 1;
            continue;
        }
        let (Some(a), Some(b)) = (
            table.get(&pair.query_lang, feature_set),
            table.get(&pair.doc_lang, feature_set),
        ) else {
            out.missing_vector += 1;
            continue;
        };
        match typological_similarity(a, b)? {
            Some(s) => {
                sims.push(s);
                values.push(r);
            }
            None => out.undefined += 1,
        }
    }
    out.pairs_used = sims.len();
    if sims.len() < 3 {
        return Err(Error::Insufficient {
            what: format!("language pairs with defined {feature_set} similarity"),
            needed: 3,
            available: sims.len(),
        });
    }
    out.rho = spearman(&sims, &values)?;
    Ok(out)
}

/// One line of a correlation table: a model on a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub model: String,
    pub dataset: String,
    pub correlations: Vec<Correlation>,
}

/// Model × dataset rows with one rho column per feature set.
pub fn render_correlation_table(rows: &[CorrelationRow]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<20} {:<12}", "model", "dataset");
    for f in FeatureSet::ALL {
        let _ = write!(out, " {:>12}", f.name());
    }
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{:<20} {:<12}", row.model, row.dataset);
        for f in FeatureSet::ALL {
            match row.correlations.iter().find(|c| c.feature_set == f) {
                Some(c) => {
                    let _ = write!(out, " {:>12.3}", c.rho);
                }
                None => {
                    let _ = write!(out, " {:>12}", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}
