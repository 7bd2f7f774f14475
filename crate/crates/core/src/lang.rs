//! Language codes, query/document language pairs and dataset presets.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every ISO 639-1 code used across the supported datasets.
pub const KNOWN_LANGUAGES: [&str; 27] = [
    "ar", "ca", "cs", "de", "en", "es", "fi", "fr", "hi", "id", "it", "ja", "ko", "nl", "nn", "no", "pl",
    "pt", "ro", "ru", "sv", "sw", "tl", "tr", "uk", "vi", "zh",
];

const CLIRMATRIX_LANGUAGES: [&str; 8] = ["ar", "de", "en", "es", "fr", "ja", "ru", "zh"];

const MMARCO_LANGUAGES: [&str; 14] = [
    "ar", "de", "en", "es", "fr", "hi", "id", "it", "ja", "nl", "pt", "ru", "vi", "zh",
];

const LARGE_SCALE_LANGUAGES: [&str; 25] = [
    "ar", "ca", "cs", "de", "en", "es", "fi", "fr", "it", "ja", "ko", "nl", "nn", "no", "pl", "pt", "ro",
    "ru", "sv", "sw", "tl", "tr", "uk", "vi", "zh",
];

/// A two-letter lowercase ISO 639-1 code.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LanguageCode(String);

impl LanguageCode {
    pub fn new(code: &str) -> Result<Self> {
        if code.len() == 2 && code.bytes().all(|b| b.is_ascii_lowercase()) {
            Ok(LanguageCode(code.to_owned()))
        } else {
            Err(Error::UnknownLanguage(code.to_owned()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for LanguageCode {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        LanguageCode::new(&value)
    }
}

impl From<LanguageCode> for String {
    fn from(code: LanguageCode) -> String {
        code.0
    }
}

impl FromStr for LanguageCode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LanguageCode::new(s)
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for LanguageCode {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Query language → document language.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LanguagePair {
    pub query_lang: LanguageCode,
    pub doc_lang: LanguageCode,
}

impl LanguagePair {
    pub fn new(query_lang: LanguageCode, doc_lang: LanguageCode) -> Self {
        LanguagePair { query_lang, doc_lang }
    }

    pub fn is_same_language(&self) -> bool {
        self.query_lang == self.doc_lang
    }
}

impl fmt::Display for LanguagePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.query_lang, self.doc_lang)
    }
}

impl FromStr for LanguagePair {
    type Err = Error;

    /// Parses `"en-zh"`.
    fn from_str(s: &str) -> Result<Self> {
        let (q, d) = s
            .split_once('-')
            .ok_or_else(|| Error::invalid(format!("language pair {s:?} is not of the form xx-yy")))?;
        Ok(LanguagePair::new(q.parse()?, d.parse()?))
    }
}

/// The set of languages a corpus may use.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageSet(BTreeSet<LanguageCode>);

impl LanguageSet {
    pub fn new<I, S>(codes: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        codes
            .into_iter()
            .map(|c| LanguageCode::new(c.as_ref()))
            .collect::<Result<BTreeSet<_>>>()
            .map(LanguageSet)
    }

    /// All languages of all dataset presets.
    pub fn known() -> Self {
        Self::new(KNOWN_LANGUAGES).expect("static codes are valid")
    }

    pub fn contains(&self, code: &LanguageCode) -> bool {
        self.0.contains(code)
    }

    /// Validates a raw code against the set.
    pub fn resolve(&self, raw: &str) -> Result<LanguageCode> {
        let code = LanguageCode::new(raw)?;
        if self.contains(&code) {
            Ok(code)
        } else {
            Err(Error::UnknownLanguage(raw.to_owned()))
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &LanguageCode> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The three benchmark collections the engine has presets for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetPreset {
    ClirMatrix,
    Mmarco,
    LargeScale,
}

impl DatasetPreset {
    pub const ALL: [DatasetPreset; 3] = [
        DatasetPreset::ClirMatrix,
        DatasetPreset::Mmarco,
        DatasetPreset::LargeScale,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatasetPreset::ClirMatrix => "clirmatrix",
            DatasetPreset::Mmarco => "mmarco",
            DatasetPreset::LargeScale => "large-scale",
        }
    }

    pub fn languages(self) -> LanguageSet {
        let codes: &[&str] = match self {
            DatasetPreset::ClirMatrix => &CLIRMATRIX_LANGUAGES,
            DatasetPreset::Mmarco => &MMARCO_LANGUAGES,
            DatasetPreset::LargeScale => &LARGE_SCALE_LANGUAGES,
        };
        LanguageSet::new(codes).expect("static codes are valid")
    }

    /// Number of evaluated language pairs, used to scale normalized latencies.
    pub fn pair_count(self) -> usize {
        match self {
            DatasetPreset::ClirMatrix => 56,
            DatasetPreset::Mmarco => 196,
            DatasetPreset::LargeScale => 26,
        }
    }

    /// Queries sampled per language pair.
    pub fn queries_per_pair(self) -> usize {
        match self {
            DatasetPreset::Mmarco => 531,
            _ => 1000,
        }
    }
}

impl FromStr for DatasetPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "clirmatrix" => Ok(DatasetPreset::ClirMatrix),
            "mmarco" => Ok(DatasetPreset::Mmarco),
            "large-scale" | "largescale" | "large_scale" => Ok(DatasetPreset::LargeScale),
            other => Err(Error::invalid(format!("unknown dataset preset {other:?}"))),
        }
    }
}

impl fmt::Display for DatasetPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_must_be_two_lowercase_letters() {
        assert!(LanguageCode::new("en").is_ok());
        assert!(LanguageCode::new("EN").is_err());
        assert!(LanguageCode::new("eng").is_err());
        assert!(LanguageCode::new("").is_err());
    }

    #[test]
    fn pair_round_trips_through_display() {
        let pair: LanguagePair = "ja-en".parse().unwrap();
        assert_eq!(pair.to_string(), "ja-en");
        assert!(!pair.is_same_language());
    }

    #[test]
    fn preset_pair_counts() {
        // all ordered pairs excluding same-language ones
        let n = DatasetPreset::ClirMatrix.languages().len();
        assert_eq!(n * (n - 1), DatasetPreset::ClirMatrix.pair_count());
        // all ordered pairs including same-language ones
        let n = DatasetPreset::Mmarco.languages().len();
        assert_eq!(n * n, DatasetPreset::Mmarco.pair_count());
        assert_eq!(DatasetPreset::LargeScale.pair_count(), 26);
    }

    #[test]
    fn resolve_rejects_codes_outside_the_set() {
        let set = DatasetPreset::ClirMatrix.languages();
        assert!(set.resolve("de").is_ok());
        assert!(matches!(set.resolve("ko"), Err(Error::UnknownLanguage(c)) if c == "ko"));
    }
}
