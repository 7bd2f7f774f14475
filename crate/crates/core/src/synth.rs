//! Synthetic bilingual collections with disjoint scripts.
//!
//! Every concept has a Latin-script `en` word and a Cyrillic `ru` word
//! (a letter-by-letter transliteration), so the two languages share no
//! surface tokens. Queries are drawn from the concepts of their gold
//! document and written in the query language. The lexicon maps each `ru`
//! word to its `en` word and can be fed to the toy embedder as aliases.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, Qrels, Query, QuerySet};
use crate::error::{Error, Result};
use crate::lang::{LanguageCode, LanguagePair};

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

fn cyrillic(c: char) -> char {
    match c {
        'a' => 'а',
        'b' => 'б',
        'd' => 'д',
        'e' => 'е',
        'f' => 'ф',
        'g' => 'г',
        'i' => 'и',
        'k' => 'к',
        'l' => 'л',
        'm' => 'м',
        'n' => 'н',
        'o' => 'о',
        'p' => 'п',
        'r' => 'р',
        's' => 'с',
        't' => 'т',
        'u' => 'у',
        'v' => 'в',
        'z' => 'з',
        other => other,
    }
}

pub fn transliterate(word: &str) -> String {
    word.chars().map(cyrillic).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub docs_per_language: usize,
    pub queries_per_pair: usize,
    pub vocabulary: usize,
    pub doc_length: usize,
    pub query_length: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            docs_per_language: 300,
            queries_per_pair: 40,
            vocabulary: 2000,
            doc_length: 30,
            query_length: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthFixture {
    pub corpus: Corpus,
    pub queries: QuerySet,
    pub qrels: Qrels,
    /// `(ru word, en word)` for every concept.
    pub lexicon: Vec<(String, String)>,
}

fn vocabulary(rng: &mut impl Rng, n: usize) -> Vec<String> {
    let mut seen = HashSet::with_capacity(n);
    let mut words = Vec::with_capacity(n);
    while words.len() < n {
        let syllables = rng.random_range(2..=4);
        let mut w = String::with_capacity(syllables * 2);
        for _ in 0..syllables {
            w.push(CONSONANTS[rng.random_range(0..CONSONANTS.len())] as char);
            w.push(VOWELS[rng.random_range(0..VOWELS.len())] as char);
        }
        if seen.insert(w.clone()) {
            words.push(w);
        }
    }
    words
}

fn render(concepts: &[usize], words: &[String]) -> String {
    let mut s = String::new();
    for (i, &c) in concepts.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(&words[c]);
    }
    s
}

/// Builds a two-language fixture covering the pairs en-en, en-ru, ru-en and
/// ru-ru. Each query has exactly one relevant document.
pub fn bilingual_fixture(config: &SynthConfig) -> Result<SynthFixture> {
    if config.doc_length < config.query_length || config.query_length == 0 {
        return Err(Error::invalid("query length must be in 1..=doc length"));
    }
    if config.vocabulary < config.doc_length || config.docs_per_language < config.queries_per_pair {
        return Err(Error::invalid("vocabulary and document count are too small"));
    }
    let mut rng = crate::seeded_rng(config.seed, "synth");
    let en_words = vocabulary(&mut rng, config.vocabulary);
    let ru_words: Vec<String> = en_words.iter().map(|w| transliterate(w)).collect();
    let en = LanguageCode::new("en")?;
    let ru = LanguageCode::new("ru")?;

    let mut docs = Vec::new();
    let mut doc_concepts = Vec::new();
    for lang in [&en, &ru] {
        let words = if *lang == en { &en_words } else { &ru_words };
        for i in 0..config.docs_per_language {
            let concepts: Vec<usize> =
                rand::seq::index::sample(&mut rng, config.vocabulary, config.doc_length).into_vec();
            docs.push(Document {
                doc_id: format!("{lang}-d{i:05}"),
                lang: lang.clone(),
                text: render(&concepts, words),
                translated_text: Some(render(&concepts, &en_words)),
            });
            doc_concepts.push(concepts);
        }
    }

    let mut queries = Vec::new();
    let mut triples = Vec::new();
    for (qi, q_lang) in [&en, &ru].into_iter().enumerate() {
        for (di, d_lang) in [&en, &ru].into_iter().enumerate() {
            let pair = LanguagePair::new(q_lang.clone(), d_lang.clone());
            let words = if qi == 0 { &en_words } else { &ru_words };
            let golds = rand::seq::index::sample(&mut rng, config.docs_per_language, config.queries_per_pair);
            for (n, g) in golds.into_iter().enumerate() {
                let row = di * config.docs_per_language + g;
                let picks = rand::seq::index::sample(&mut rng, config.doc_length, config.query_length);
                let concepts: Vec<usize> = picks.into_iter().map(|p| doc_concepts[row][p]).collect();
                let query_id = format!("{pair}-q{n:04}");
                queries.push(Query {
                    query_id: query_id.clone(),
                    lang: q_lang.clone(),
                    text: render(&concepts, words),
                });
                triples.push((query_id, docs[row].doc_id.clone(), 1));
            }
        }
    }

    Ok(SynthFixture {
        corpus: Corpus::new(docs)?,
        queries: QuerySet::new(queries)?,
        qrels: Qrels::from_triples(triples)?,
        lexicon: ru_words.into_iter().zip(en_words).collect(),
    })
}

impl SynthFixture {
    /// Writes `corpus.jsonl`, `queries.jsonl`, `qrels.txt` and `lexicon.tsv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.corpus.write(&dir.join("corpus.jsonl"))?;
        self.queries.write(&dir.join("queries.jsonl"))?;
        self.qrels.write(&dir.join("qrels.txt"))?;
        let mut lex = String::new();
        for (ru, en) in &self.lexicon {
            let _ = writeln!(lex, "{ru}\t{en}");
        }
        let path = dir.join("lexicon.tsv");
        std::fs::write(&path, lex).map_err(|e| Error::io(&path, e))
    }

    pub fn pairs(&self) -> BTreeSet<LanguagePair> {
        self.queries
            .queries()
            .iter()
            .map(|q| {
                q.query_id
                    .split_once("-q")
                    .expect("synthetic id")
                    .0
                    .parse()
                    .expect("pair label")
            })
            .collect()
    }
}
