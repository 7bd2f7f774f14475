//! Cross-lingual retrieval experimentation engine.
//!
//! The modules follow the evaluation pipeline: [`corpus`] ingestion and
//! sampling, first-stage retrieval with [`lexical`] BM25, exact [`dense`]
//! search or the [`ann`] HNSW index, candidate handling for cross-encoder
//! re-ranking in [`rerank`], metrics in [`eval`], language-bias and
//! typology analyses in [`analysis`], and the exact-vs-approximate latency
//! protocol in [`bench`]. Neural inference happens outside the engine; it
//! only exchanges files with it.

pub mod analysis;
pub mod ann;
pub mod bench;
mod codec;
pub mod corpus;
pub mod dense;
mod error;
pub mod eval;
mod io;
pub mod lang;
pub mod lexical;
pub mod rerank;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{Hit, RunList};
pub use lang::{DatasetPreset, LanguageCode, LanguagePair, LanguageSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A generator for one named random stream derived from the run seed.
pub fn seeded_rng(seed: u64, stream: &str) -> ChaCha8Rng {
    use std::hash::Hasher;
    let mut h = fnv::FnvHasher::default();
    h.write(stream.as_bytes());
    ChaCha8Rng::seed_from_u64(seed ^ h.finish().rotate_left(17))
}
