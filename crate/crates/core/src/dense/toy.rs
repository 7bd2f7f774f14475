//! Hashed bag-of-words embedder used when no neural encoder is available.
//!
//! Every token is hashed (with the seed) into two signed buckets; the bucket
//! vector is L2-normalized. An alias table can map tokens of different
//! languages onto one key, which places known translation pairs in a shared
//! space without giving them any surface overlap.

use std::collections::HashMap;
use std::hash::Hasher;
use std::path::Path;

use fnv::FnvHasher;

use super::{normalize, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::io;
use crate::lexical::tokenize;

const MIN_DIM: usize = 8;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn hash_key(seed: u64, key: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(&seed.to_le_bytes());
    h.write(key.as_bytes());
    mix(h.finish())
}

#[derive(Debug, Clone)]
pub struct ToyEmbedder {
    dim: usize,
    seed: u64,
    aliases: HashMap<String, String>,
}

impl ToyEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim < MIN_DIM {
            return Err(Error::invalid(format!(
                "toy embedding dim must be >= {MIN_DIM}, got {dim}"
            )));
        }
        Ok(ToyEmbedder {
            dim,
            seed,
            aliases: HashMap::new(),
        })
    }

    /// Maps `token` onto the hash key of `canonical`.
    pub fn with_alias(mut self, token: &str, canonical: &str) -> Self {
        self.aliases
            .insert(normalize_token(token), normalize_token(canonical));
        self
    }

    pub fn with_aliases<'a>(mut self, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        for (t, c) in pairs {
            self = self.with_alias(t, c);
        }
        self
    }

    /// Reads a lexicon: one `token<TAB>canonical` pair per line.
    pub fn with_lexicon_file(mut self, path: &Path) -> Result<Self> {
        for (line, text) in io::read_lines(path)? {
            let (token, canonical) = text
                .split_once('\t')
                .ok_or_else(|| io::malformed(path, line, "expected token<TAB>canonical"))?;
            self = self.with_alias(token.trim(), canonical.trim());
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn embed(&self, text: &str) -> Vec<f32> {
        let mut v = vec![0.0f32; self.dim];
        for token in tokenize(text) {
            let key = self.aliases.get(&token).unwrap_or(&token);
            let h1 = hash_key(self.seed, key);
            let h2 = mix(h1 ^ 0x9e37_79b9_7f4a_7c15);
            for h in [h1, h2] {
                let bucket = (h % self.dim as u64) as usize;
                v[bucket] += if h >> 63 == 0 { 1.0 } else { -1.0 };
            }
        }
        if normalize(&mut v).is_none() {
            v.iter_mut().for_each(|x| *x = 0.0);
            let bucket = (hash_key(self.seed, "\u{0}empty") % self.dim as u64) as usize;
            v[bucket] = 1.0;
        }
        v
    }

    pub fn embed_all<S: AsRef<str>>(&self, texts: &[S]) -> EmbeddingMatrix {
        let mut data = Vec::with_capacity(texts.len() * self.dim);
        for t in texts {
            data.extend(self.embed(t.as_ref()));
        }
        EmbeddingMatrix::new(data, self.dim).expect("toy rows are unit-norm")
    }
}

fn normalize_token(token: &str) -> String {
    tokenize(token).concat()
}

/// Embeds `texts` with a fresh alias-free [`ToyEmbedder`].
pub fn toy_embed<S: AsRef<str>>(texts: &[S], dim: usize, seed: u64) -> Result<EmbeddingMatrix> {
    Ok(ToyEmbedder::new(dim, seed)?.embed_all(texts))
}
