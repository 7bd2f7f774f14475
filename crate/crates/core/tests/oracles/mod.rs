//! Brute-force reference implementations shared by integration and
//! acceptance tests. Written independently of the engine code paths.
#![allow(dead_code)]

use std::collections::HashMap;

use rand::RngExt;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal draws via Box-Muller.
pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// `n` rows of i.i.d. Gaussian entries, each scaled to unit length.
pub fn gaussian_unit_rows(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(n * dim);
    for _ in 0..n {
        let row: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        out.extend(row.iter().map(|x| (x / norm) as f32));
    }
    out
}

/// Dot product accumulated in f64, first component first.
pub fn dot64(a: &[f32], b: &[f32]) -> f64 {
    let mut s = 0.0f64;
    for i in 0..a.len() {
        s += a[i] as f64 * b[i] as f64;
    }
    s
}

/// Full sort of every document by (score desc, row asc), cut at `k`.
pub fn argsort_topk(docs: &[f32], dim: usize, query: &[f32], k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = docs
        .chunks(dim)
        .enumerate()
        .map(|(i, d)| (i, dot64(query, d)))
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

/// BM25 with k1, b and IDF `ln(1 + (N - df + 0.5) / (df + 0.5))`, computed
/// by scanning every document for every query token. Each query token
/// occurrence contributes. Zero scores are dropped; ties go to the lower row.
pub fn bm25_brute(docs: &[Vec<String>], query: &[String], k1: f64, b: f64) -> Vec<(usize, f64)> {
    let n = docs.len() as f64;
    let avgdl = docs.iter().map(|d| d.len()).sum::<usize>() as f64 / n;
    let mut scored = Vec::new();
    for (row, doc) in docs.iter().enumerate() {
        let dl = doc.len() as f64;
        let mut score = 0.0;
        for t in query {
            let tf = doc.iter().filter(|w| *w == t).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let df = docs.iter().filter(|d| d.contains(t)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * dl / avgdl));
        }
        if score > 0.0 {
            scored.push((row, score));
        }
    }
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored
}

/// Ranks by counting: 1 + #smaller + (#equal - 1) / 2.
pub fn count_ranks(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&x| {
            let smaller = xs.iter().filter(|&&y| y < x).count() as f64;
            let equal = xs.iter().filter(|&&y| y == x).count() as f64;
            1.0 + smaller + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn pearson_textbook(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    cov / (vx.sqrt() * vy.sqrt())
}

pub fn spearman_oracle(xs: &[f64], ys: &[f64]) -> f64 {
    pearson_textbook(&count_ranks(xs), &count_ranks(ys))
}

/// nDCG@k from grades listed in ranked order, with the ideal list built from
/// `all_grades` (every judged grade of the query).
pub fn ndcg_oracle(ranked_grades: &[u32], all_grades: &[u32], k: usize) -> f64 {
    let dcg = |gs: &[u32]| -> f64 {
        gs.iter()
            .take(k)
            .enumerate()
            .map(|(i, &g)| (2f64.powi(g as i32) - 1.0) / ((i + 2) as f64).log2())
            .sum()
    };
    let mut ideal = all_grades.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg(&ideal);
    if idcg == 0.0 {
        0.0
    } else {
        dcg(ranked_grades) / idcg
    }
}

pub fn recall_oracle(ranked_grades: &[u32], k: usize) -> f64 {
    if ranked_grades.iter().take(k).any(|&g| g > 0) {
        1.0
    } else {
        0.0
    }
}

/// Token counts per document, for hand-checking postings.
pub fn term_counts(tokens: &[String]) -> HashMap<&str, usize> {
    let mut m = HashMap::new();
    for t in tokens {
        *m.entry(t.as_str()).or_insert(0) += 1;
    }
    m
}
