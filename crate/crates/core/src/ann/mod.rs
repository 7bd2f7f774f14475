//! Hierarchical navigable small world graph over unit-norm embeddings.
//!
//! Construction follows the incremental algorithm of Malkov & Yashunin with
//! the simple neighbor selection (keep the most similar). Nodes get level
//! `floor(−ln(u)·mL)` from a generator seeded with the build seed. Layer 0
//! allows `2M` links per node, upper layers `M`; a new node links to as many
//! neighbors as its layer allows.
//!
//! Candidates are ordered by similarity (the dot product of unit vectors),
//! which ranks exactly like cosine distance; reported scores are
//! `1 − cosine distance`, i.e. the dot product itself, so they agree
//! bit-for-bit with [`crate::dense::ExactSearcher`].

mod file;

pub use file::HNSW_FORMAT_VERSION;

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};

use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::{dot, EmbeddingMatrix, IdMap};
use crate::error::{Error, Result};
use crate::eval::{Hit, RunList};

const MAX_LEVEL: usize = 32;

/// Beam width used when none is configured: `max(50, 2·k)`.
pub fn default_ef(k: usize) -> usize {
    50.max(2 * k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HnswParams {
    pub m: usize,
    pub ef_construction: usize,
    /// Fixed search beam; `None` means [`default_ef`] of the requested k.
    pub ef_search: Option<usize>,
    pub level_multiplier: f64,
}

impl Default for HnswParams {
    fn default() -> Self {
        HnswParams::with_m(16, 200)
    }
}

impl HnswParams {
    pub fn with_m(m: usize, ef_construction: usize) -> Self {
        HnswParams {
            m,
            ef_construction,
            ef_search: None,
            level_multiplier: 1.0 / (m as f64).ln(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::invalid("M must be at least 2"));
        }
        if self.ef_construction < 1 {
            return Err(Error::invalid("ef_construction must be at least 1"));
        }
        if !(self.level_multiplier.is_finite() && self.level_multiplier > 0.0) {
            return Err(Error::invalid("level multiplier must be positive"));
        }
        Ok(())
    }

    pub fn max_degree(&self, layer: usize) -> usize {
        if layer == 0 {
            2 * self.m
        } else {
            self.m
        }
    }

    pub fn ef_for(&self, k: usize) -> usize {
        self.ef_search.unwrap_or_else(|| default_ef(k))
    }
}

/// A node under consideration. Greater = more similar; ties go to the
/// lower node id.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Cand {
    sim: f64,
    node: u32,
}

impl Eq for Cand {}

impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sim
            .total_cmp(&other.sim)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HnswIndex {
    params: HnswParams,
    seed: u64,
    model: String,
    vectors: EmbeddingMatrix,
    ids: IdMap,
    /// `links[node][layer]`, present for layers `0..=level(node)`.
    links: Vec<Vec<Vec<u32>>>,
    entry: u32,
    max_level: usize,
}

impl HnswIndex {
    pub fn build(docs: &EmbeddingMatrix, ids: &IdMap, params: HnswParams, seed: u64) -> Result<Self> {
        params.validate()?;
        if docs.is_empty() {
            return Err(Error::Empty("document matrix".into()));
        }
        if docs.count() != ids.len() {
            return Err(Error::CountMismatch {
                what: "document rows vs ids".into(),
                left: docs.count(),
                right: ids.len(),
            });
        }
        let mut rng = crate::seeded_rng(seed, "hnsw-levels");
        let levels: Vec<usize> = (0..docs.count())
            .map(|_| {
                let u: f64 = 1.0 - rng.random::<f64>();
                ((-u.ln() * params.level_multiplier).floor() as usize).min(MAX_LEVEL)
            })
            .collect();

        let mut index = HnswIndex {
            params,
            seed,
            model: String::new(),
            vectors: docs.clone(),
            ids: ids.clone(),
            links: levels.iter().map(|&l| vec![Vec::new(); l + 1]).collect(),
            entry: 0,
            max_level: levels[0],
        };
        let mut visited = Visited::new(docs.count());
        for (node, &level) in levels.iter().enumerate().skip(1) {
            index.insert(node as u32, level, &mut visited);
        }
        index.repair_reachability(&mut visited);
        Ok(index)
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = model.into();
        self
    }

    fn sim(&self, query: &[f32], node: u32) -> f64 {
        dot(query, self.vectors.row(node as usize))
    }

    fn insert(&mut self, node: u32, level: usize, visited: &mut Visited) {
        let query = self.vectors.row(node as usize).to_vec();
        let mut ep = Cand {
            sim: self.sim(&query, self.entry),
            node: self.entry,
        };
        for layer in (level + 1..=self.max_level).rev() {
            ep = self.greedy(&query, ep, layer);
        }
        let mut eps = vec![ep];
        for layer in (0..=level.min(self.max_level)).rev() {
            let found = self.search_layer(&query, &eps, self.params.ef_construction, layer, visited);
            let chosen: Vec<u32> = found
                .iter()
                .take(self.params.max_degree(layer))
                .map(|c| c.node)
                .collect();
            for &nb in &chosen {
                self.connect(nb, node, layer);
            }
            self.links[node as usize][layer] = chosen;
            eps = found;
        }
        if level > self.max_level {
            self.max_level = level;
            self.entry = node;
        }
    }

    /// Adds `to` to `from`'s list at `layer`, keeping the most similar links
    /// if the degree bound is exceeded.
    fn connect(&mut self, from: u32, to: u32, layer: usize) {
        let limit = self.params.max_degree(layer);
        let base = self.vectors.row(from as usize);
        let list = &mut self.links[from as usize][layer];
        list.push(to);
        if list.len() > limit {
            let mut scored: Vec<Cand> = list
                .iter()
                .map(|&n| Cand {
                    sim: dot(base, self.vectors.row(n as usize)),
                    node: n,
                })
                .collect();
            scored.sort_unstable_by(|a, b| b.cmp(a));
            scored.truncate(limit);
            *list = scored.into_iter().map(|c| c.node).collect();
        }
    }

    fn greedy(&self, query: &[f32], mut best: Cand, layer: usize) -> Cand {
        loop {
            let mut improved = false;
            for &nb in &self.links[best.node as usize][layer] {
                let c = Cand {
                    sim: self.sim(query, nb),
                    node: nb,
                };
                if c > best {
                    best = c;
                    improved = true;
                }
            }
            if !improved {
                return best;
            }
        }
    }

    /// Beam search on one layer; returns up to `ef` nodes, best first.
    fn search_layer(
        &self,
        query: &[f32],
        entry_points: &[Cand],
        ef: usize,
        layer: usize,
        visited: &mut Visited,
    ) -> Vec<Cand> {
        visited.reset();
        let mut candidates: BinaryHeap<Cand> = BinaryHeap::new();
        let mut results: BinaryHeap<Reverse<Cand>> = BinaryHeap::new();
        for &ep in entry_points {
            if visited.insert(ep.node) {
                candidates.push(ep);
                results.push(Reverse(ep));
                if results.len() > ef {
                    results.pop();
                }
            }
        }
        while let Some(c) = candidates.pop() {
            let worst = results.peek().expect("results non-empty").0;
            if c < worst {
                break;
            }
            for &nb in &self.links[c.node as usize][layer] {
                if !visited.insert(nb) {
                    continue;
                }
                let cand = Cand {
                    sim: self.sim(query, nb),
                    node: nb,
                };
                let worst = results.peek().expect("results non-empty").0;
                if results.len() < ef || cand > worst {
                    candidates.push(cand);
                    results.push(Reverse(cand));
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }
        let mut out: Vec<Cand> = results.into_iter().map(|r| r.0).collect();
        out.sort_unstable_by(|a, b| b.cmp(a));
        out
    }

    /// Links every layer-0 node that pruning left unreachable from the entry
    /// point to its most similar reachable node with spare degree.
    /// Gives up after `len()` passes; only a graph where every reachable node
    /// is at full degree could need more.
    fn repair_reachability(&mut self, visited: &mut Visited) {
        let limit = self.params.max_degree(0);
        for _ in 0..self.len() {
            let reachable = self.reachable_at(0);
            let Some(orphan) = (0..self.len()).find(|&n| !reachable[n]) else {
                return;
            };
            let query = self.vectors.row(orphan).to_vec();
            let entry = Cand {
                sim: self.sim(&query, self.entry),
                node: self.entry,
            };
            let found = self.search_layer(&query, &[entry], self.params.ef_construction, 0, visited);
            let has_room = |idx: &Self, n: u32| idx.links[n as usize][0].len() < limit;
            let spare = found
                .iter()
                .map(|c| c.node)
                .find(|&n| has_room(self, n))
                .or_else(|| {
                    (0..self.len() as u32)
                        .filter(|&n| reachable[n as usize] && has_room(self, n))
                        .max_by_key(|&n| Cand {
                            sim: self.sim(&query, n),
                            node: n,
                        })
                });
            if let Some(host) = spare {
                self.links[host as usize][0].push(orphan as u32);
                continue;
            }
            // Every reachable node is full. The closest one trades its last
            // link `v` for the orphan and the orphan links on to `v`, so every
            // node reachable before stays reachable.
            let host = found[0].node as usize;
            let v = self.links[host][0].pop().expect("full list is non-empty");
            self.links[host][0].push(orphan as u32);
            let own = &mut self.links[orphan][0];
            if !own.contains(&v) {
                if own.len() >= limit {
                    own.pop();
                }
                own.push(v);
            }
        }
    }

    /// Nodes reachable from the entry point along `layer` links.
    pub fn reachable_at(&self, layer: usize) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::from([self.entry]);
        seen[self.entry as usize] = true;
        while let Some(n) = queue.pop_front() {
            for &nb in &self.links[n as usize][layer] {
                if !seen[nb as usize] {
                    seen[nb as usize] = true;
                    queue.push_back(nb);
                }
            }
        }
        if layer > 0 {
            for (n, s) in seen.iter_mut().enumerate() {
                *s &= self.level(n) >= layer;
            }
        }
        seen
    }

    /// Top-`k` documents by similarity using a beam of width `ef`.
    pub fn search(&self, query: &[f32], k: usize, ef: usize) -> Result<Vec<Hit>> {
        if query.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: query.len(),
            });
        }
        if ef < k {
            return Err(Error::invalid(format!("ef ({ef}) must be at least k ({k})")));
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut ep = Cand {
            sim: self.sim(query, self.entry),
            node: self.entry,
        };
        for layer in (1..=self.max_level).rev() {
            ep = self.greedy(query, ep, layer);
        }
        let mut visited = Visited::new(self.len());
        let found = self.search_layer(query, &[ep], ef, 0, &mut visited);
        Ok(found
            .into_iter()
            .take(k)
            .map(|c| Hit::new(self.ids.id(c.node as usize), c.sim))
            .collect())
    }

    /// Searches with the configured or default beam width.
    pub fn search_default(&self, query: &[f32], k: usize) -> Result<Vec<Hit>> {
        self.search(query, k, self.params.ef_for(k))
    }

    pub fn search_batch(
        &self,
        queries: &EmbeddingMatrix,
        query_ids: &IdMap,
        k: usize,
        ef: Option<usize>,
        tag: &str,
    ) -> Result<RunList> {
        if queries.count() != query_ids.len() {
            return Err(Error::CountMismatch {
                what: "query rows vs ids".into(),
                left: queries.count(),
                right: query_ids.len(),
            });
        }
        let ef = ef.unwrap_or_else(|| self.params.ef_for(k));
        let lists: Vec<Vec<Hit>> = (0..queries.count())
            .into_par_iter()
            .map(|q| self.search(queries.row(q), k, ef))
            .collect::<Result<_>>()?;
        let mut run = RunList::new(tag);
        for (q, hits) in lists.into_iter().enumerate() {
            run.insert(query_ids.id(q), hits)?;
        }
        Ok(run)
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }

    pub fn params(&self) -> &HnswParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn ids(&self) -> &IdMap {
        &self.ids
    }

    pub fn entry_point(&self) -> usize {
        self.entry as usize
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    pub fn level(&self, node: usize) -> usize {
        self.links[node].len() - 1
    }

    pub fn neighbors(&self, node: usize, layer: usize) -> &[u32] {
        self.links[node].get(layer).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Checks degree bounds, layer membership of every link, and that the
    /// entry point sits on the top layer.
    pub fn check_invariants(&self) -> Result<()> {
        if self.level(self.entry as usize) != self.max_level {
            return Err(Error::invalid("entry point is not on the top layer"));
        }
        for (node, layers) in self.links.iter().enumerate() {
            for (layer, list) in layers.iter().enumerate() {
                if list.len() > self.params.max_degree(layer) {
                    return Err(Error::invalid(format!(
                        "node {node} has {} links at layer {layer}",
                        list.len()
                    )));
                }
                let mut sorted = list.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != list.len() {
                    return Err(Error::invalid(format!("node {node} has duplicate links")));
                }
                for &nb in list {
                    let nb = nb as usize;
                    if nb == node || nb >= self.len() || self.level(nb) < layer {
                        return Err(Error::invalid(format!(
                            "node {node} links to {nb} which is not on layer {layer}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Generation-stamped visited set, reusable across searches.
struct Visited {
    marks: Vec<u32>,
    epoch: u32,
}

impl Visited {
    fn new(n: usize) -> Self {
        Visited {
            marks: vec![0; n],
            epoch: 0,
        }
    }

    fn reset(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.marks.iter_mut().for_each(|m| *m = 0);
            self.epoch = 1;
        }
    }

    /// True if `node` was not yet visited.
    fn insert(&mut self, node: u32) -> bool {
        let slot = &mut self.marks[node as usize];
        if *slot == self.epoch {
            false
        } else {
            *slot = self.epoch;
            true
        }
    }
}
