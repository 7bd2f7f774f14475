//! Run configuration: a TOML file whose values are overridden by flags.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clir_core::ann::HnswParams;
use clir_core::lexical::{Bm25Params, Field};
use serde::Deserialize;

use crate::Usage;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<String>,
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub field: Option<Field>,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub bm25: Bm25Section,
    #[serde(default)]
    pub hnsw: HnswSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub qrels: Option<PathBuf>,
    pub doc_embeddings: Option<PathBuf>,
    pub doc_ids: Option<PathBuf>,
    pub query_embeddings: Option<PathBuf>,
    pub query_ids: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub typology: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bm25Section {
    pub k1: Option<f64>,
    pub b: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HnswSection {
    pub m: Option<usize>,
    pub ef_construction: Option<usize>,
    pub ef_search: Option<usize>,
}

impl RunConfig {
    /// Relative paths inside the file resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let p = &mut cfg.paths;
        for slot in [
            &mut p.corpus,
            &mut p.queries,
            &mut p.qrels,
            &mut p.doc_embeddings,
            &mut p.doc_ids,
            &mut p.query_embeddings,
            &mut p.query_ids,
            &mut p.lexicon,
            &mut p.typology,
        ] {
            if let Some(rel) = slot.as_mut() {
                if rel.is_relative() {
                    *rel = base.join(&*rel);
                }
            }
        }
        Ok(cfg)
    }

    pub fn seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(0)
    }

    pub fn k(&self, flag: Option<usize>) -> Result<usize> {
        let k = flag.or(self.k).unwrap_or(clir_core::corpus::DEFAULT_DEPTH);
        if k == 0 {
            return Err(Usage("k must be at least 1".into()).into());
        }
        Ok(k)
    }

    pub fn field(&self, flag: Option<Field>) -> Field {
        flag.or(self.field).unwrap_or_default()
    }

    pub fn dataset(&self, flag: Option<String>) -> String {
        flag.or_else(|| self.dataset.clone())
            .unwrap_or_else(|| "unnamed".into())
    }

    pub fn bm25(&self, k1: Option<f64>, b: Option<f64>) -> Result<Bm25Params> {
        let d = Bm25Params::default();
        Ok(Bm25Params::new(
            k1.or(self.bm25.k1).unwrap_or(d.k1),
            b.or(self.bm25.b).unwrap_or(d.b),
        )?)
    }

    pub fn hnsw(&self, m: Option<usize>, efc: Option<usize>, ef: Option<usize>) -> Result<HnswParams> {
        let d = HnswParams::default();
        let mut p = HnswParams::with_m(
            m.or(self.hnsw.m).unwrap_or(d.m),
            efc.or(self.hnsw.ef_construction).unwrap_or(d.ef_construction),
        );
        p.ef_search = ef.or(self.hnsw.ef_search);
        p.validate()?;
        Ok(p)
    }
}

/// An input path taken from the flag, else from the config. It must exist.
pub fn input(flag: Option<PathBuf>, configured: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    let path = flag.or_else(|| configured.clone()).ok_or_else(|| {
        Usage(format!(
            "--{name} is required (flag or config paths.{})",
            name.replace('-', "_")
        ))
    })?;
    if !path.exists() {
        return Err(clir_core::Error::Io {
            path: path.clone(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "input file does not exist"),
        }
        .into());
    }
    Ok(path)
}

pub fn optional_input(
    flag: Option<PathBuf>,
    configured: &Option<PathBuf>,
    name: &str,
) -> Result<Option<PathBuf>> {
    if flag.is_none() && configured.is_none() {
        return Ok(None);
    }
    input(flag, configured, name).map(Some)
}
