//! Pipeline configuration: a single JSON document with per-module
//! sections. CLI flags override config fields; environment variables
//! override secrets only.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chunk::ChunkingConfig;
use crate::error::{Error, Result};
use crate::remote::{EndpointConfig, FieldMap, EMBED_KEY_ENV, LLM_KEY_ENV};
use crate::retrieval::RetrievalConfig;

/// Artifact locations. `vocab_file`/`cues_file` default to the data files
/// built into the binary when unset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub corpus_dir: PathBuf,
    pub vocab_file: Option<PathBuf>,
    pub cues_file: Option<PathBuf>,
    pub records_file: PathBuf,
    pub graph_file: PathBuf,
    pub index_file: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            corpus_dir: PathBuf::from("corpus"),
            vocab_file: None,
            cues_file: None,
            records_file: PathBuf::from("build/records.jsonl"),
            graph_file: PathBuf::from("build/graph.json"),
            index_file: PathBuf::from("build/index.bin"),
        }
    }
}

/// Which embedder backs the index and queries.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbedderConfig {
    #[default]
    Builtin,
    Remote {
        endpoint: EndpointConfig,
        #[serde(default = "default_remote_dim")]
        dim: usize,
    },
}

fn default_remote_dim() -> usize {
    crate::embed::EMBED_DIM
}

/// Generation endpoint settings for the LLM answer path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub endpoint: EndpointConfig,
    #[serde(default)]
    pub fields: FieldMap,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

fn default_temperature() -> f64 {
    0.1
}

fn default_max_tokens() -> u32 {
    400
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub chunking: ChunkingConfig,
    pub retrieval: RetrievalConfig,
    pub embedder: EmbedderConfig,
    pub generation: Option<GenerationConfig>,
    pub log_level: Option<String>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: PipelineConfig = serde_json::from_str(&raw).map_err(|e| {
            Error::parse(
                path,
                Some(format!("line {}, column {}", e.line(), e.column())),
                e.to_string(),
            )
        })?;
        config.wire_env_keys();
        config.validate()?;
        Ok(config)
    }

    /// Attach the fixed env-var names to endpoint sections (secrets never
    /// come from the config file itself).
    fn wire_env_keys(&mut self) {
        if let EmbedderConfig::Remote { endpoint, .. } = &mut self.embedder {
            endpoint.key_env = EMBED_KEY_ENV;
        }
        if let Some(generation) = &mut self.generation {
            generation.endpoint.key_env = LLM_KEY_ENV;
        }
    }

    /// Check every numeric field against its module invariants.
    pub fn validate(&self) -> Result<()> {
        self.chunking.validate()?;
        self.retrieval.validate()?;
        if let Some(generation) = &self.generation {
            if !(0.0..=1.0).contains(&generation.temperature) {
                return Err(Error::config(
                    "generation.temperature",
                    "must be in [0, 1]",
                ));
            }
        }
        if let EmbedderConfig::Remote { dim, .. } = &self.embedder {
            if *dim == 0 {
                return Err(Error::config("embedder.dim", "must be >= 1"));
            }
        }
        Ok(())
    }
}
