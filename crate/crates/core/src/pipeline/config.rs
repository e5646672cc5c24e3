use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::GbtConfig;
use crate::features::FeatureConfig;
use crate::selector::check_threshold;
use crate::similarity::{Bm25Params, CdssmTrainConfig};
use crate::snippet::{DEFAULT_COLS, DEFAULT_ROWS};
use crate::{Error, Result};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TmConfig {
    pub iterations: usize,
    /// Weight of the translation component against the background model.
    pub beta: f64,
}

impl Default for TmConfig {
    fn default() -> Self {
        TmConfig {
            iterations: 20,
            beta: 0.8,
        }
    }
}

/// Keeps a query for training and evaluation only when a table of one of its
/// top `top_docs` documents covers more than `min_fraction` of its cleaned
/// page.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusFilter {
    pub enabled: bool,
    pub top_docs: usize,
    pub min_fraction: f64,
}

impl Default for CorpusFilter {
    fn default() -> Self {
        CorpusFilter {
            enabled: true,
            top_docs: 3,
            min_fraction: 0.40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub features: FeatureConfig,
    pub bm25: Bm25Params,
    pub tm: TmConfig,
    pub cdssm: CdssmTrainConfig,
    pub classifier: GbtConfig,
    pub theta: f64,
    pub snippet_rows: usize,
    pub snippet_cols: usize,
    /// Resolved against the config file's directory when relative.
    pub synonyms: Option<PathBuf>,
    /// Documents consumed per query; all when unset.
    pub k: Option<usize>,
    pub corpus_filter: CorpusFilter,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            features: FeatureConfig::default(),
            bm25: Bm25Params::default(),
            tm: TmConfig::default(),
            cdssm: CdssmTrainConfig::default(),
            classifier: GbtConfig::default(),
            theta: 0.5,
            snippet_rows: DEFAULT_ROWS,
            snippet_cols: DEFAULT_COLS,
            synonyms: None,
            k: None,
            corpus_filter: CorpusFilter::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                what: "config".into(),
                found: self.schema_version,
                expected: CONFIG_SCHEMA_VERSION,
            });
        }
        self.features.normalized()?;
        check_threshold(self.theta)?;
        if self.snippet_rows == 0 || self.snippet_cols == 0 {
            return Err(Error::InvalidArgument(
                "snippet size must be at least 1 x 1".into(),
            ));
        }
        if self.k == Some(0) {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text)?;
        if let (Some(syn), Some(dir)) = (&cfg.synonyms, path.parent()) {
            if syn.is_relative() {
                cfg.synonyms = Some(dir.join(syn));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
