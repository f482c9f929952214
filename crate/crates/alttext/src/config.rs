//! Pipeline configuration: one TOML file, every field optional, command
//! line flags applied on top.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use alttext_core::{ShapeFilterConfig, TokenizerConfig};
use serde::{Deserialize, Serialize};

use crate::providers::{
    ProviderConfig, ProviderKind, PriceTable, DEFAULT_OCR_MIN_CONFIDENCE,
};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// View-hierarchy documents, one `<screen_id>.json` each.
    pub screens_dir: PathBuf,
    /// Screenshots named `<screen_id>.png` or `.jpg`.
    pub screenshots_dir: PathBuf,
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Fixture table for the offline providers.
    pub fixtures: Option<PathBuf>,
    /// Where `fetch-data` stores downloads.
    pub data_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            screens_dir: "data/screens".into(),
            screenshots_dir: "data/screenshots".into(),
            cache_dir: "cache".into(),
            output_dir: "out".into(),
            fixtures: None,
            data_dir: "data".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    /// Choice of one reference caption per icon.
    pub caption_pick: u64,
    /// Per-class sampling of fine-tuning records.
    pub finetune: u64,
}

impl Seeds {
    pub fn all(seed: u64) -> Self {
        Seeds {
            caption_pick: seed,
            finetune: seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotateConfig {
    pub workers: usize,
    pub ocr_min_confidence: f64,
    /// Stop after the prompt stage (used for training icons).
    pub prompts_only: bool,
    /// Use fixture providers instead of the configured endpoints.
    pub mock: bool,
    /// Run-wide spend limit across all providers.
    pub budget_usd: Option<f64>,
}

impl Default for AnnotateConfig {
    fn default() -> Self {
        AnnotateConfig {
            workers: 4,
            ocr_min_confidence: DEFAULT_OCR_MIN_CONFIDENCE,
            prompts_only: false,
            mock: false,
            budget_usd: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneConfig {
    pub cap_per_class: usize,
    /// Class list, one per line; the bundled icon classes when unset.
    pub vocab: Option<PathBuf>,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            cap_per_class: 15,
            vocab: None,
        }
    }
}

/// A file for `fetch-data`. Without `sha256` the digest is printed so it
/// can be pinned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FetchEntry {
    pub url: String,
    /// Destination relative to `paths.data_dir`.
    pub dest: PathBuf,
    #[serde(default)]
    pub sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub seeds: Seeds,
    pub shape_filter: ShapeFilterConfig,
    pub tokenizer: TokenizerConfig,
    pub annotate: AnnotateConfig,
    pub finetune: FinetuneConfig,
    pub providers: BTreeMap<ProviderKind, ProviderConfig>,
    pub prices: PriceTable,
    pub fetch: Vec<FetchEntry>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            ConfigError::Parse { source, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                source,
            },
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: PathBuf::new(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |s: String| ConfigError::Invalid(s);
        self.shape_filter
            .validate()
            .map_err(|e| invalid(e.to_string()))?;
        if self.annotate.workers == 0 {
            return Err(invalid("annotate.workers must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.annotate.ocr_min_confidence) {
            return Err(invalid("annotate.ocr_min_confidence must lie in [0, 1]".into()));
        }
        if let Some(b) = self.annotate.budget_usd {
            if !(b.is_finite() && b >= 0.0) {
                return Err(invalid("annotate.budget_usd must be a non-negative number".into()));
            }
        }
        for (kind, p) in &self.providers {
            if *kind != p.kind {
                return Err(invalid(format!(
                    "providers.{} declares kind {}",
                    kind.as_str(),
                    p.kind.as_str()
                )));
            }
            p.validate().map_err(invalid)?;
        }
        Ok(())
    }

    /// Creates the cache and output directories.
    pub fn ensure_dirs(&self) -> Result<(), ConfigError> {
        for dir in [&self.paths.cache_dir, &self.paths.output_dir] {
            std::fs::create_dir_all(dir).map_err(|e| {
                ConfigError::Invalid(format!("cannot create {}: {e}", dir.display()))
            })?;
        }
        Ok(())
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.paths.output_dir.join(name)
    }
}
