use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::embed_dedup::EmbedDedupConfig;
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::ifd::DEFAULT_FRACTION;
use crate::planner::VocabConfig;
use crate::pretrain::{ChunkConfig, RulesConfig};
use crate::providers::ProvidersConfig;
use crate::sft::{FieldMap, SftCleanConfig, TemplateSet};
use crate::simhash::DedupConfig;
use crate::tool::Tolerance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IfdConfig {
    pub fraction: f64,
}

impl Default for IfdConfig {
    fn default() -> Self {
        IfdConfig {
            fraction: DEFAULT_FRACTION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolConfig {
    pub max_rounds: usize,
}

impl Default for ToolConfig {
    fn default() -> Self {
        ToolConfig { max_rounds: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpoConfig {
    pub beta: f64,
}

impl Default for DpoConfig {
    fn default() -> Self {
        DpoConfig {
            beta: crate::dpo::DEFAULT_BETA,
        }
    }
}

/// The `--config` file. Every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub chunk: ChunkConfig,
    pub clean: RulesConfig,
    pub dedup: DedupConfig,
    pub vocab: VocabConfig,
    pub field_map: FieldMap,
    pub sft_clean: SftCleanConfig,
    pub templates: TemplateSet,
    pub embed_dedup: EmbedDedupConfig,
    pub ifd: IfdConfig,
    pub verify: Tolerance,
    pub eval: EvalConfig,
    pub tool: ToolConfig,
    pub dpo: DpoConfig,
    pub providers: ProvidersConfig,
}

impl AppConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::config(format!("config: {e}")))
    }

    /// Reads a config file and fills provider endpoints and the API token
    /// from the environment.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        cfg.providers.apply_env();
        Ok(cfg)
    }

    /// Defaults plus environment.
    pub fn from_env() -> Self {
        let mut cfg = AppConfig::default();
        cfg.providers.apply_env();
        cfg
    }
}

/// `base` with the top-level keys of `overrides` replaced.
pub fn with_overrides<T: Serialize + DeserializeOwned>(
    base: &T,
    overrides: &toml::Table,
    what: &str,
) -> Result<T> {
    let mut table =
        toml::Table::try_from(base).map_err(|e| Error::config(format!("{what}: {e}")))?;
    for (k, v) in overrides {
        table.insert(k.clone(), v.clone());
    }
    table
        .try_into()
        .map_err(|e| Error::config(format!("{what}: {e}")))
}
