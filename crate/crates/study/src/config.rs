//! Service configuration from a TOML file with environment overrides.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
    #[error("environment variable {name}: {message}")]
    Env { name: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub database: PathBuf,
    pub blob_dir: PathBuf,
    /// Templates registered at startup.
    pub templates: Vec<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            database: PathBuf::from("bayesvis.sqlite"),
            blob_dir: PathBuf::from("blobs"),
            templates: Vec::new(),
        }
    }
}

pub const ENV_BIND: &str = "BAYESVIS_BIND";
pub const ENV_DATABASE: &str = "BAYESVIS_DATABASE";
pub const ENV_BLOB_DIR: &str = "BAYESVIS_BLOB_DIR";
/// Comma-separated template paths.
pub const ENV_TEMPLATES: &str = "BAYESVIS_TEMPLATES";

impl ServiceConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })
    }

    /// Reads `path` if given (defaults otherwise), then applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.to_owned(),
                    source,
                })?;
                Self::from_toml(&text, p)?
            }
            None => Self::default(),
        };
        config.apply_env(|name| std::env::var(name).ok())?;
        Ok(config)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = get(ENV_BIND) {
            self.bind = v.parse().map_err(|e: std::net::AddrParseError| ConfigError::Env {
                name: ENV_BIND,
                message: e.to_string(),
            })?;
        }
        if let Some(v) = get(ENV_DATABASE) {
            self.database = v.into();
        }
        if let Some(v) = get(ENV_BLOB_DIR) {
            self.blob_dir = v.into();
        }
        if let Some(v) = get(ENV_TEMPLATES) {
            self.templates = v.split(',').filter(|s| !s.is_empty()).map(PathBuf::from).collect();
        }
        Ok(())
    }
}
