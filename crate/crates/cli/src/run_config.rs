use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vidrate_core::trainer::{Method, TrainConfig};
use vidrate_core::EnvConfig;

use crate::CliError;

/// Contents of a `--config` file. Every section is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: Option<String>,
    pub env: EnvConfig,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Runtime(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        cfg.env
            .validate()
            .and_then(|()| cfg.train.validate())
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// The flag wins over the file; `dstrl` when neither names a method.
    pub fn method(&self, flag: Option<Method>) -> Result<Method, CliError> {
        match (flag, &self.method) {
            (Some(m), _) => Ok(m),
            (None, Some(name)) => name
                .parse()
                .map_err(|e: vidrate_core::Error| CliError::Usage(e.to_string())),
            (None, None) => Ok(Method::Dstrl),
        }
    }
}
