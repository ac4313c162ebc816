//! Optional TOML config file. Keys mirror the long flag names; a flag given
//! on the command line always wins.

use std::path::Path;

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub workers: Option<usize>,
    pub a: Option<f64>,
    #[serde(rename = "N")]
    pub n: Option<u32>,
    pub t: Option<f64>,
    pub which: Option<String>,
    pub estimator: Option<String>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub model: Option<String>,
    pub probes: Option<Vec<f64>>,
    #[serde(rename = "noise-var")]
    pub noise_var: Option<f64>,
    #[serde(rename = "prior-mean")]
    pub prior_mean: Option<f64>,
    #[serde(rename = "prior-var")]
    pub prior_var: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

/// First of flag, config value, default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// First of flag and config value, or a usage error naming the key.
pub fn require<T>(flag: Option<T>, file: Option<T>, key: &str) -> Result<T, CliError> {
    flag.or(file).ok_or_else(|| CliError::Usage(format!("missing --{key} (flag or config key)")))
}
