//! key=value config file and flag resolution. Precedence: explicit flag,
//! then config file entry, then built-in default.

use anyhow::{bail, Context, Result};
use std::collections::HashMap;
use std::str::FromStr;

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    entries: HashMap<String, String>,
}

pub fn load_config_file(path: Option<&str>) -> Result<ConfigFile> {
    let mut entries = HashMap::new();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {path}"))?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("config file {path} line {}: expected key=value", lineno + 1);
            };
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
    }
    Ok(ConfigFile { entries })
}

impl ConfigFile {
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(raw) => match raw.parse::<T>() {
                Ok(v) => Ok(Some(v)),
                Err(e) => bail!("config key {key}: invalid value {raw:?}: {e}"),
            },
        }
    }

    /// flag > config file > default
    pub fn resolve<T: FromStr + Clone>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        Ok(self.get(key)?.unwrap_or(default))
    }
}

/// Lowercase hex SHA-256 of a file's contents.
pub fn file_digest(path: &str) -> Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {path}"))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}
