//! Flat TOML config file mirroring the long CLI flags (dashes become
//! underscores). Explicit flags override config values.

use std::path::{Path, PathBuf};

use toml::Value;

use crate::CliError;

pub struct ConfigFile {
    table: toml::Table,
}

pub trait FromConfig: Sized {
    fn from_value(v: &Value) -> Result<Self, String>;
}

impl FromConfig for f64 {
    fn from_value(v: &Value) -> Result<Self, String> {
        match v {
            Value::Float(f) => Ok(*f),
            Value::Integer(i) => Ok(*i as f64),
            other => Err(format!("expected a number, got {other}")),
        }
    }
}

macro_rules! from_config_int {
    ($($t:ty),*) => {$(
        impl FromConfig for $t {
            fn from_value(v: &Value) -> Result<Self, String> {
                match v {
                    Value::Integer(i) => <$t>::try_from(*i).map_err(|_| format!("{i} out of range")),
                    other => Err(format!("expected an integer, got {other}")),
                }
            }
        }
    )*};
}
from_config_int!(u32, u64, usize);

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let table = match path {
            None => toml::Table::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Data(format!("cannot read config {}: {e}", p.display()))
                })?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Data(format!("config parse: {e}")))?
            }
        };
        Ok(Self { table })
    }

    /// Flag value if present, else the config value under `key`.
    pub fn resolve<T: FromConfig>(
        &self,
        key: &str,
        flag: Option<T>,
    ) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.table.get(key) {
            None => Ok(None),
            Some(v) => T::from_value(v)
                .map(Some)
                .map_err(|m| CliError::Usage(format!("config key {key}: {m}"))),
        }
    }

    pub fn string(&self, key: &str) -> Result<Option<String>, CliError> {
        match self.table.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(other) => Err(CliError::Usage(format!(
                "config key {key}: expected a string, got {other}"
            ))),
        }
    }

    pub fn path(&self, key: &str) -> Result<Option<PathBuf>, CliError> {
        Ok(self.string(key)?.map(PathBuf::from))
    }
}
