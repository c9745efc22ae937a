//! Flat `key = value` config files.
//!
//! Keys are field names of the synthetic-data, session or model
//! configuration. A key present in several of them (`seed`) sets all of them.
//! Values are parsed as JSON when possible and taken as strings otherwise, so
//! `metric = jaccard` and `hidden_layers = [32, 16]` both work.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    entries: Vec<(String, Value)>,
}

impl Overrides {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut out = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::usage(format!("{origin}:{}: expected key = value", n + 1)))?;
            out.push(k.trim(), v.trim())?;
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn push(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if key.is_empty() {
            return Err(CliError::usage("empty config key"));
        }
        let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
        self.entries.push((key.to_string(), value));
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("serializable override");
        self.entries.push((key.to_string(), value));
    }

    pub fn extend(&mut self, other: Overrides) {
        self.entries.extend(other.entries);
    }

    /// Every key must be a field of at least one of `targets`.
    pub fn check_known(&self, targets: &[&Value]) -> Result<(), CliError> {
        for (k, _) in &self.entries {
            if !targets.iter().any(|t| t.get(k).is_some()) {
                return Err(CliError::usage(format!("unknown config key {k:?}")));
            }
        }
        Ok(())
    }

    /// Applies matching keys to `base`, later entries winning.
    pub fn apply<T: Serialize + DeserializeOwned>(&self, base: &T, what: &str) -> Result<T, CliError> {
        let mut value = serde_json::to_value(base).expect("config serializes");
        let obj: &mut Map<String, Value> = value.as_object_mut().expect("config is an object");
        for (k, v) in &self.entries {
            if k == "d" && what == "model" {
                continue;
            }
            if let Some(slot) = obj.get_mut(k) {
                *slot = v.clone();
            }
        }
        serde_json::from_value(value).map_err(|e| CliError::usage(format!("invalid {what} config: {e}")))
    }
}
