//! Minimal key-value text configuration format.
//!
//! One `key value value ...` entry per line, `#` comments, blank lines
//! ignored. Used for the robot description file, solver options and planner
//! configuration so every run is reproducible from plain text files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("duplicate key {0:?}")]
    DuplicateKey(String),
    #[error("missing key {0:?}")]
    MissingKey(String),
    #[error("key {key:?}: expected {expected} values, got {got}")]
    ValueCount { key: String, expected: usize, got: usize },
    #[error("key {key:?}: cannot parse {token:?} as a number")]
    BadNumber { key: String, token: String },
}

/// Parsed key-value document; keys are unique, order preserved for writing.
#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: Vec<(String, Vec<String>)>,
    index: BTreeMap<String, usize>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut kv = KeyValues::default();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let key = tokens.next().expect("non-empty line").to_string();
            let values: Vec<String> = tokens.map(str::to_string).collect();
            kv.insert(&key, values)?;
        }
        Ok(kv)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn insert(&mut self, key: &str, values: Vec<String>) -> Result<(), ConfigError> {
        if self.index.contains_key(key) {
            return Err(ConfigError::DuplicateKey(key.to_string()));
        }
        self.index.insert(key.to_string(), self.entries.len());
        self.entries.push((key.to_string(), values));
        Ok(())
    }

    pub fn set_f64s(&mut self, key: &str, values: &[f64]) {
        let rendered = values.iter().map(f64::to_string).collect();
        self.insert(key, rendered).expect("writer keys are unique");
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    fn values(&self, key: &str) -> Result<&[String], ConfigError> {
        self.index
            .get(key)
            .map(|&i| self.entries[i].1.as_slice())
            .ok_or_else(|| ConfigError::MissingKey(key.to_string()))
    }

    pub fn get_f64s(&self, key: &str, expected: usize) -> Result<Vec<f64>, ConfigError> {
        let values = self.values(key)?;
        if values.len() != expected {
            return Err(ConfigError::ValueCount {
                key: key.to_string(),
                expected,
                got: values.len(),
            });
        }
        values
            .iter()
            .map(|t| {
                t.parse::<f64>().map_err(|_| ConfigError::BadNumber {
                    key: key.to_string(),
                    token: t.clone(),
                })
            })
            .collect()
    }

    pub fn get_f64(&self, key: &str) -> Result<f64, ConfigError> {
        Ok(self.get_f64s(key, 1)?[0])
    }

    pub fn get_f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        if self.contains(key) {
            self.get_f64(key)
        } else {
            Ok(default)
        }
    }

    pub fn get_usize(&self, key: &str) -> Result<usize, ConfigError> {
        let v = self.get_f64(key)?;
        Ok(v as usize)
    }

    pub fn get_vec3(&self, key: &str) -> Result<Vector3<f64>, ConfigError> {
        let v = self.get_f64s(key, 3)?;
        Ok(Vector3::new(v[0], v[1], v[2]))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (key, values) in &self.entries {
            let _ = write!(out, "{key}");
            for v in values {
                let _ = write!(out, " {v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ConfigError> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}
