//! Flat `key = value` run configuration. CLI flags override file values.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{PolarError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Gray3,
    Color4,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gray3" => Ok(Mode::Gray3),
            "color4" => Ok(Mode::Color4),
            other => Err(PolarError::Parse(format!("unknown mode {other:?}"))),
        }
    }

    pub fn angles(&self) -> Vec<u32> {
        match self {
            Mode::Gray3 => vec![0, 45, 90],
            Mode::Color4 => vec![0, 45, 90, 135],
        }
    }
}

/// Parsed `key = value` file. Strings may be quoted, numbers and booleans are
/// parsed on access.
#[derive(Debug, Clone, Default)]
pub struct KvConfig {
    values: HashMap<String, String>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| PolarError::Parse(format!("line {}: expected key = value", lineno + 1)))?;
            let key = key.trim().to_string();
            let mut value = value.trim().to_string();
            if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
                value = value[1..value.len() - 1].to_string();
            }
            if key.is_empty() {
                return Err(PolarError::Parse(format!("line {}: empty key", lineno + 1)));
            }
            values.insert(key, value);
        }
        Ok(Self { values })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| v.parse::<f64>().map_err(|_| PolarError::Parse(format!("{key}: bad number {v:?}"))))
            .transpose()
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|v| v.parse::<usize>().map_err(|_| PolarError::Parse(format!("{key}: bad integer {v:?}"))))
            .transpose()
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        self.get(key)
            .map(|v| v.parse::<u64>().map_err(|_| PolarError::Parse(format!("{key}: bad integer {v:?}"))))
            .transpose()
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|v| match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                other => Err(PolarError::Parse(format!("{key}: bad boolean {other:?}"))),
            })
            .transpose()
    }
}
