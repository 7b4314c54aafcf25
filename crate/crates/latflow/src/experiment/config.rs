//! Flat key-value configuration with one nesting level for parameter
//! blocks. Lines are `key = value`, blocks start with `[name]`, `#` opens a
//! comment. Values are typed at access time; lists are comma-separated.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {0}: {1}")]
    Parse(usize, String),
    #[error("missing required key {0:?}")]
    Missing(String),
    #[error("key {key:?}: expected {expected}, got {value:?}")]
    Type {
        key: String,
        expected: &'static str,
        value: String,
    },
    #[error("unknown key {0:?} (strict schema)")]
    Unknown(String),
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
}

#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    pub top: BTreeMap<String, String>,
    pub blocks: BTreeMap<String, BTreeMap<String, String>>,
}

impl ConfigMap {
    pub fn parse(text: &str) -> Result<ConfigMap, ConfigError> {
        let mut cfg = ConfigMap::default();
        let mut block: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::Parse(lineno + 1, "unclosed [block]".into()))?
                    .trim();
                if name.is_empty() {
                    return Err(ConfigError::Parse(lineno + 1, "empty block name".into()));
                }
                cfg.blocks.entry(name.to_string()).or_default();
                block = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Parse(lineno + 1, "expected key = value".into()))?;
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            if key.is_empty() {
                return Err(ConfigError::Parse(lineno + 1, "empty key".into()));
            }
            match &block {
                None => {
                    cfg.top.insert(key, value);
                }
                Some(b) => {
                    cfg.blocks
                        .get_mut(b)
                        .expect("block exists")
                        .insert(key, value);
                }
            }
        }
        Ok(cfg)
    }

    /// Canonical text form: sorted keys, then sorted blocks. Hash input.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.top {
            out.push_str(&format!("{k} = {v}\n"));
        }
        for (name, block) in &self.blocks {
            out.push_str(&format!("[{name}]\n"));
            for (k, v) in block {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        out
    }

    pub fn set_top(&mut self, key: &str, value: String) {
        self.top.insert(key.to_string(), value);
    }

    pub fn params(&self) -> BTreeMap<String, String> {
        self.blocks.get("params").cloned().unwrap_or_default()
    }
}

/// FNV-1a over the canonical serialization; embedded in every record.
pub fn config_hash(cfg: &ConfigMap) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in cfg.canonical().bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

/// Typed view over one key-value level.
pub struct Typed<'a> {
    map: &'a BTreeMap<String, String>,
}

impl<'a> Typed<'a> {
    pub fn new(map: &'a BTreeMap<String, String>) -> Self {
        Typed { map }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::Type {
                key: key.into(),
                expected: "integer",
                value: v.clone(),
            }),
        }
    }

    pub fn u64_req(&self, key: &str) -> Result<u64, ConfigError> {
        match self.map.get(key) {
            None => Err(ConfigError::Missing(key.into())),
            Some(v) => v.parse().map_err(|_| ConfigError::Type {
                key: key.into(),
                expected: "integer",
                value: v.clone(),
            }),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::Type {
                key: key.into(),
                expected: "real",
                value: v.clone(),
            }),
        }
    }

    pub fn f64_req(&self, key: &str) -> Result<f64, ConfigError> {
        self.map
            .get(key)
            .ok_or_else(|| ConfigError::Missing(key.into()))?
            .parse()
            .map_err(|_| ConfigError::Type {
                key: key.into(),
                expected: "real",
                value: self.map[key].clone(),
            })
    }

    pub fn str_or(&self, key: &str, default: &str) -> String {
        self.map
            .get(key)
            .cloned()
            .unwrap_or_else(|| default.to_string())
    }

    pub fn str_req(&self, key: &str) -> Result<String, ConfigError> {
        self.map
            .get(key)
            .cloned()
            .ok_or_else(|| ConfigError::Missing(key.into()))
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|t| {
                    t.trim().parse::<f64>().map_err(|_| ConfigError::Type {
                        key: key.into(),
                        expected: "comma-separated reals",
                        value: v.clone(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    pub fn i64_list(&self, key: &str) -> Result<Option<Vec<i64>>, ConfigError> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|t| {
                    t.trim().parse::<i64>().map_err(|_| ConfigError::Type {
                        key: key.into(),
                        expected: "comma-separated integers",
                        value: v.clone(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    /// Rejects keys outside the allowed set.
    pub fn check_known(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        for k in self.map.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(ConfigError::Unknown(k.clone()));
            }
        }
        Ok(())
    }
}
