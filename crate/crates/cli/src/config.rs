//! Flat `section.key = value` configuration.
//!
//! ```text
//! # comments start with '#'
//! run.output = out
//! data.csv = train.csv
//! attack.target.x1 = flat
//! ```
//!
//! Keys keep their file order, which fixes the order of targeted features.

use std::path::{Path, PathBuf};

use crate::error::{config_err, CliResult};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: Vec<(String, String)>,
}

/// Keys holding file paths; resolved against the config file's directory.
const PATH_KEYS: [&str; 8] = [
    "run.output",
    "data.csv",
    "data.schema",
    "model.file",
    "evaluate.attack",
    "plot.curves",
    "plot.ice",
    "explain.model",
];

impl ConfigFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected `key = value`", i + 1)))?;
            let key = key.trim();
            if !key.contains('.') || key.starts_with('.') || key.ends_with('.') {
                return Err(config_err(format!("line {}: key `{key}` needs a section prefix", i + 1)));
            }
            if cfg.get(key).is_some() {
                return Err(config_err(format!("line {}: `{key}` is set twice", i + 1)));
            }
            cfg.entries.push((key.to_string(), value.trim().to_string()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes relative path values absolute with respect to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let base = std::path::absolute(base).unwrap_or_else(|_| base.to_path_buf());
        for (k, v) in &mut self.entries {
            if PATH_KEYS.contains(&k.as_str()) && Path::new(v.as_str()).is_relative() {
                *v = base.join(v.as_str()).to_string_lossy().into_owned();
            }
        }
        // explicit target values read from a file: `file(path)`
        for (k, v) in &mut self.entries {
            if !k.starts_with("attack.target.") {
                continue;
            }
            if let Some(p) = v.strip_prefix("file(").and_then(|r| r.strip_suffix(')')) {
                if Path::new(p.trim()).is_relative() {
                    *v = format!("file({})", base.join(p.trim()).to_string_lossy());
                }
            }
        }
    }

    /// Applies `key=value`; replaces an existing key in place.
    pub fn set(&mut self, assignment: &str) -> CliResult<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| config_err(format!("override `{assignment}` is not `key=value`")))?;
        let (k, v) = (k.trim(), v.trim());
        if !k.contains('.') {
            return Err(config_err(format!("override key `{k}` needs a section prefix")));
        }
        match self.entries.iter_mut().find(|(key, _)| key == k) {
            Some(e) => e.1 = v.to_string(),
            None => self.entries.push((k.to_string(), v.to_string())),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> CliResult<&str> {
        self.get(key).ok_or_else(|| config_err(format!("missing `{key}`")))
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        self.get(key)
            .map(|v| v.parse().map_err(|_| config_err(format!("`{key}`: cannot parse `{v}`"))))
            .transpose()
    }

    pub fn parsed_or<T: std::str::FromStr>(&self, key: &str, default: T) -> CliResult<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn list<T: std::str::FromStr>(&self, key: &str) -> CliResult<Option<Vec<T>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|t| t.trim().parse().map_err(|_| config_err(format!("`{key}`: cannot parse `{t}`"))))
                    .collect()
            })
            .transpose()
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }

    /// `(suffix, value)` for every key under `prefix.`, in file order.
    pub fn section(&self, prefix: &str) -> Vec<(String, String)> {
        let p = format!("{prefix}.");
        self.entries
            .iter()
            .filter_map(|(k, v)| k.strip_prefix(&p).map(|s| (s.to_string(), v.clone())))
            .collect()
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}
