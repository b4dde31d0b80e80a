//! Record of one command run: the resolved config plus SHA-256 hashes of
//! everything read and written.
//!
//! ```text
//! pdfool-run 1
//! command attack
//! version 0.1.0
//! [config]
//! run.seed = 0
//! ...
//! [inputs]
//! <sha256> <absolute path>
//! [outputs]
//! <sha256> <path relative to run.output>
//! ```

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::ConfigFile;
use crate::error::{config_err, CliResult};

pub const MANIFEST_NAME: &str = "run.manifest";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Files produced by a command, held until the whole command succeeds.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, relative: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((relative.into(), bytes));
    }

    pub fn files(&self) -> &[(PathBuf, Vec<u8>)] {
        &self.files
    }

    pub fn hashes(&self) -> Vec<(String, String)> {
        self.files
            .iter()
            .map(|(p, b)| (sha256_hex(b), p.to_string_lossy().replace('\\', "/")))
            .collect()
    }

    pub fn write_under(&self, dir: &Path) -> CliResult<()> {
        for (rel, bytes) in &self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&path, bytes)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: ConfigFile,
    pub inputs: Vec<(String, String)>,
    pub outputs: Vec<(String, String)>,
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut out = format!("pdfool-run 1\ncommand {}\nversion {}\n[config]\n", self.command, self.version);
        out.push_str(&self.config.to_text());
        out.push_str("[inputs]\n");
        for (h, p) in &self.inputs {
            out.push_str(&format!("{h} {p}\n"));
        }
        out.push_str("[outputs]\n");
        for (h, p) in &self.outputs {
            out.push_str(&format!("{h} {p}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut lines = text.lines();
        if lines.next() != Some("pdfool-run 1") {
            return Err(config_err("not a run manifest (expected `pdfool-run 1`)"));
        }
        let mut field = |key: &str| -> CliResult<String> {
            lines
                .next()
                .and_then(|l| l.strip_prefix(key))
                .and_then(|r| r.strip_prefix(' '))
                .map(str::to_string)
                .ok_or_else(|| config_err(format!("run manifest: expected `{key}`")))
        };
        let command = field("command")?;
        let version = field("version")?;
        let rest: Vec<&str> = lines.collect();
        let section = |name: &str| -> CliResult<usize> {
            rest.iter()
                .position(|l| *l == name)
                .ok_or_else(|| config_err(format!("run manifest: missing `{name}`")))
        };
        let (c, i, o) = (section("[config]")?, section("[inputs]")?, section("[outputs]")?);
        if !(c < i && i < o) {
            return Err(config_err("run manifest: sections out of order"));
        }
        let config = ConfigFile::parse(&rest[c + 1..i].join("\n"))?;
        let pairs = |ls: &[&str]| -> CliResult<Vec<(String, String)>> {
            ls.iter()
                .filter(|l| !l.trim().is_empty())
                .map(|l| {
                    l.split_once(' ')
                        .map(|(h, p)| (h.to_string(), p.to_string()))
                        .ok_or_else(|| config_err(format!("run manifest: bad hash line `{l}`")))
                })
                .collect()
        };
        Ok(Self {
            command,
            version,
            config,
            inputs: pairs(&rest[i + 1..o])?,
            outputs: pairs(&rest[o + 1..])?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let m = RunManifest {
            command: "simulate".into(),
            version: "0.1.0".into(),
            config: ConfigFile::parse("simulate.n = 10\nrun.output = /tmp/o\n").unwrap(),
            inputs: vec![],
            outputs: vec![(sha256_hex(b"abc"), "data.csv".into())],
        };
        assert_eq!(RunManifest::parse(&m.to_text()).unwrap(), m);
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert!(RunManifest::parse("junk").is_err());
    }
}
