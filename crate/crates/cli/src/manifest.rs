//! `manifest.toml`: inputs, configuration hash and artifact digests of a run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use esfem::harness::write_atomic;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::config::CliConfig;
use crate::{CliError, Command};

pub struct Inputs {
    pub command: Command,
    pub config_path: Option<PathBuf>,
    pub config_bytes: Option<Vec<u8>>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Hash of the resolved configuration; independent of formatting, key
/// order, defaults spelled out or not, and the output directory.
pub fn config_hash(cfg: &CliConfig) -> String {
    sha256_hex(cfg.canonical().as_bytes())
}

pub fn render(inputs: &Inputs, cfg: &CliConfig, artifacts: &[(String, String)], complete: bool) -> String {
    let mut root = Table::new();
    root.insert("status".into(), Value::String(if complete { "complete" } else { "incomplete" }.into()));
    root.insert("command".into(), Value::String(inputs.command.name().into()));
    root.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
    root.insert("config_hash".into(), Value::String(config_hash(cfg)));
    let mut input = Table::new();
    if let Some(p) = &inputs.config_path {
        input.insert("config".into(), Value::String(p.display().to_string()));
    }
    if let Some(b) = &inputs.config_bytes {
        input.insert("config_sha256".into(), Value::String(sha256_hex(b)));
    }
    root.insert("inputs".into(), Value::Table(input));
    let mut arts = Table::new();
    for (name, digest) in artifacts {
        arts.insert(name.clone(), Value::String(digest.clone()));
    }
    root.insert("artifacts".into(), Value::Table(arts));
    let mut resolved = Table::new();
    for line in cfg.canonical().lines() {
        if let Some((k, v)) = line.split_once('=') {
            resolved.insert(k.into(), Value::String(v.into()));
        }
    }
    root.insert("resolved".into(), Value::Table(resolved));
    toml::to_string(&root).expect("manifest serializes")
}

/// Writes `dir/manifest.toml`; artifact digests are read back from disk.
pub fn write(
    dir: &Path,
    inputs: &Inputs,
    cfg: &CliConfig,
    artifacts: &[PathBuf],
    complete: bool,
) -> Result<(), CliError> {
    let mut digests = Vec::with_capacity(artifacts.len());
    for p in artifacts {
        let bytes = std::fs::read(p).map_err(esfem::Error::from)?;
        let name = p.strip_prefix(dir).unwrap_or(p).display().to_string();
        digests.push((name, sha256_hex(&bytes)));
    }
    write_atomic(&dir.join("manifest.toml"), render(inputs, cfg, &digests, complete).as_bytes())?;
    Ok(())
}
