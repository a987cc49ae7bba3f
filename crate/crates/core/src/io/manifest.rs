//! Run manifests: what was run, with which settings, on which bytes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{parse_tagged, read_file, to_pretty_json, write_atomic};
use crate::error::Result;

pub(crate) const FORMAT_BASE: &str = "dyntok-manifest";
const FORMAT: &str = "dyntok-manifest/1";
pub const DIGEST_ALGORITHM: &str = "sha256";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let data = read_file(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            bytes: data.len() as u64,
            sha256: sha256_hex(&data),
        })
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    format!("{:x}", Sha256::digest(data))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub command: String,
    pub argv: Vec<String>,
    /// Fully resolved settings of the command.
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub deterministic: bool,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub digest_algorithm: String,
    pub rng_algorithm: String,
    pub tool_version: String,
    pub duration_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str, argv: Vec<String>, config: serde_json::Value) -> Self {
        Self {
            format: FORMAT.into(),
            command: command.into(),
            argv,
            config,
            seeds: BTreeMap::new(),
            deterministic: true,
            inputs: Vec::new(),
            outputs: Vec::new(),
            digest_algorithm: DIGEST_ALGORITHM.into(),
            rng_algorithm: crate::rng::RNG_ALGORITHM.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            duration_seconds: 0.0,
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) -> Result<()> {
        self.outputs.push(FileDigest::of(path)?);
        Ok(())
    }
}

/// `<path>.manifest.json`
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

pub fn encode(m: &RunManifest) -> Vec<u8> {
    to_pretty_json(m)
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<RunManifest> {
    parse_tagged(bytes, path, FORMAT)
}

pub fn save(path: &Path, m: &RunManifest) -> Result<()> {
    write_atomic(path, &encode(m))
}

pub fn load(path: &Path) -> Result<RunManifest> {
    decode(&read_file(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn roundtrip() {
        let mut m = RunManifest::new("simulate", vec!["dyntok".into()], serde_json::json!({"n": 3}));
        m.seeds.insert("seed".into(), 7);
        m.duration_seconds = 0.25;
        assert_eq!(decode(&encode(&m), Path::new("m")).unwrap(), m);
    }
}
