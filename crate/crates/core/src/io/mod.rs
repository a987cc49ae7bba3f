//! On-disk formats.
//!
//! Binary files start with an 8-byte magic and are little-endian
//! throughout. Text files are JSON objects carrying a `format` tag with a
//! version suffix. Every writer goes through [`write_atomic`].

pub mod checkpoint;
pub mod grid;
pub mod manifest;
pub mod report;
pub mod tokens;
pub mod trajectory;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Write `bytes` to a sibling temp file, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Which project format a file holds, judged from its first bytes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileKind {
    Trajectories,
    Tokens,
    Checkpoint,
    Grid,
    Report,
    Manifest,
    DatasetMeta,
}

pub fn detect_kind(bytes: &[u8]) -> Option<FileKind> {
    match bytes.get(..8) {
        Some(m) if m == trajectory::MAGIC => return Some(FileKind::Trajectories),
        Some(m) if m == tokens::MAGIC => return Some(FileKind::Tokens),
        Some(m) if m == checkpoint::MAGIC => return Some(FileKind::Checkpoint),
        _ => {}
    }
    let value: serde_json::Value = serde_json::from_slice(bytes).ok()?;
    let tag = value.get("format")?.as_str()?;
    let base = tag.split('/').next()?;
    match base {
        grid::FORMAT_BASE => Some(FileKind::Grid),
        report::FORMAT_BASE => Some(FileKind::Report),
        manifest::FORMAT_BASE => Some(FileKind::Manifest),
        trajectory::META_FORMAT_BASE => Some(FileKind::DatasetMeta),
        _ => None,
    }
}

/// Little-endian cursor over a byte buffer that reports truncation as a
/// format error naming the file.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        Self { bytes, pos: 0, path }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::format(
                self.path,
                format!(
                    "truncated: needed {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ),
            )
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn magic(&mut self, expected: &[u8; 8]) -> Result<()> {
        let found = self.bytes.get(..8).unwrap_or(self.bytes);
        if found != expected {
            return Err(Error::Magic {
                path: self.path.to_path_buf(),
                expected: String::from_utf8_lossy(expected).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        self.pos = 8;
        Ok(())
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub(crate) fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::format(self.path, "size overflow"))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    pub(crate) fn u32s(&mut self, n: usize) -> Result<Vec<u32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| Error::format(self.path, "size overflow"))?)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(
                self.path,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

/// Parse a tagged JSON document, checking its `format` field.
pub(crate) fn parse_tagged<T: serde::de::DeserializeOwned>(bytes: &[u8], path: &Path, expected_format: &str) -> Result<T> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| Error::format(path, e.to_string()))?;
    let found = value
        .get("format")
        .and_then(|f| f.as_str())
        .unwrap_or("<missing>")
        .to_string();
    if found != expected_format {
        return Err(Error::Magic {
            path: path.to_path_buf(),
            expected: expected_format.to_string(),
            found,
        });
    }
    serde_json::from_value(value).map_err(|e| Error::format(path, e.to_string()))
}

pub(crate) fn to_pretty_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}
