//! `DYNTRAJ1` trajectory files and their JSON metadata sidecar.
//!
//! ```text
//! "DYNTRAJ1" | u32 dim | u32 count | count × (u64 length | f64 tau | length·dim f64)
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{parse_tagged, read_file, to_pretty_json, write_atomic, Reader};
use crate::dynamics::{Dataset, DatasetMeta, Trajectory};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"DYNTRAJ1";
pub(crate) const META_FORMAT_BASE: &str = "dyntok-dataset";
const META_FORMAT: &str = "dyntok-dataset/1";

pub fn encode(dim: usize, trajectories: &[Trajectory]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    out.extend_from_slice(&(trajectories.len() as u32).to_le_bytes());
    for t in trajectories {
        if t.dim() != dim {
            return Err(Error::Shape(format!(
                "trajectory of dimension {} in a {dim}-dimensional file",
                t.dim()
            )));
        }
        out.extend_from_slice(&(t.len() as u64).to_le_bytes());
        out.extend_from_slice(&t.tau().to_le_bytes());
        for v in t.as_flat() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Returns the file's dimension and its trajectories.
pub fn decode(bytes: &[u8], path: &Path) -> Result<(usize, Vec<Trajectory>)> {
    let mut r = Reader::new(bytes, path);
    r.magic(MAGIC)?;
    let dim = r.u32()? as usize;
    let count = r.u32()? as usize;
    if dim == 0 && count > 0 {
        return Err(Error::format(path, "zero dimension with non-empty content"));
    }
    let mut trajectories = Vec::with_capacity(count.min(1 << 16));
    for i in 0..count {
        let len = r.u64()? as usize;
        let tau = r.f64()?;
        let values = r.f64s(len.checked_mul(dim).ok_or_else(|| Error::format(path, "size overflow"))?)?;
        let t = Trajectory::from_flat(dim, tau, values).map_err(|e| Error::format(path, format!("trajectory {i}: {e}")))?;
        trajectories.push(t);
    }
    r.finish()?;
    Ok((dim, trajectories))
}

pub fn save(path: &Path, dim: usize, trajectories: &[Trajectory]) -> Result<()> {
    write_atomic(path, &encode(dim, trajectories)?)
}

pub fn load(path: &Path) -> Result<(usize, Vec<Trajectory>)> {
    decode(&read_file(path)?, path)
}

/// Sidecar path: `<file>.meta.json`.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

#[derive(Serialize, Deserialize)]
struct MetaFile {
    format: String,
    #[serde(flatten)]
    meta: DatasetMeta,
    trajectories: usize,
}

pub fn save_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    save(path, dataset.dim(), &dataset.trajectories)?;
    let meta = MetaFile {
        format: META_FORMAT.into(),
        meta: dataset.meta.clone(),
        trajectories: dataset.trajectories.len(),
    };
    write_atomic(&meta_path(path), &to_pretty_json(&meta))
}

pub fn load_meta(path: &Path) -> Result<DatasetMeta> {
    let p = meta_path(path);
    let file: MetaFile = parse_tagged(&read_file(&p)?, &p, META_FORMAT)?;
    Ok(file.meta)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let meta = load_meta(path)?;
    let (dim, trajectories) = load(path)?;
    if !trajectories.is_empty() && dim != meta.system.dim() {
        return Err(Error::format(
            path,
            format!("dimension {dim} does not match system {}", meta.system.kind()),
        ));
    }
    Ok(Dataset { meta, trajectories })
}
