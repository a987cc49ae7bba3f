//! `DYNCKPT1` model checkpoints.
//!
//! ```text
//! "DYNCKPT1" | u32 version | u64 header_len | header (JSON)
//! | u32 tensor_count | tensor_count × (u32 name_len | name | u8 dtype
//!   | u32 ndim | ndim × u64 dim | f64 data…)
//! ```
//! dtype 1 is little-endian f64, the only one written.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_file, write_atomic, Reader};
use crate::error::{Error, Result};
use crate::transformer::{Layout, ModelConfig, ParameterSet};

pub const MAGIC: &[u8; 8] = b"DYNCKPT1";
pub const VERSION: u32 = 1;
const DTYPE_F64: u8 = 1;

/// Text header stored ahead of the tensors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub model: ModelConfig,
    /// Optimizer steps completed when the checkpoint was written.
    pub step: u64,
    pub init_seed: u64,
    pub train_seed: u64,
    /// Tokens seen in the training data, ascending; used for masked
    /// generation.
    #[serde(default)]
    pub observed_tokens: Option<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: ParameterSet,
}

pub fn encode(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    if ckpt.params.config() != &ckpt.header.model {
        return Err(Error::Shape("header config differs from parameter config".into()));
    }
    let header = serde_json::to_vec(&ckpt.header).expect("serializable header");
    let layout = ckpt.params.layout();
    let mut out = Vec::with_capacity(32 + header.len() + ckpt.params.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(layout.tensors().len() as u32).to_le_bytes());
    for t in layout.tensors() {
        out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
        out.extend_from_slice(t.name.as_bytes());
        out.push(DTYPE_F64);
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in &ckpt.params.data()[t.range()] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes, path);
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::format(
            path,
            format!("checkpoint version {version}, expected {VERSION}"),
        ));
    }
    let header_len = r.u64()? as usize;
    let header: CheckpointHeader =
        serde_json::from_slice(r.take(header_len)?).map_err(|e| Error::format(path, format!("header: {e}")))?;
    header.model.validate().map_err(|e| Error::format(path, e.to_string()))?;
    let layout = Layout::new(&header.model);
    let count = r.u32()? as usize;
    if count != layout.tensors().len() {
        return Err(Error::Shape(format!(
            "{}: {count} tensors, config expects {}",
            path.display(),
            layout.tensors().len()
        )));
    }
    let mut data = Vec::with_capacity(layout.total());
    for t in layout.tensors() {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8_lossy(r.take(name_len)?).into_owned();
        if name != t.name {
            return Err(Error::Shape(format!(
                "{}: tensor {name:?} where {:?} was expected",
                path.display(),
                t.name
            )));
        }
        let dtype = r.u8()?;
        if dtype != DTYPE_F64 {
            return Err(Error::format(path, format!("tensor {name}: unsupported dtype {dtype}")));
        }
        let ndim = r.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u64()? as usize);
        }
        if shape != t.shape {
            return Err(Error::Shape(format!(
                "{}: tensor {name} has shape {shape:?}, config expects {:?}",
                path.display(),
                t.shape
            )));
        }
        data.extend(r.f64s(t.len())?);
    }
    r.finish()?;
    let params = ParameterSet::from_data(&header.model, data)?;
    Ok(Checkpoint { header, params })
}

pub fn save(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_atomic(path, &encode(ckpt)?)
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    decode(&read_file(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transformer::{forward, init_model, PositionEncoding};

    fn sample() -> Checkpoint {
        let model = ModelConfig {
            vocab: 9,
            context: 6,
            dim: 8,
            layers: 2,
            heads: 2,
            dropout: 0.1,
            tie_embeddings: false,
            position: PositionEncoding::Learned,
        };
        Checkpoint {
            params: init_model(&model, 4).unwrap(),
            header: CheckpointHeader {
                model,
                step: 17,
                init_seed: 4,
                train_seed: 5,
                observed_tokens: Some(vec![0, 3, 8]),
            },
        }
    }

    #[test]
    fn roundtrip_preserves_logits_bitwise() {
        let ck = sample();
        let back = decode(&encode(&ck).unwrap(), Path::new("c")).unwrap();
        assert_eq!(back, ck);
        let a = forward(&ck.params, &[1, 2, 3]).unwrap();
        let b = forward(&back.params, &[1, 2, 3]).unwrap();
        assert!(a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn shape_mismatch_against_header_is_rejected() {
        let ck = sample();
        let bytes = encode(&ck).unwrap();
        // rewrite the header to claim a different width
        let text = String::from_utf8_lossy(&bytes[20..20 + 200]).into_owned();
        assert!(text.contains("\"dim\":8"));
        let mut bad = bytes.clone();
        let pos = bad.windows(7).position(|w| w == b"\"dim\":8").unwrap();
        bad[pos + 6] = b'4';
        let err = decode(&bad, Path::new("c")).unwrap_err();
        assert!(matches!(err, Error::Shape(_)), "{err}");
    }

    #[test]
    fn magic_and_truncation() {
        let bytes = encode(&sample()).unwrap();
        assert!(matches!(decode(&bytes[..100], Path::new("c")), Err(Error::Format { .. })));
        let mut bad = bytes;
        bad[..8].copy_from_slice(b"DYNTOK01");
        assert!(matches!(decode(&bad, Path::new("c")), Err(Error::Magic { .. })));
    }
}
