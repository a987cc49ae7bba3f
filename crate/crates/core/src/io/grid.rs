//! Grid files: JSON with bounds, segment count and the flattening order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{parse_tagged, read_file, to_pretty_json, write_atomic};
use crate::discretization::Grid;
use crate::error::{Error, Result};

pub(crate) const FORMAT_BASE: &str = "dyntok-grid";
const FORMAT: &str = "dyntok-grid/1";
const ORDER: &str = "dim0-most-significant";

#[derive(Serialize, Deserialize)]
struct GridFile {
    format: String,
    dim: usize,
    n: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    order: String,
    token_base: u32,
    vocab: usize,
}

pub fn encode(grid: &Grid) -> Vec<u8> {
    to_pretty_json(&GridFile {
        format: FORMAT.into(),
        dim: grid.dim(),
        n: grid.segments(),
        lo: grid.lo().to_vec(),
        hi: grid.hi().to_vec(),
        order: ORDER.into(),
        token_base: 0,
        vocab: grid.vocab_size(),
    })
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Grid> {
    let f: GridFile = parse_tagged(bytes, path, FORMAT)?;
    if f.order != ORDER || f.token_base != 0 {
        return Err(Error::format(
            path,
            format!("unsupported token convention {} base {}", f.order, f.token_base),
        ));
    }
    if f.lo.len() != f.dim {
        return Err(Error::format(path, "bounds do not match dim"));
    }
    let grid = Grid::new(f.n, f.lo, f.hi).map_err(|e| Error::format(path, e.to_string()))?;
    if grid.vocab_size() != f.vocab {
        return Err(Error::format(path, "vocab does not equal n^dim"));
    }
    Ok(grid)
}

pub fn save(path: &Path, grid: &Grid) -> Result<()> {
    write_atomic(path, &encode(grid))
}

pub fn load(path: &Path) -> Result<Grid> {
    decode(&read_file(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let g = Grid::new(35, vec![-19.7, -0.1 / 3.0], vec![20.25, 1e-17]).unwrap();
        let back = decode(&encode(&g), Path::new("g")).unwrap();
        assert_eq!(back, g);
        assert!(back.lo().iter().zip(g.lo()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn wrong_tag_is_rejected() {
        let text = String::from_utf8(encode(&Grid::new(2, vec![0.0], vec![1.0]).unwrap())).unwrap();
        let bad = text.replace("dyntok-grid/1", "dyntok-grid/9");
        let err = decode(bad.as_bytes(), Path::new("g")).unwrap_err();
        assert!(err.to_string().contains("dyntok-grid/9"));
    }
}
