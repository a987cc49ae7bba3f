//! `DYNTOK01` token-sequence files.
//!
//! ```text
//! "DYNTOK01" | u32 vocab | u32 count | count × (u64 length | length × u32 id)
//! ```

use std::path::Path;

use super::{read_file, write_atomic, Reader};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"DYNTOK01";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenFile {
    pub vocab: usize,
    pub sequences: Vec<Vec<u32>>,
}

impl TokenFile {
    pub fn new(vocab: usize, sequences: Vec<Vec<u32>>) -> Result<Self> {
        let f = Self { vocab, sequences };
        f.validate()?;
        Ok(f)
    }

    fn validate(&self) -> Result<()> {
        for (i, s) in self.sequences.iter().enumerate() {
            if let Some(&bad) = s.iter().find(|&&t| t as usize >= self.vocab) {
                return Err(Error::Domain(format!(
                    "sequence {i}: token {bad} outside vocabulary {}",
                    self.vocab
                )));
            }
        }
        Ok(())
    }

    pub fn total_tokens(&self) -> usize {
        self.sequences.iter().map(Vec::len).sum()
    }
}

pub fn encode(file: &TokenFile) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + file.total_tokens() * 4 + file.sequences.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(file.vocab as u32).to_le_bytes());
    out.extend_from_slice(&(file.sequences.len() as u32).to_le_bytes());
    for s in &file.sequences {
        out.extend_from_slice(&(s.len() as u64).to_le_bytes());
        for t in s {
            out.extend_from_slice(&t.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<TokenFile> {
    let mut r = Reader::new(bytes, path);
    r.magic(MAGIC)?;
    let vocab = r.u32()? as usize;
    let count = r.u32()? as usize;
    let mut sequences = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = r.u64()? as usize;
        sequences.push(r.u32s(len)?);
    }
    r.finish()?;
    let f = TokenFile { vocab, sequences };
    f.validate().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(f)
}

pub fn save(path: &Path, file: &TokenFile) -> Result<()> {
    file.validate()?;
    write_atomic(path, &encode(file))
}

pub fn load(path: &Path) -> Result<TokenFile> {
    decode(&read_file(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn roundtrip(seqs in prop::collection::vec(prop::collection::vec(0u32..50, 0..20), 0..5)) {
            let f = TokenFile::new(50, seqs).unwrap();
            let bytes = encode(&f);
            prop_assert_eq!(decode(&bytes, Path::new("t")).unwrap(), f);
        }
    }

    #[test]
    fn rejects_out_of_vocab_and_truncation() {
        assert!(TokenFile::new(3, vec![vec![3]]).is_err());
        let bytes = encode(&TokenFile::new(9, vec![vec![1, 2, 3]]).unwrap());
        assert!(matches!(
            decode(&bytes[..bytes.len() - 1], Path::new("t")),
            Err(Error::Format { .. })
        ));
        let mut bad = bytes.clone();
        bad[8] = 2; // vocab 2 with token 3
        assert!(decode(&bad, Path::new("t")).is_err());
    }
}
