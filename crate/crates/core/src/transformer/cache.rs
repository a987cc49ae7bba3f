//! Incremental decoding with a per-layer key/value cache.

use super::model::embed;
use super::ops;
use super::{Layout, ParameterSet};
use crate::error::{Error, Result};

/// Feeds tokens one at a time, reusing cached keys and values, and yields
/// the next-token logits after each push. Holds at most `context` tokens.
pub struct InferenceSession<'a> {
    params: &'a ParameterSet,
    layout: Layout,
    keys: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    len: usize,
    logits: Vec<f64>,
}

impl<'a> InferenceSession<'a> {
    pub fn new(params: &'a ParameterSet) -> Self {
        let cfg = params.config();
        let cap = cfg.context * cfg.dim;
        Self {
            params,
            layout: params.layout(),
            keys: (0..cfg.layers).map(|_| Vec::with_capacity(cap)).collect(),
            values: (0..cfg.layers).map(|_| Vec::with_capacity(cap)).collect(),
            len: 0,
            logits: vec![0.0; cfg.vocab],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_full(&self) -> bool {
        self.len == self.params.config().context
    }

    pub fn reset(&mut self) {
        self.keys.iter_mut().for_each(Vec::clear);
        self.values.iter_mut().for_each(Vec::clear);
        self.len = 0;
    }

    /// Logits produced by the most recent push.
    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    /// Append `token` at the next position and return the logits for the
    /// token that follows it.
    pub fn push(&mut self, token: u32) -> Result<&[f64]> {
        let cfg = self.params.config();
        if token as usize >= cfg.vocab {
            return Err(Error::Domain(format!(
                "token {token} outside vocabulary of size {}",
                cfg.vocab
            )));
        }
        if self.is_full() {
            return Err(Error::Length(format!(
                "session already holds the full context of {}",
                cfg.context
            )));
        }
        let w = self.params.data();
        let (d, v, nh) = (cfg.dim, cfg.vocab, cfg.heads);
        let dh = cfg.head_dim();
        let scale = 1.0 / (dh as f64).sqrt();
        let pos = self.len;

        let mut x = vec![0.0; d];
        embed(self.params, &self.layout, token, pos, &mut x);
        let mut xhat = vec![0.0; d];
        let mut h = vec![0.0; d];
        let mut rstd = [0.0];
        let mut qkv = vec![0.0; 3 * d];
        let mut att = vec![0.0; d];
        let mut y = vec![0.0; d];
        let mut fc = vec![0.0; 4 * d];
        let mut scores = vec![0.0; pos + 1];

        for (l, off) in self.layout.layers.iter().enumerate() {
            ops::layer_norm(
                1,
                d,
                &x,
                &w[off.ln1_g..off.ln1_g + d],
                &w[off.ln1_b..off.ln1_b + d],
                &mut xhat,
                &mut h,
                &mut rstd,
            );
            ops::vecmat_bias(&h, &w[off.w_qkv..], 3 * d, &w[off.b_qkv..], &mut qkv);
            self.keys[l].extend_from_slice(&qkv[d..2 * d]);
            self.values[l].extend_from_slice(&qkv[2 * d..]);
            let (keys, values) = (&self.keys[l], &self.values[l]);

            att.fill(0.0);
            for hd in 0..nh {
                let q = &qkv[hd * dh..(hd + 1) * dh];
                for (j, sc) in scores.iter_mut().enumerate() {
                    let k = &keys[j * d + hd * dh..j * d + (hd + 1) * dh];
                    *sc = q.iter().zip(k).map(|(a, b)| a * b).sum::<f64>() * scale;
                }
                ops::softmax_in_place(&mut scores);
                let out = &mut att[hd * dh..(hd + 1) * dh];
                for (j, &p) in scores.iter().enumerate() {
                    let vj = &values[j * d + hd * dh..j * d + (hd + 1) * dh];
                    for (o, vv) in out.iter_mut().zip(vj) {
                        *o += p * vv;
                    }
                }
            }
            ops::vecmat_bias(&att, &w[off.w_o..], d, &w[off.b_o..], &mut y);
            x.iter_mut().zip(&y).for_each(|(a, b)| *a += b);

            ops::layer_norm(
                1,
                d,
                &x,
                &w[off.ln2_g..off.ln2_g + d],
                &w[off.ln2_b..off.ln2_b + d],
                &mut xhat,
                &mut h,
                &mut rstd,
            );
            ops::vecmat_bias(&h, &w[off.w_fc..], 4 * d, &w[off.b_fc..], &mut fc);
            fc.iter_mut().for_each(|z| *z = ops::gelu(*z));
            ops::vecmat_bias(&fc, &w[off.w_proj..], d, &w[off.b_proj..], &mut y);
            x.iter_mut().zip(&y).for_each(|(a, b)| *a += b);
        }

        ops::layer_norm(
            1,
            d,
            &x,
            &w[self.layout.lnf_g..self.layout.lnf_g + d],
            &w[self.layout.lnf_b..self.layout.lnf_b + d],
            &mut xhat,
            &mut h,
            &mut rstd,
        );
        match self.layout.head {
            None => {
                let emb = &w[self.layout.tok_emb..self.layout.tok_emb + v * d];
                for (z, row) in self.logits.iter_mut().zip(emb.chunks_exact(d)) {
                    *z = h.iter().zip(row).map(|(a, b)| a * b).sum();
                }
            }
            Some(head) => {
                let zeros = vec![0.0; v];
                ops::vecmat_bias(&h, &w[head..], v, &zeros, &mut self.logits);
            }
        }
        self.len += 1;
        Ok(&self.logits)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{forward, init_model, ModelConfig, PositionEncoding};
    use super::*;

    fn check(cfg: ModelConfig) {
        let params = init_model(&cfg, 9).unwrap();
        let tokens = [3u32, 0, 7, 7, 2, 9, 1, 4];
        let full = forward(&params, &tokens).unwrap();
        let mut session = InferenceSession::new(&params);
        for (t, &tok) in tokens.iter().enumerate() {
            let row = session.push(tok).unwrap().to_vec();
            for (a, b) in row.iter().zip(full.row(t)) {
                assert!((a - b).abs() < 1e-10, "position {t}: {a} vs {b}");
            }
        }
        assert!(session.is_full());
        assert!(matches!(session.push(0), Err(Error::Length(_))));
        session.reset();
        assert!(session.is_empty());
    }

    #[test]
    fn cached_decoding_matches_full_forward() {
        let base = ModelConfig {
            vocab: 10,
            context: 8,
            dim: 12,
            layers: 2,
            heads: 3,
            dropout: 0.0,
            tie_embeddings: true,
            position: PositionEncoding::Learned,
        };
        check(base.clone());
        check(ModelConfig {
            tie_embeddings: false,
            position: PositionEncoding::Sinusoidal,
            ..base
        });
    }
}
