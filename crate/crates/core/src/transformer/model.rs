//! Full-sequence forward pass, loss, and hand-written backward pass.

use super::ops::{self, DropSite};
use super::{Layout, ModelConfig, ParameterSet, PositionEncoding};
use crate::error::{Error, Result};
use crate::rng;

/// Next-token logits, one row of `vocab` values per input position.
#[derive(Clone, Debug, PartialEq)]
pub struct Logits {
    seq: usize,
    vocab: usize,
    data: Vec<f64>,
}

impl Logits {
    pub fn seq_len(&self) -> usize {
        self.seq
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.vocab..(t + 1) * self.vocab]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn from_rows(seq: usize, vocab: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != seq * vocab {
            return Err(Error::Shape(format!(
                "{} logits for {seq} positions × {vocab} classes",
                data.len()
            )));
        }
        Ok(Self { seq, vocab, data })
    }
}

/// Attention probabilities captured during a forward pass.
#[derive(Clone, Debug)]
pub struct Trace {
    pub seq: usize,
    pub heads: usize,
    /// Per layer, `heads × seq × seq` row-major; entries above the
    /// diagonal are exactly zero.
    pub attention: Vec<Vec<f64>>,
}

struct LayerCache {
    xhat1: Vec<f64>,
    rstd1: Vec<f64>,
    h1: Vec<f64>,
    qkv: Vec<f64>,
    probs: Vec<f64>,
    att: Vec<f64>,
    mask_att: Option<Vec<f64>>,
    xhat2: Vec<f64>,
    rstd2: Vec<f64>,
    h2: Vec<f64>,
    fc: Vec<f64>,
    act: Vec<f64>,
    mask_mlp: Option<Vec<f64>>,
}

struct ForwardCache {
    seq: usize,
    mask_emb: Option<Vec<f64>>,
    layers: Vec<LayerCache>,
    xhatf: Vec<f64>,
    rstdf: Vec<f64>,
    hf: Vec<f64>,
    logits: Vec<f64>,
}

pub(crate) fn check_tokens(cfg: &ModelConfig, tokens: &[u32]) -> Result<()> {
    if tokens.is_empty() {
        return Err(Error::Length("empty token sequence".into()));
    }
    if tokens.len() > cfg.context {
        return Err(Error::Length(format!(
            "sequence of {} tokens exceeds context {}",
            tokens.len(),
            cfg.context
        )));
    }
    if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= cfg.vocab) {
        return Err(Error::Domain(format!("token {bad} outside vocabulary of size {}", cfg.vocab)));
    }
    Ok(())
}

/// Write `wte[token] + position(pos)` into `out`.
pub(crate) fn embed(params: &ParameterSet, layout: &Layout, token: u32, pos: usize, out: &mut [f64]) {
    let d = params.config().dim;
    let data = params.data();
    let te = layout.tok_emb + token as usize * d;
    match layout.pos_emb {
        Some(pe) => {
            let pe = pe + pos * d;
            for j in 0..d {
                out[j] = data[te + j] + data[pe + j];
            }
        }
        None => {
            ops::sinusoid(pos, out);
            for j in 0..d {
                out[j] += data[te + j];
            }
        }
    }
}

fn run_forward(params: &ParameterSet, tokens: &[u32], dropout_seed: Option<u64>) -> Result<ForwardCache> {
    let cfg = params.config();
    check_tokens(cfg, tokens)?;
    let layout = params.layout();
    let w = params.data();
    let (s, d, v, nh) = (tokens.len(), cfg.dim, cfg.vocab, cfg.heads);
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let drop = match dropout_seed {
        Some(seed) if cfg.dropout > 0.0 => Some(seed),
        _ => None,
    };

    let mut x = vec![0.0; s * d];
    for (t, &tok) in tokens.iter().enumerate() {
        embed(params, &layout, tok, t, &mut x[t * d..(t + 1) * d]);
    }
    let mask_emb = drop.map(|seed| ops::dropout_mask(seed, 0, DropSite::Embedding, s, d, cfg.dropout));
    if let Some(m) = &mask_emb {
        x.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
    }

    let mut layers = Vec::with_capacity(cfg.layers);
    for (l, off) in layout.layers.iter().enumerate() {
        let mut xhat1 = vec![0.0; s * d];
        let mut h1 = vec![0.0; s * d];
        let mut rstd1 = vec![0.0; s];
        ops::layer_norm(
            s,
            d,
            &x,
            &w[off.ln1_g..off.ln1_g + d],
            &w[off.ln1_b..off.ln1_b + d],
            &mut xhat1,
            &mut h1,
            &mut rstd1,
        );
        let mut qkv = vec![0.0; s * 3 * d];
        ops::matmul(s, d, 3 * d, &h1, &w[off.w_qkv..off.w_qkv + 3 * d * d], &mut qkv, 0.0);
        ops::add_bias(s, 3 * d, &mut qkv, &w[off.b_qkv..off.b_qkv + 3 * d]);

        let mut probs = vec![0.0; nh * s * s];
        let mut att = vec![0.0; s * d];
        for h in 0..nh {
            for t in 0..s {
                let q = &qkv[t * 3 * d + h * dh..t * 3 * d + (h + 1) * dh];
                let row = &mut probs[(h * s + t) * s..(h * s + t) * s + t + 1];
                for (j, r) in row.iter_mut().enumerate() {
                    let k = &qkv[j * 3 * d + d + h * dh..j * 3 * d + d + (h + 1) * dh];
                    *r = dot(q, k) * scale;
                }
                ops::softmax_in_place(row);
                let out = &mut att[t * d + h * dh..t * d + (h + 1) * dh];
                for (j, &p) in row.iter().enumerate() {
                    let vj = &qkv[j * 3 * d + 2 * d + h * dh..j * 3 * d + 2 * d + (h + 1) * dh];
                    for (o, vv) in out.iter_mut().zip(vj) {
                        *o += p * vv;
                    }
                }
            }
        }
        let mut y = vec![0.0; s * d];
        ops::matmul(s, d, d, &att, &w[off.w_o..off.w_o + d * d], &mut y, 0.0);
        ops::add_bias(s, d, &mut y, &w[off.b_o..off.b_o + d]);
        let mask_att = drop.map(|seed| ops::dropout_mask(seed, l + 1, DropSite::Attention, s, d, cfg.dropout));
        match &mask_att {
            Some(m) => x.iter_mut().zip(y.iter().zip(m)).for_each(|(a, (b, c))| *a += b * c),
            None => x.iter_mut().zip(&y).for_each(|(a, b)| *a += b),
        }

        let mut xhat2 = vec![0.0; s * d];
        let mut h2 = vec![0.0; s * d];
        let mut rstd2 = vec![0.0; s];
        ops::layer_norm(
            s,
            d,
            &x,
            &w[off.ln2_g..off.ln2_g + d],
            &w[off.ln2_b..off.ln2_b + d],
            &mut xhat2,
            &mut h2,
            &mut rstd2,
        );
        let mut fc = vec![0.0; s * 4 * d];
        ops::matmul(s, d, 4 * d, &h2, &w[off.w_fc..off.w_fc + 4 * d * d], &mut fc, 0.0);
        ops::add_bias(s, 4 * d, &mut fc, &w[off.b_fc..off.b_fc + 4 * d]);
        let act: Vec<f64> = fc.iter().map(|&z| ops::gelu(z)).collect();
        let mut y2 = vec![0.0; s * d];
        ops::matmul(s, 4 * d, d, &act, &w[off.w_proj..off.w_proj + 4 * d * d], &mut y2, 0.0);
        ops::add_bias(s, d, &mut y2, &w[off.b_proj..off.b_proj + d]);
        let mask_mlp = drop.map(|seed| ops::dropout_mask(seed, l + 1, DropSite::Mlp, s, d, cfg.dropout));
        match &mask_mlp {
            Some(m) => x.iter_mut().zip(y2.iter().zip(m)).for_each(|(a, (b, c))| *a += b * c),
            None => x.iter_mut().zip(&y2).for_each(|(a, b)| *a += b),
        }

        layers.push(LayerCache {
            xhat1,
            rstd1,
            h1,
            qkv,
            probs,
            att,
            mask_att,
            xhat2,
            rstd2,
            h2,
            fc,
            act,
            mask_mlp,
        });
    }

    let mut xhatf = vec![0.0; s * d];
    let mut hf = vec![0.0; s * d];
    let mut rstdf = vec![0.0; s];
    ops::layer_norm(
        s,
        d,
        &x,
        &w[layout.lnf_g..layout.lnf_g + d],
        &w[layout.lnf_b..layout.lnf_b + d],
        &mut xhatf,
        &mut hf,
        &mut rstdf,
    );
    let mut logits = vec![0.0; s * v];
    match layout.head {
        None => ops::matmul_nt(s, d, v, &hf, &w[layout.tok_emb..layout.tok_emb + v * d], &mut logits, 0.0),
        Some(head) => ops::matmul(s, d, v, &hf, &w[head..head + d * v], &mut logits, 0.0),
    }

    Ok(ForwardCache {
        seq: s,
        mask_emb,
        layers,
        xhatf,
        rstdf,
        hf,
        logits,
    })
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Inference-mode logits for every position of `tokens`.
pub fn forward(params: &ParameterSet, tokens: &[u32]) -> Result<Logits> {
    let cache = run_forward(params, tokens, None)?;
    Ok(Logits {
        seq: cache.seq,
        vocab: params.config().vocab,
        data: cache.logits,
    })
}

/// [`forward`] that also returns the attention probabilities.
pub fn forward_traced(params: &ParameterSet, tokens: &[u32]) -> Result<(Logits, Trace)> {
    let cache = run_forward(params, tokens, None)?;
    let trace = Trace {
        seq: cache.seq,
        heads: params.config().heads,
        attention: cache.layers.iter().map(|l| l.probs.clone()).collect(),
    };
    Ok((
        Logits {
            seq: cache.seq,
            vocab: params.config().vocab,
            data: cache.logits,
        },
        trace,
    ))
}

/// Mean next-token cross-entropy; `targets[t]` is the token after input `t`.
pub fn cross_entropy_loss(logits: &Logits, targets: &[u32]) -> Result<f64> {
    if targets.len() != logits.seq {
        return Err(Error::Length(format!(
            "{} targets for {} positions",
            targets.len(),
            logits.seq
        )));
    }
    let mut total = 0.0;
    for (t, &y) in targets.iter().enumerate() {
        if y as usize >= logits.vocab {
            return Err(Error::Domain(format!("target {y} outside vocabulary")));
        }
        total += nll(logits.row(t), y as usize);
    }
    Ok(total / targets.len() as f64)
}

fn nll(row: &[f64], target: usize) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - row[target]
}

/// Exact gradient of the mean cross-entropy of one sequence.
///
/// With `dropout_seed = Some(_)` and a positive dropout rate the training
/// graph (with its deterministic masks) is differentiated.
pub fn gradients(params: &ParameterSet, tokens: &[u32], targets: &[u32], dropout_seed: Option<u64>) -> Result<ParameterSet> {
    let (_, grads) = loss_and_gradients(params, &[(tokens, targets)], dropout_seed)?;
    Ok(grads)
}

/// Mean loss over every position of every sequence in `batch`, with its
/// gradient. Sequence `b` uses dropout seed `hash(dropout_seed, b)`.
pub fn loss_and_gradients(
    params: &ParameterSet,
    batch: &[(&[u32], &[u32])],
    dropout_seed: Option<u64>,
) -> Result<(f64, ParameterSet)> {
    let cfg = params.config();
    let total_positions: usize = batch.iter().map(|(x, _)| x.len()).sum();
    if total_positions == 0 {
        return Err(Error::Length("empty batch".into()));
    }
    let mut grads = ParameterSet::zeros(cfg)?;
    let mut loss = 0.0;
    let norm = 1.0 / total_positions as f64;
    for (b, (inputs, targets)) in batch.iter().enumerate() {
        if inputs.len() != targets.len() {
            return Err(Error::Length(format!(
                "{} inputs with {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t as usize >= cfg.vocab) {
            return Err(Error::Domain(format!("target {bad} outside vocabulary")));
        }
        let seed = dropout_seed.map(|s| rng::keyed_u64(&[s, b as u64]));
        let cache = run_forward(params, inputs, seed)?;
        // dlogits = (softmax − onehot) / N
        let v = cfg.vocab;
        let mut dlogits = cache.logits.clone();
        for (t, &y) in targets.iter().enumerate() {
            let row = &mut dlogits[t * v..(t + 1) * v];
            loss += nll(&cache.logits[t * v..(t + 1) * v], y as usize);
            ops::softmax_in_place(row);
            row[y as usize] -= 1.0;
            row.iter_mut().for_each(|g| *g *= norm);
        }
        backward(params, inputs, &cache, &dlogits, &mut grads);
    }
    Ok((loss * norm, grads))
}

fn backward(params: &ParameterSet, tokens: &[u32], cache: &ForwardCache, dlogits: &[f64], grads: &mut ParameterSet) {
    let cfg = params.config();
    let layout = params.layout();
    let w = params.data();
    let g = grads.data_mut();
    let (s, d, v, nh) = (cache.seq, cfg.dim, cfg.vocab, cfg.heads);
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    // head
    let mut dhf = vec![0.0; s * d];
    match layout.head {
        None => {
            let emb = layout.tok_emb..layout.tok_emb + v * d;
            ops::matmul(s, v, d, dlogits, &w[emb.clone()], &mut dhf, 0.0);
            ops::matmul_tn(v, s, d, dlogits, &cache.hf, &mut g[emb], 1.0);
        }
        Some(head) => {
            ops::matmul_nt(s, v, d, dlogits, &w[head..head + d * v], &mut dhf, 0.0);
            ops::matmul_tn(d, s, v, &cache.hf, dlogits, &mut g[head..head + d * v], 1.0);
        }
    }
    let mut dx = vec![0.0; s * d];
    {
        let (dgam, dbet) = split_two(g, layout.lnf_g, layout.lnf_b, d);
        ops::layer_norm_backward(
            s,
            d,
            &dhf,
            &cache.xhatf,
            &cache.rstdf,
            &w[layout.lnf_g..layout.lnf_g + d],
            dgam,
            dbet,
            &mut dx,
        );
    }

    for (l, off) in layout.layers.iter().enumerate().rev() {
        let lc = &cache.layers[l];

        // MLP residual branch
        let dy2: Vec<f64> = match &lc.mask_mlp {
            Some(m) => dx.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => dx.clone(),
        };
        ops::accumulate_colsum(s, d, &dy2, &mut g[off.b_proj..off.b_proj + d]);
        ops::matmul_tn(4 * d, s, d, &lc.act, &dy2, &mut g[off.w_proj..off.w_proj + 4 * d * d], 1.0);
        let mut dact = vec![0.0; s * 4 * d];
        ops::matmul_nt(s, d, 4 * d, &dy2, &w[off.w_proj..off.w_proj + 4 * d * d], &mut dact, 0.0);
        for (da, &z) in dact.iter_mut().zip(&lc.fc) {
            *da *= ops::gelu_grad(z);
        }
        ops::accumulate_colsum(s, 4 * d, &dact, &mut g[off.b_fc..off.b_fc + 4 * d]);
        ops::matmul_tn(d, s, 4 * d, &lc.h2, &dact, &mut g[off.w_fc..off.w_fc + 4 * d * d], 1.0);
        let mut dh2 = vec![0.0; s * d];
        ops::matmul_nt(s, 4 * d, d, &dact, &w[off.w_fc..off.w_fc + 4 * d * d], &mut dh2, 0.0);
        {
            let (dgam, dbet) = split_two(g, off.ln2_g, off.ln2_b, d);
            ops::layer_norm_backward(
                s,
                d,
                &dh2,
                &lc.xhat2,
                &lc.rstd2,
                &w[off.ln2_g..off.ln2_g + d],
                dgam,
                dbet,
                &mut dx,
            );
        }

        // attention residual branch
        let dy1: Vec<f64> = match &lc.mask_att {
            Some(m) => dx.iter().zip(m).map(|(a, b)| a * b).collect(),
            None => dx.clone(),
        };
        ops::accumulate_colsum(s, d, &dy1, &mut g[off.b_o..off.b_o + d]);
        ops::matmul_tn(d, s, d, &lc.att, &dy1, &mut g[off.w_o..off.w_o + d * d], 1.0);
        let mut datt = vec![0.0; s * d];
        ops::matmul_nt(s, d, d, &dy1, &w[off.w_o..off.w_o + d * d], &mut datt, 0.0);

        let mut dqkv = vec![0.0; s * 3 * d];
        let mut dp = vec![0.0; s];
        for h in 0..nh {
            for t in 0..s {
                let row = &lc.probs[(h * s + t) * s..(h * s + t) * s + t + 1];
                let dout = &datt[t * d + h * dh..t * d + (h + 1) * dh];
                let mut weighted = 0.0;
                for j in 0..=t {
                    let vj = j * 3 * d + 2 * d + h * dh;
                    dp[j] = dot(dout, &lc.qkv[vj..vj + dh]);
                    weighted += dp[j] * row[j];
                    for c in 0..dh {
                        dqkv[vj + c] += row[j] * dout[c];
                    }
                }
                let qi = t * 3 * d + h * dh;
                for j in 0..=t {
                    let ds = row[j] * (dp[j] - weighted) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    let kj = j * 3 * d + d + h * dh;
                    for c in 0..dh {
                        dqkv[qi + c] += ds * lc.qkv[kj + c];
                        dqkv[kj + c] += ds * lc.qkv[qi + c];
                    }
                }
            }
        }
        ops::accumulate_colsum(s, 3 * d, &dqkv, &mut g[off.b_qkv..off.b_qkv + 3 * d]);
        ops::matmul_tn(d, s, 3 * d, &lc.h1, &dqkv, &mut g[off.w_qkv..off.w_qkv + 3 * d * d], 1.0);
        let mut dh1 = vec![0.0; s * d];
        ops::matmul_nt(s, 3 * d, d, &dqkv, &w[off.w_qkv..off.w_qkv + 3 * d * d], &mut dh1, 0.0);
        {
            let (dgam, dbet) = split_two(g, off.ln1_g, off.ln1_b, d);
            ops::layer_norm_backward(
                s,
                d,
                &dh1,
                &lc.xhat1,
                &lc.rstd1,
                &w[off.ln1_g..off.ln1_g + d],
                dgam,
                dbet,
                &mut dx,
            );
        }
    }

    if let Some(m) = &cache.mask_emb {
        dx.iter_mut().zip(m).for_each(|(a, b)| *a *= b);
    }
    for (t, &tok) in tokens.iter().enumerate() {
        let row = &dx[t * d..(t + 1) * d];
        let te = layout.tok_emb + tok as usize * d;
        for j in 0..d {
            g[te + j] += row[j];
        }
        if let Some(pe) = layout.pos_emb {
            let pe = pe + t * d;
            for j in 0..d {
                g[pe + j] += row[j];
            }
        }
    }
    debug_assert!(cfg.position == PositionEncoding::Learned || layout.pos_emb.is_none());
}

/// Two disjoint mutable `len`-slices at offsets `a < b`.
fn split_two(g: &mut [f64], a: usize, b: usize, len: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(a + len <= b);
    let (lo, hi) = g.split_at_mut(b);
    (&mut lo[a..a + len], &mut hi[..len])
}
