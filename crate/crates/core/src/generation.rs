//! Autoregressive continuation: temperature sampling, greedy decoding and
//! masking to the tokens seen in training.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::transformer::{InferenceSession, ParameterSet};

/// What to do once the running sequence no longer fits the context.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "lowercase")]
pub enum ContextPolicy {
    /// Every step sees exactly the last `C - 1` tokens. Exact, but costs a
    /// full window re-encode per token once the context is full.
    Sliding,
    /// When the window is full, restart from the last `keep` tokens and
    /// grow again. Much cheaper; each prediction still sees at least
    /// `keep` tokens of history.
    Refill { keep: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// 0 means greedy argmax.
    pub temperature: f64,
    pub mask_to_observed: bool,
    pub max_new_tokens: usize,
    pub seed: u64,
    pub context: ContextPolicy,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            mask_to_observed: true,
            max_new_tokens: 0,
            seed: 0,
            context: ContextPolicy::Sliding,
        }
    }
}

/// A validated sampler bound to a vocabulary and an optional token mask.
#[derive(Clone, Debug)]
pub struct Sampler {
    config: SamplerConfig,
    allowed: Option<Vec<bool>>,
}

impl Sampler {
    /// `observed` is required when masking is on and ignored otherwise.
    pub fn new(config: SamplerConfig, vocab: usize, observed: Option<&[u32]>) -> Result<Self> {
        if !(config.temperature >= 0.0 && config.temperature.is_finite()) {
            return Err(Error::Domain(format!(
                "temperature must be finite and non-negative, got {}",
                config.temperature
            )));
        }
        let allowed = if config.mask_to_observed {
            let observed =
                observed.ok_or_else(|| Error::Domain("masking requested but no observed-token set is available".into()))?;
            let mut mask = vec![false; vocab];
            for &t in observed {
                *mask
                    .get_mut(t as usize)
                    .ok_or_else(|| Error::Domain(format!("observed token {t} outside vocabulary {vocab}")))? = true;
            }
            if !mask.iter().any(|&m| m) {
                return Err(Error::Domain("observed-token set is empty".into()));
            }
            Some(mask)
        } else {
            None
        };
        Ok(Self { config, allowed })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    /// Next-token probabilities from one row of logits.
    pub fn distribution(&self, logits: &[f64]) -> Result<Vec<f64>> {
        distribution_from_logits(logits, self.config.temperature, self.allowed.as_deref())
    }
}

/// `softmax(z / T)` restricted to `allowed`; `T = 0` is a one-hot on the
/// smallest allowed argmax.
pub fn distribution_from_logits(logits: &[f64], temperature: f64, allowed: Option<&[bool]>) -> Result<Vec<f64>> {
    if let Some(a) = allowed {
        if a.len() != logits.len() {
            return Err(Error::Shape(format!(
                "mask over {} tokens, logits over {}",
                a.len(),
                logits.len()
            )));
        }
    }
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite { what: "logit", step: 0 });
    }
    let ok = |i: usize| allowed.is_none_or(|a| a[i]);
    let mut best: Option<usize> = None;
    for (i, &z) in logits.iter().enumerate() {
        if ok(i) && best.is_none_or(|b| z > logits[b]) {
            best = Some(i);
        }
    }
    let best = best.ok_or_else(|| Error::Domain("no token is allowed".into()))?;
    let mut p = vec![0.0; logits.len()];
    if temperature == 0.0 {
        p[best] = 1.0;
        return Ok(p);
    }
    let top = logits[best] / temperature;
    let mut sum = 0.0;
    for (i, &z) in logits.iter().enumerate() {
        if ok(i) {
            p[i] = (z / temperature - top).exp();
            sum += p[i];
        }
    }
    p.iter_mut().for_each(|v| *v /= sum);
    Ok(p)
}

/// Inverse-CDF draw from `p` given a uniform `u` in [0, 1).
pub fn inverse_cdf(p: &[f64], u: f64) -> u32 {
    let mut cum = 0.0;
    let mut last = 0;
    for (i, &q) in p.iter().enumerate() {
        if q > 0.0 {
            cum += q;
            last = i;
            if u < cum {
                return i as u32;
            }
        }
    }
    last as u32
}

fn check_prefix(params: &ParameterSet, prefix: &[u32], max_len: usize) -> Result<()> {
    if prefix.is_empty() {
        return Err(Error::Domain("prefix must hold at least one token".into()));
    }
    if prefix.len() > max_len {
        return Err(Error::Length(format!(
            "prefix of {} tokens exceeds the limit of {max_len} for context {}",
            prefix.len(),
            params.config().context
        )));
    }
    Ok(())
}

/// Distribution of the token following `prefix`.
pub fn next_token_distribution(params: &ParameterSet, prefix: &[u32], sampler: &Sampler) -> Result<Vec<f64>> {
    check_prefix(params, prefix, params.config().context)?;
    let mut session = InferenceSession::new(params);
    for &t in prefix {
        session.push(t)?;
    }
    sampler.distribution(session.logits())
}

/// `prefix` followed by `max_new_tokens` generated tokens.
pub fn sample_continuation(params: &ParameterSet, prefix: &[u32], sampler: &Sampler) -> Result<Vec<u32>> {
    let context = params.config().context;
    let window = context.saturating_sub(1);
    check_prefix(params, prefix, window)?;
    let cfg = sampler.config();
    if let ContextPolicy::Refill { keep } = cfg.context {
        if keep == 0 || keep > window {
            return Err(Error::Domain(format!("refill keep {keep} must lie in 1..={window}")));
        }
    }
    let mut out = prefix.to_vec();
    out.reserve(cfg.max_new_tokens);
    if cfg.max_new_tokens == 0 {
        return Ok(out);
    }
    let mut rng = rng::stream_rng(cfg.seed, 0);
    let mut session = InferenceSession::new(params);
    for &t in prefix {
        session.push(t)?;
    }
    for i in 0..cfg.max_new_tokens {
        let p = sampler.distribution(session.logits())?;
        let tok = if cfg.temperature == 0.0 {
            p.iter().position(|&q| q == 1.0).expect("one-hot") as u32
        } else {
            inverse_cdf(&p, rng.gen::<f64>())
        };
        out.push(tok);
        if i + 1 == cfg.max_new_tokens {
            break;
        }
        if session.len() < window {
            session.push(tok)?;
            continue;
        }
        let keep = match cfg.context {
            ContextPolicy::Sliding => window,
            ContextPolicy::Refill { keep } => keep,
        };
        session.reset();
        for &t in &out[out.len() - keep..] {
            session.push(t)?;
        }
    }
    Ok(out)
}

/// One continuation per prefix; sequence `i` samples with a seed derived
/// from `(seed, i)`.
pub fn sample_many(params: &ParameterSet, prefixes: &[Vec<u32>], sampler: &Sampler) -> Result<Vec<Vec<u32>>> {
    prefixes
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut s = sampler.clone();
            s.config.seed = rng::keyed_u64(&[sampler.config.seed, i as u64]);
            sample_continuation(params, p, &s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transformer::{forward, init_model, ModelConfig, PositionEncoding};

    fn tiny() -> ParameterSet {
        let cfg = ModelConfig {
            vocab: 7,
            context: 6,
            dim: 8,
            layers: 1,
            heads: 2,
            dropout: 0.0,
            tie_embeddings: true,
            position: PositionEncoding::Learned,
        };
        let mut p = init_model(&cfg, 3).unwrap();
        // larger weights so the distribution is far from uniform
        p.data_mut().iter_mut().for_each(|w| *w *= 20.0);
        p
    }

    fn unmasked(t: f64, n: usize, seed: u64, context: ContextPolicy) -> Sampler {
        Sampler::new(
            SamplerConfig {
                temperature: t,
                mask_to_observed: false,
                max_new_tokens: n,
                seed,
                context,
            },
            7,
            None,
        )
        .unwrap()
    }

    #[test]
    fn softmax_by_hand() {
        let p = distribution_from_logits(&[1.0, 2.0], 1.0, None).unwrap();
        assert!((p[0] - 0.268_941_421_369_995_1).abs() < 1e-12);
        assert!((p[1] - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert_eq!(distribution_from_logits(&[1.0, 2.0], 0.0, None).unwrap(), vec![0.0, 1.0]);
        let u = distribution_from_logits(&[3.5; 4], 1.0, None).unwrap();
        assert!(u.iter().all(|&q| (q - 0.25).abs() < 1e-15));
    }

    #[test]
    fn ties_and_masks() {
        assert_eq!(
            distribution_from_logits(&[2.0, 5.0, 5.0], 0.0, None).unwrap(),
            vec![0.0, 1.0, 0.0]
        );
        let mask = [true, false, true];
        let p = distribution_from_logits(&[1.0, 9.0, 1.0], 1.0, Some(&mask)).unwrap();
        assert_eq!(p[1], 0.0);
        assert!((p[0] - 0.5).abs() < 1e-15);
        assert!(distribution_from_logits(&[1.0], 1.0, Some(&[false])).is_err());
    }

    #[test]
    fn temperature_sharpens() {
        let z = [0.3, -1.0, 2.2, 0.9];
        let mut prev = 0.0f64;
        for t in [5.0, 2.0, 1.0, 0.5, 0.1] {
            let p = distribution_from_logits(&z, t, None).unwrap();
            let top = p.iter().cloned().fold(0.0, f64::max);
            assert!(top >= prev);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prev = top;
        }
    }

    #[test]
    fn next_token_matches_forward() {
        let p = tiny();
        let s = unmasked(1.0, 0, 0, ContextPolicy::Sliding);
        let d = next_token_distribution(&p, &[1, 2, 3], &s).unwrap();
        let logits = forward(&p, &[1, 2, 3]).unwrap();
        let e = distribution_from_logits(logits.row(2), 1.0, None).unwrap();
        assert!(d.iter().zip(&e).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(matches!(next_token_distribution(&p, &[], &s), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_new_tokens_and_long_prefix() {
        let p = tiny();
        let s = unmasked(1.0, 0, 0, ContextPolicy::Sliding);
        assert_eq!(sample_continuation(&p, &[4, 5], &s).unwrap(), vec![4, 5]);
        assert!(matches!(sample_continuation(&p, &[1; 6], &s), Err(Error::Length(_))));
    }

    #[test]
    fn greedy_ignores_seed() {
        let p = tiny();
        let a = sample_continuation(&p, &[1, 2], &unmasked(0.0, 20, 1, ContextPolicy::Sliding)).unwrap();
        let b = sample_continuation(&p, &[1, 2], &unmasked(0.0, 20, 99, ContextPolicy::Sliding)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 22);
    }

    #[test]
    fn sliding_matches_explicit_window_recompute() {
        let p = tiny();
        let s = unmasked(0.0, 15, 0, ContextPolicy::Sliding);
        let got = sample_continuation(&p, &[3], &s).unwrap();
        let mut seq = vec![3u32];
        while seq.len() < got.len() {
            let start = seq.len().saturating_sub(5);
            let logits = forward(&p, &seq[start..]).unwrap();
            let d = distribution_from_logits(logits.row(logits.seq_len() - 1), 0.0, None).unwrap();
            seq.push(d.iter().position(|&q| q == 1.0).unwrap() as u32);
        }
        assert_eq!(got, seq);
    }

    #[test]
    fn sampling_is_seeded_and_masked() {
        let p = tiny();
        let cfg = SamplerConfig {
            temperature: 1.0,
            mask_to_observed: true,
            max_new_tokens: 40,
            seed: 5,
            context: ContextPolicy::Refill { keep: 3 },
        };
        let s = Sampler::new(cfg.clone(), 7, Some(&[1, 4, 6])).unwrap();
        let a = sample_continuation(&p, &[1], &s).unwrap();
        assert_eq!(a, sample_continuation(&p, &[1], &s).unwrap());
        assert!(a[1..].iter().all(|t| [1, 4, 6].contains(t)));
        let s2 = Sampler::new(SamplerConfig { seed: 6, ..cfg }, 7, Some(&[1, 4, 6])).unwrap();
        assert_ne!(a, sample_continuation(&p, &[1], &s2).unwrap());
    }

    #[test]
    fn inverse_cdf_edges() {
        let p = [0.0, 0.25, 0.0, 0.75];
        assert_eq!(inverse_cdf(&p, 0.0), 1);
        assert_eq!(inverse_cdf(&p, 0.2499), 1);
        assert_eq!(inverse_cdf(&p, 0.25), 3);
        assert_eq!(inverse_cdf(&p, 0.999_999_999), 3);
    }
}
