//! Decoder-only causal transformer over grid tokens.
//!
//! GPT-2 layout: learned token and position embeddings, pre-norm residual
//! blocks (masked multi-head self-attention, 4× feed-forward with tanh
//! GELU), a final layer norm and a vocabulary head tied to the token
//! embedding by default. Everything is `f64` and the backward pass is
//! written out by hand.

mod cache;
mod model;
mod ops;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub use cache::InferenceSession;
pub use model::{cross_entropy_loss, forward, forward_traced, gradients, loss_and_gradients, Logits, Trace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionEncoding {
    /// Trainable `C × D` table.
    Learned,
    /// Fixed sinusoids; contributes no parameters.
    Sinusoidal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab: usize,
    pub context: usize,
    pub dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub dropout: f64,
    pub tie_embeddings: bool,
    #[serde(default = "default_position")]
    pub position: PositionEncoding,
}

fn default_position() -> PositionEncoding {
    PositionEncoding::Learned
}

impl ModelConfig {
    /// The desk-scale default: 4 layers, width 128, context 256, 4 heads.
    pub fn desk(vocab: usize) -> Self {
        Self {
            vocab,
            context: 256,
            dim: 128,
            layers: 4,
            heads: 4,
            dropout: 0.1,
            tie_embeddings: true,
            position: PositionEncoding::Learned,
        }
    }

    /// GPT-2 small dimensions: 12 layers, width 768, context 1024.
    pub fn full_scale(vocab: usize) -> Self {
        Self {
            vocab,
            context: 1024,
            dim: 768,
            layers: 12,
            heads: 12,
            dropout: 0.1,
            tie_embeddings: true,
            position: PositionEncoding::Learned,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        // A single-token vocabulary is allowed: it has zero loss and zero
        // gradient, which makes it a handy degenerate case.
        if self.vocab == 0 {
            return Err(Error::Domain("vocabulary must be non-empty".into()));
        }
        if self.context == 0 || self.dim == 0 || self.layers == 0 || self.heads == 0 {
            return Err(Error::Domain(format!("degenerate model config {self:?}")));
        }
        if !self.dim.is_multiple_of(self.heads) {
            return Err(Error::Domain(format!(
                "width {} not divisible by {} heads",
                self.dim, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Domain(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }

    /// Closed-form parameter count.
    pub fn parameter_count(&self) -> usize {
        let (v, c, d, l) = (self.vocab, self.context, self.dim, self.layers);
        let positions = match self.position {
            PositionEncoding::Learned => c * d,
            PositionEncoding::Sinusoidal => 0,
        };
        let head = if self.tie_embeddings { 0 } else { v * d };
        v * d + positions + l * (12 * d * d + 13 * d) + 2 * d + head
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Embedding,
    Weight,
    /// Output projections feeding the residual stream.
    ResidualWeight,
    Bias,
    NormScale,
    NormShift,
}

impl Role {
    /// Weight decay applies to matrices and embeddings only.
    pub fn decays(self) -> bool {
        matches!(self, Role::Embedding | Role::Weight | Role::ResidualWeight)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub role: Role,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct LayerOffsets {
    pub ln1_g: usize,
    pub ln1_b: usize,
    pub w_qkv: usize,
    pub b_qkv: usize,
    pub w_o: usize,
    pub b_o: usize,
    pub ln2_g: usize,
    pub ln2_b: usize,
    pub w_fc: usize,
    pub b_fc: usize,
    pub w_proj: usize,
    pub b_proj: usize,
}

/// Where each tensor lives inside the flat parameter buffer.
#[derive(Clone, Debug)]
pub struct Layout {
    tensors: Vec<TensorInfo>,
    total: usize,
    pub(crate) tok_emb: usize,
    pub(crate) pos_emb: Option<usize>,
    pub(crate) layers: Vec<LayerOffsets>,
    pub(crate) lnf_g: usize,
    pub(crate) lnf_b: usize,
    pub(crate) head: Option<usize>,
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let (v, c, d) = (cfg.vocab, cfg.context, cfg.dim);
        let mut tensors = Vec::new();
        let mut total = 0;
        let mut push = |name: String, shape: Vec<usize>, role: Role| -> usize {
            let offset = total;
            total += shape.iter().product::<usize>();
            tensors.push(TensorInfo {
                name,
                shape,
                offset,
                role,
            });
            offset
        };
        let tok_emb = push("wte".into(), vec![v, d], Role::Embedding);
        let pos_emb = match cfg.position {
            PositionEncoding::Learned => Some(push("wpe".into(), vec![c, d], Role::Embedding)),
            PositionEncoding::Sinusoidal => None,
        };
        let mut layers = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let p = |s: &str| format!("h.{l}.{s}");
            layers.push(LayerOffsets {
                ln1_g: push(p("ln_1.weight"), vec![d], Role::NormScale),
                ln1_b: push(p("ln_1.bias"), vec![d], Role::NormShift),
                w_qkv: push(p("attn.c_attn.weight"), vec![d, 3 * d], Role::Weight),
                b_qkv: push(p("attn.c_attn.bias"), vec![3 * d], Role::Bias),
                w_o: push(p("attn.c_proj.weight"), vec![d, d], Role::ResidualWeight),
                b_o: push(p("attn.c_proj.bias"), vec![d], Role::Bias),
                ln2_g: push(p("ln_2.weight"), vec![d], Role::NormScale),
                ln2_b: push(p("ln_2.bias"), vec![d], Role::NormShift),
                w_fc: push(p("mlp.c_fc.weight"), vec![d, 4 * d], Role::Weight),
                b_fc: push(p("mlp.c_fc.bias"), vec![4 * d], Role::Bias),
                w_proj: push(p("mlp.c_proj.weight"), vec![4 * d, d], Role::ResidualWeight),
                b_proj: push(p("mlp.c_proj.bias"), vec![d], Role::Bias),
            });
        }
        let lnf_g = push("ln_f.weight".into(), vec![d], Role::NormScale);
        let lnf_b = push("ln_f.bias".into(), vec![d], Role::NormShift);
        let head = if cfg.tie_embeddings {
            None
        } else {
            Some(push("lm_head.weight".into(), vec![d, v], Role::Weight))
        };
        Self {
            tensors,
            total,
            tok_emb,
            pos_emb,
            layers,
            lnf_g,
            lnf_b,
            head,
        }
    }

    pub fn tensors(&self) -> &[TensorInfo] {
        &self.tensors
    }

    pub fn total(&self) -> usize {
        self.total
    }
}

/// All learnable tensors of a model, stored contiguously in layout order.
///
/// Gradients use the same type, so optimizer code can zip the two buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSet {
    config: ModelConfig,
    data: Vec<f64>,
}

impl ParameterSet {
    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config: config.clone(),
            data: vec![0.0; Layout::new(config).total()],
        })
    }

    pub fn from_data(config: &ModelConfig, data: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let expected = Layout::new(config).total();
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "{} values for a model with {expected} parameters",
                data.len()
            )));
        }
        Ok(Self {
            config: config.clone(),
            data,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> Layout {
        Layout::new(&self.config)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.layout()
            .tensors()
            .iter()
            .find(|t| t.name == name)
            .map(|t| &self.data[t.range()])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Standard deviation of the weight initializer.
pub const INIT_STD: f64 = 0.02;

/// GPT-2 style initialization: N(0, 0.02) weights and embeddings, residual
/// projections additionally scaled by 1/√(2L), zero biases, unit norms.
pub fn init_model(config: &ModelConfig, seed: u64) -> Result<ParameterSet> {
    let mut params = ParameterSet::zeros(config)?;
    let layout = params.layout();
    let mut rng = rng::stream_rng(seed, 0);
    let base = Normal::new(0.0, INIT_STD).expect("valid normal");
    let residual_scale = 1.0 / (2.0 * config.layers as f64).sqrt();
    for t in layout.tensors() {
        let slice = &mut params.data[t.range()];
        match t.role {
            Role::Embedding | Role::Weight => {
                slice.iter_mut().for_each(|v| *v = base.sample(&mut rng));
            }
            Role::ResidualWeight => {
                slice.iter_mut().for_each(|v| *v = base.sample(&mut rng) * residual_scale);
            }
            Role::NormScale => slice.fill(1.0),
            Role::Bias | Role::NormShift => slice.fill(0.0),
        }
    }
    Ok(params)
}
