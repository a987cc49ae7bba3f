//! Windowing, AdamW, and the training loop.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::checkpoint::{self, Checkpoint, CheckpointHeader};
use crate::rng;
use crate::transformer::{cross_entropy_loss, forward, init_model, loss_and_gradients, ModelConfig, ParameterSet};

/// One training example: `target[t]` is the token after `input[t]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Window {
    pub input: Vec<u32>,
    pub target: Vec<u32>,
}

/// Cut every sequence into windows of `context + 1` tokens starting every
/// `stride` tokens. A sequence too short for a single full window yields
/// one shorter window if it has at least two tokens; otherwise partial
/// tails are dropped.
pub fn make_windows(sequences: &[Vec<u32>], context: usize, stride: usize) -> Result<Vec<Window>> {
    if stride == 0 {
        return Err(Error::Domain("stride must be at least 1".into()));
    }
    if context == 0 {
        return Err(Error::Domain("context must be at least 1".into()));
    }
    let span = context + 1;
    let mut windows = Vec::new();
    for seq in sequences {
        if seq.len() < 2 {
            continue;
        }
        if seq.len() < span {
            windows.push(Window {
                input: seq[..seq.len() - 1].to_vec(),
                target: seq[1..].to_vec(),
            });
            continue;
        }
        let mut start = 0;
        while start + span <= seq.len() {
            let w = &seq[start..start + span];
            windows.push(Window {
                input: w[..context].to_vec(),
                target: w[1..].to_vec(),
            });
            start += stride;
        }
    }
    Ok(windows)
}

/// Windows shuffled by `seed` and grouped into batches of `batch_size`;
/// the last batch may be smaller.
pub fn make_batches(
    sequences: &[Vec<u32>],
    context: usize,
    stride: usize,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<Vec<Window>>> {
    if batch_size == 0 {
        return Err(Error::Domain("batch size must be at least 1".into()));
    }
    let mut windows = make_windows(sequences, context, stride)?;
    windows.shuffle(&mut rng::stream_rng(seed, 0));
    Ok(windows.chunks(batch_size).map(<[Window]>::to_vec).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub hyper: AdamWConfig,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
    decay: Vec<bool>,
}

impl OptimizerState {
    pub fn new(params: &ParameterSet, hyper: AdamWConfig) -> Self {
        let mut decay = vec![false; params.len()];
        for t in params.layout().tensors() {
            decay[t.range()].fill(t.role.decays());
        }
        Self {
            hyper,
            step: 0,
            m: vec![0.0; params.len()],
            v: vec![0.0; params.len()],
            decay,
        }
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }
}

/// One AdamW update with decoupled weight decay (skipped for biases and
/// layer-norm parameters).
pub fn adamw_step(params: &mut ParameterSet, grads: &ParameterSet, state: &mut OptimizerState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "parameters {}, gradients {}, optimizer {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    let step = state.step + 1;
    if grads.data().iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            what: "gradient",
            step: step as usize,
        });
    }
    let h = &state.hyper;
    let bc1 = 1.0 - h.beta1.powi(step as i32);
    let bc2 = 1.0 - h.beta2.powi(step as i32);
    let theta = params.data_mut();
    for i in 0..theta.len() {
        let g = grads.data()[i];
        state.m[i] = h.beta1 * state.m[i] + (1.0 - h.beta1) * g;
        state.v[i] = h.beta2 * state.v[i] + (1.0 - h.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        let decay = if state.decay[i] {
            h.lr * h.weight_decay * theta[i]
        } else {
            0.0
        };
        theta[i] = theta[i] - h.lr * m_hat / (v_hat.sqrt() + h.eps) - decay;
    }
    state.step = step;
    Ok(())
}

/// Scale `grads` so their global L2 norm is at most `max_norm`.
pub fn clip_grad_norm(grads: &mut ParameterSet, max_norm: f64) -> f64 {
    let norm = grads.data().iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.data_mut().iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub steps: usize,
    pub batch_size: usize,
    /// Window start spacing; defaults to the context length.
    pub stride: Option<usize>,
    pub init_seed: u64,
    pub seed: u64,
    /// Evaluate held-out loss every this many steps (0 = only at the end).
    pub eval_interval: usize,
    /// Upper bound on held-out windows per evaluation.
    pub eval_windows: usize,
    /// Write a checkpoint every this many steps (0 = only at the end).
    pub checkpoint_interval: usize,
    pub checkpoint_dir: Option<PathBuf>,
    pub clip_norm: Option<f64>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 1,
            stride: None,
            init_seed: 0,
            seed: 0,
            eval_interval: 0,
            eval_windows: 64,
            checkpoint_interval: 0,
            checkpoint_dir: None,
            clip_norm: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainRun {
    pub model: ModelConfig,
    pub settings: TrainSettings,
    pub params: ParameterSet,
    pub optimizer: OptimizerState,
    /// Training loss of each completed step.
    pub loss_history: Vec<f64>,
    /// `(step, held-out loss)`; step 0 is the untrained model.
    pub eval_history: Vec<(usize, f64)>,
    pub final_eval_loss: Option<f64>,
    pub checkpoints: Vec<PathBuf>,
    pub observed_tokens: Vec<u32>,
}

impl TrainRun {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            header: CheckpointHeader {
                model: self.model.clone(),
                step: self.optimizer.step,
                init_seed: self.settings.init_seed,
                train_seed: self.settings.seed,
                observed_tokens: Some(self.observed_tokens.clone()),
            },
            params: self.params.clone(),
        }
    }

    /// `step,train_loss,eval_loss` rows; eval is blank where not measured.
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("step,train_loss,eval_loss\n");
        let eval_at = |s: usize| self.eval_history.iter().find(|(k, _)| *k == s).map(|(_, l)| *l);
        if let Some(l) = eval_at(0) {
            out.push_str(&format!("0,,{l}\n"));
        }
        for (i, l) in self.loss_history.iter().enumerate() {
            let step = i + 1;
            match eval_at(step) {
                Some(e) => out.push_str(&format!("{step},{l},{e}\n")),
                None => out.push_str(&format!("{step},{l},\n")),
            }
        }
        out
    }
}

/// Mean next-token loss over held-out windows, dropout off.
pub fn evaluate_loss(params: &ParameterSet, windows: &[Window]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for w in windows {
        let logits = forward(params, &w.input)?;
        total += cross_entropy_loss(&logits, &w.target)? * w.input.len() as f64;
        count += w.input.len();
    }
    if count == 0 {
        return Err(Error::Domain("no held-out windows".into()));
    }
    Ok(total / count as f64)
}

pub fn observed_tokens(sequences: &[Vec<u32>]) -> Vec<u32> {
    sequences
        .iter()
        .flatten()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Train from scratch: windows → forward → loss → backward → AdamW.
///
/// Epochs reshuffle with a seed derived from `(seed, epoch)`; dropout masks
/// are keyed by `(seed, step)`. A non-finite loss aborts the run and leaves
/// the last written checkpoint in place.
pub fn train(
    train_sequences: &[Vec<u32>],
    eval_sequences: &[Vec<u32>],
    model: &ModelConfig,
    hyper: &AdamWConfig,
    settings: &TrainSettings,
) -> Result<TrainRun> {
    model.validate()?;
    if let Some(&bad) = train_sequences
        .iter()
        .chain(eval_sequences)
        .flatten()
        .find(|&&t| t as usize >= model.vocab)
    {
        return Err(Error::Domain(format!("token {bad} exceeds model vocabulary {}", model.vocab)));
    }
    let stride = settings.stride.unwrap_or(model.context);
    let eval_windows = {
        let mut w = make_windows(eval_sequences, model.context, model.context)?;
        w.truncate(settings.eval_windows);
        w
    };
    let params = init_model(model, settings.init_seed)?;
    let optimizer = OptimizerState::new(&params, hyper.clone());
    let mut run = TrainRun {
        model: model.clone(),
        settings: settings.clone(),
        params,
        optimizer,
        loss_history: Vec::with_capacity(settings.steps),
        eval_history: Vec::new(),
        final_eval_loss: None,
        checkpoints: Vec::new(),
        observed_tokens: observed_tokens(train_sequences),
    };
    if !eval_windows.is_empty() {
        run.eval_history.push((0, evaluate_loss(&run.params, &eval_windows)?));
    }

    let mut epoch = 0u64;
    let mut batches = Vec::new().into_iter();
    while run.loss_history.len() < settings.steps {
        let batch = match batches.next() {
            Some(b) => b,
            None => {
                let fresh = make_batches(
                    train_sequences,
                    model.context,
                    stride,
                    settings.batch_size,
                    rng::keyed_u64(&[settings.seed, epoch]),
                )?;
                if fresh.is_empty() {
                    return Err(Error::Domain("training data yields no windows".into()));
                }
                epoch += 1;
                batches = fresh.into_iter();
                continue;
            }
        };
        let step = run.loss_history.len() + 1;
        let pairs: Vec<(&[u32], &[u32])> = batch.iter().map(|w| (w.input.as_slice(), w.target.as_slice())).collect();
        let dropout_seed = rng::keyed_u64(&[settings.seed, 0xD409, step as u64]);
        let (loss, mut grads) = loss_and_gradients(&run.params, &pairs, Some(dropout_seed))?;
        if !loss.is_finite() {
            return Err(Error::NonFinite { what: "loss", step });
        }
        if let Some(max) = settings.clip_norm {
            clip_grad_norm(&mut grads, max);
        }
        adamw_step(&mut run.params, &grads, &mut run.optimizer)?;
        run.loss_history.push(loss);

        if settings.eval_interval > 0 && step.is_multiple_of(settings.eval_interval) && !eval_windows.is_empty() {
            let l = evaluate_loss(&run.params, &eval_windows)?;
            log::info!("step {step}: train {loss:.4} eval {l:.4}");
            run.eval_history.push((step, l));
        }
        if settings.checkpoint_interval > 0 && step.is_multiple_of(settings.checkpoint_interval) {
            if let Some(dir) = &settings.checkpoint_dir {
                let path = dir.join(format!("step-{step:06}.ckpt"));
                checkpoint::save(&path, &run.checkpoint())?;
                run.checkpoints.push(path);
            }
        }
    }

    if !eval_windows.is_empty() {
        let step = run.loss_history.len();
        let l = match run.eval_history.last() {
            Some(&(s, l)) if s == step => l,
            _ => {
                let l = evaluate_loss(&run.params, &eval_windows)?;
                run.eval_history.push((step, l));
                l
            }
        };
        run.final_eval_loss = Some(l);
    }
    if let Some(dir) = &settings.checkpoint_dir {
        let path = final_checkpoint_path(dir);
        checkpoint::save(&path, &run.checkpoint())?;
        run.checkpoints.push(path);
    }
    Ok(run)
}

pub fn final_checkpoint_path(dir: &Path) -> PathBuf {
    dir.join("final.ckpt")
}
