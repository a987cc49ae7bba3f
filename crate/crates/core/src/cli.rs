//! Command-line surface. Every command that writes files also writes a
//! run manifest (`<primary output>.manifest.json`) listing the digests of
//! its inputs and outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::discretization::{fit_grid, Grid};
use crate::dynamics::{generate_dataset, segments, Preset, Split, SystemKind, SystemSpec, Trajectory};
use crate::error::{Error, Result};
use crate::evaluation::{
    self, diff_curve, divergence_time, empirical_distribution, fit_lyapunov, lyapunov_series, DiffCurveSettings,
    DivergenceSettings, WassersteinRow, WindowMode,
};
use crate::generation::{sample_many, ContextPolicy, Sampler, SamplerConfig};
use crate::io::manifest::{manifest_path, RunManifest};
use crate::io::report::ReportBody;
use crate::io::tokens::TokenFile;
use crate::io::{self, checkpoint, detect_kind, FileKind};
use crate::protocols::{self, PlanOptions, Protocol};
use crate::training::{self, AdamWConfig, TrainSettings};
use crate::transformer::{ModelConfig, PositionEncoding};

#[derive(Debug, Parser)]
#[command(name = "dyntok", version, about = "Chaotic dynamics as discrete-token language modeling")]
pub struct Cli {
    /// Accepted for explicitness; every command runs deterministically.
    #[arg(long, global = true)]
    pub deterministic: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate trajectories of a preset system.
    Simulate(SimulateArgs),
    /// Fit a uniform grid to trajectory files.
    FitGrid(FitGridArgs),
    /// Encode trajectories into token sequences.
    Encode(EncodeArgs),
    /// Train a model from a TOML config.
    Train(TrainArgs),
    /// Continue token sequences with a trained model.
    Generate(GenerateArgs),
    /// Evaluate generated trajectories.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Print the header of any project file.
    Inspect(InspectArgs),
    /// Print (or run) the command sequence of a named experiment.
    Protocol(ProtocolArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub preset: String,
    #[arg(long, default_value = "train")]
    pub split: String,
    /// Number of trajectories (default: the preset's count for the split).
    #[arg(long)]
    pub count: Option<usize>,
    /// Steps per trajectory; `length + 1` states are stored.
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, default_value_t = crate::dynamics::DEFAULT_SUBSTEPS)]
    pub substeps: usize,
    #[arg(long, default_value_t = 0)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "simulated.traj")]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FitGridArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub data: Vec<PathBuf>,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = crate::discretization::DEFAULT_MARGIN)]
    pub margin: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EncodeArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextArg {
    Sliding,
    Refill,
}

#[derive(Debug, Args, Serialize)]
pub struct ContextOpts {
    /// Policy once the context is full.
    #[arg(long, value_enum, default_value_t = ContextArg::Sliding)]
    pub context: ContextArg,
    /// Tokens kept when refilling (default: half the context).
    #[arg(long)]
    pub keep: Option<usize>,
}

impl ContextOpts {
    fn policy(&self, context: usize) -> ContextPolicy {
        match self.context {
            ContextArg::Sliding => ContextPolicy::Sliding,
            ContextArg::Refill => ContextPolicy::Refill {
                keep: self.keep.unwrap_or(context / 2).max(1),
            },
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub grid: PathBuf,
    /// Token or trajectory file whose sequences supply the prefixes.
    #[arg(long)]
    pub prefix_from: PathBuf,
    /// Use only the first this many sequences.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long)]
    pub new_tokens: usize,
    #[arg(long, default_value_t = 0.0)]
    pub temperature: f64,
    /// Let the model emit tokens never seen in training.
    #[arg(long)]
    pub no_mask: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub context: ContextOpts,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the cell centers as trajectories.
    #[arg(long)]
    pub decoded: Option<PathBuf>,
    /// Step recorded in the decoded trajectories.
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Wasserstein distances between state distributions.
    Wasserstein(WassersteinArgs),
    /// Largest Lyapunov exponent of a discrete map from tokens.
    Lyapunov(LyapunovArgs),
    /// Divergence time of a generated sequence.
    Divergence(DivergenceArgs),
    /// Mean distance to reference over time, model vs paired true runs.
    Diffcurve(DiffCurveArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct WassersteinArgs {
    #[arg(long)]
    pub grid: PathBuf,
    /// Generated tokens.
    #[arg(long)]
    pub model: PathBuf,
    /// True tokens compared against.
    #[arg(long)]
    pub truth: PathBuf,
    /// A second independent true batch for the reference distance.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Use at most this many states from each file.
    #[arg(long)]
    pub max_states: Option<usize>,
    /// Drop the first this many tokens of each model sequence (the prefix).
    #[arg(long, default_value_t = 0)]
    pub skip: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct LyapunovArgs {
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub tokens: PathBuf,
    #[arg(long, default_value = "henon")]
    pub system: String,
    #[arg(long, default_value_t = 15)]
    pub n_max: usize,
    #[arg(long, default_value_t = 1)]
    pub fit_min: usize,
    #[arg(long, default_value_t = 15)]
    pub fit_max: usize,
    #[arg(long, default_value = "sliding")]
    pub windows: String,
    /// Skip the first this many tokens of each sequence (e.g. the prefix).
    #[arg(long, default_value_t = 0)]
    pub skip: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DivergenceArgs {
    /// True trajectories (with metadata sidecar, or pass --system).
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub generated: PathBuf,
    #[arg(long)]
    pub grid: PathBuf,
    /// Which reference/generated pair to evaluate.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long)]
    pub system: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    /// Exponent for the initial spread (default: literature value).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// Tokens compared (default: the generated length).
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::dynamics::DEFAULT_SUBSTEPS)]
    pub substeps: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DiffCurveArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Cut test trajectories into pieces of this many states first.
    #[arg(long)]
    pub segment_length: Option<usize>,
    #[arg(long)]
    pub system: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    #[arg(long, default_value_t = 300)]
    pub count: usize,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::dynamics::DEFAULT_SUBSTEPS)]
    pub substeps: usize,
    #[arg(long)]
    pub no_mask: bool,
    #[command(flatten)]
    pub context: ContextOpts,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub path: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ProtocolArgs {
    pub name: String,
    #[arg(long)]
    pub desk_scale: bool,
    /// Run the plan instead of printing it.
    #[arg(long)]
    pub execute: bool,
    #[arg(long, default_value = "runs")]
    pub workdir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Override the optimizer step budget.
    #[arg(long)]
    pub train_steps: Option<usize>,
    /// Override the number of generated tokens per sequence.
    #[arg(long)]
    pub new_tokens: Option<usize>,
}

/// Parse `argv` (including the program name), run, and return the exit
/// status. Usage errors print clap's text to stderr.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli, argv: &[String]) -> Result<()> {
    let started = Instant::now();
    match cli.command {
        Command::Simulate(a) => simulate(a, argv, started),
        Command::FitGrid(a) => fit_grid_cmd(a, argv, started),
        Command::Encode(a) => encode(a, argv, started),
        Command::Train(a) => train(a, argv, started),
        Command::Generate(a) => generate(a, argv, started),
        Command::Eval(EvalCommand::Wasserstein(a)) => eval_wasserstein(a, argv, started),
        Command::Eval(EvalCommand::Lyapunov(a)) => eval_lyapunov(a, argv, started),
        Command::Eval(EvalCommand::Divergence(a)) => eval_divergence(a, argv, started),
        Command::Eval(EvalCommand::Diffcurve(a)) => eval_diffcurve(a, argv, started),
        Command::Inspect(a) => inspect(&a.path),
        Command::Protocol(a) => protocol(a),
    }
}

fn manifest_for(command: &str, argv: &[String], config: &impl Serialize) -> RunManifest {
    let config = serde_json::to_value(config).expect("serializable arguments");
    RunManifest::new(command, argv.to_vec(), config)
}

/// Digest outputs and write the manifest beside `outputs[0]`.
fn finish(mut m: RunManifest, started: Instant, outputs: &[PathBuf]) -> Result<()> {
    for o in outputs {
        m.add_output(o)?;
    }
    m.duration_seconds = started.elapsed().as_secs_f64();
    let path = manifest_path(&outputs[0]);
    io::manifest::save(&path, &m)?;
    log::info!("wrote {} (manifest {})", outputs[0].display(), path.display());
    Ok(())
}

fn parse_system(name: &str) -> Result<SystemSpec> {
    Ok(SystemSpec::default_for(name.parse::<SystemKind>()?))
}

fn simulate(a: SimulateArgs, argv: &[String], started: Instant) -> Result<()> {
    let preset = Preset::by_name(&a.preset)?;
    let split: Split = a.split.parse()?;
    let mut req = preset.request(split, a.seed);
    if let Some(c) = a.count {
        req.count = c;
    }
    if let Some(l) = a.length {
        req.steps = l;
    }
    if let Some(t) = a.tau {
        req.tau = t;
    }
    req.substeps = a.substeps;
    req.burn_in = a.burn_in;
    let mut m = manifest_for("simulate", argv, &a);
    m.seeds.insert("seed".into(), a.seed);
    let ds = generate_dataset(&req)?;
    io::trajectory::save_dataset(&a.out, &ds)?;
    println!(
        "{} {} trajectories of {} states -> {}",
        ds.trajectories.len(),
        ds.meta.system.kind(),
        req.steps + 1,
        a.out.display()
    );
    finish(m, started, &[a.out.clone(), io::trajectory::meta_path(&a.out)])
}

fn load_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    Ok(io::trajectory::load(path)?.1)
}

fn fit_grid_cmd(a: FitGridArgs, argv: &[String], started: Instant) -> Result<()> {
    let mut m = manifest_for("fit-grid", argv, &a);
    let mut all = Vec::new();
    for p in &a.data {
        m.add_input(p)?;
        all.extend(load_trajectories(p)?);
    }
    let grid = fit_grid(&all, a.n, a.margin)?;
    io::grid::save(&a.out, &grid)?;
    println!(
        "grid n={} dim={} vocab={} -> {}",
        a.n,
        grid.dim(),
        grid.vocab_size(),
        a.out.display()
    );
    finish(m, started, std::slice::from_ref(&a.out))
}

fn encode(a: EncodeArgs, argv: &[String], started: Instant) -> Result<()> {
    let mut m = manifest_for("encode", argv, &a);
    m.add_input(&a.data)?;
    m.add_input(&a.grid)?;
    let trajs = load_trajectories(&a.data)?;
    let grid = io::grid::load(&a.grid)?;
    let sequences = trajs.iter().map(|t| grid.encode_trajectory(t)).collect::<Result<Vec<_>>>()?;
    let file = TokenFile::new(grid.vocab_size(), sequences)?;
    io::tokens::save(&a.out, &file)?;
    println!(
        "{} sequences, {} tokens -> {}",
        file.sequences.len(),
        file.total_tokens(),
        a.out.display()
    );
    finish(m, started, std::slice::from_ref(&a.out))
}

/// Training configuration file (TOML). Relative paths resolve against the
/// file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub version: u32,
    pub train_tokens: PathBuf,
    #[serde(default)]
    pub eval_tokens: Option<PathBuf>,
    #[serde(default)]
    pub grid: Option<PathBuf>,
    pub out_dir: PathBuf,
    #[serde(default = "yes")]
    pub deterministic: bool,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub optimizer: AdamWConfig,
    #[serde(default)]
    pub training: TrainSettings,
}

fn yes() -> bool {
    true
}

pub const TRAIN_CONFIG_VERSION: u32 = 1;

/// Model settings; unset fields come from the named scale.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// "desk" (default) or "full".
    pub scale: Option<String>,
    pub context: Option<usize>,
    pub dim: Option<usize>,
    pub layers: Option<usize>,
    pub heads: Option<usize>,
    pub dropout: Option<f64>,
    pub tie_embeddings: Option<bool>,
    pub position: Option<PositionEncoding>,
}

impl ModelSection {
    pub fn resolve(&self, vocab: usize) -> Result<ModelConfig> {
        let mut cfg = match self.scale.as_deref().unwrap_or("desk") {
            "desk" => ModelConfig::desk(vocab),
            "full" => ModelConfig::full_scale(vocab),
            other => return Err(Error::Domain(format!("unknown model scale {other:?}"))),
        };
        if let Some(v) = self.context {
            cfg.context = v;
        }
        if let Some(v) = self.dim {
            cfg.dim = v;
        }
        if let Some(v) = self.layers {
            cfg.layers = v;
        }
        if let Some(v) = self.heads {
            cfg.heads = v;
        }
        if let Some(v) = self.dropout {
            cfg.dropout = v;
        }
        if let Some(v) = self.tie_embeddings {
            cfg.tie_embeddings = v;
        }
        if let Some(v) = self.position {
            cfg.position = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl TrainConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = String::from_utf8(io::read_file(path)?).map_err(|_| Error::format(path, "config is not UTF-8"))?;
        let cfg: TrainConfig = toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        if cfg.version != TRAIN_CONFIG_VERSION {
            return Err(Error::format(
                path,
                format!("config version {}, expected {TRAIN_CONFIG_VERSION}", cfg.version),
            ));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("serializable config")
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn train(a: TrainArgs, argv: &[String], started: Instant) -> Result<()> {
    let cfg = TrainConfig::load(&a.config)?;
    let base = a.config.parent().unwrap_or(Path::new("")).to_path_buf();
    let train_path = resolve(&base, &cfg.train_tokens);
    let out_dir = resolve(&base, &cfg.out_dir);
    let mut m = manifest_for("train", argv, &cfg);
    m.deterministic = cfg.deterministic;
    m.seeds.insert("init_seed".into(), cfg.training.init_seed);
    m.seeds.insert("seed".into(), cfg.training.seed);
    m.add_input(&a.config)?;
    m.add_input(&train_path)?;
    let train_tokens = io::tokens::load(&train_path)?;
    let eval_tokens = match &cfg.eval_tokens {
        Some(p) => {
            let p = resolve(&base, p);
            m.add_input(&p)?;
            Some(io::tokens::load(&p)?)
        }
        None => None,
    };
    let mut vocab = train_tokens.vocab;
    if let Some(g) = &cfg.grid {
        let p = resolve(&base, g);
        m.add_input(&p)?;
        let grid = io::grid::load(&p)?;
        if grid.vocab_size() != vocab {
            return Err(Error::Domain(format!(
                "grid vocabulary {} differs from token vocabulary {vocab}",
                grid.vocab_size()
            )));
        }
        vocab = grid.vocab_size();
    }
    let model = cfg.model.resolve(vocab)?;
    let mut settings = cfg.training.clone();
    settings.checkpoint_dir = Some(out_dir.clone());
    let eval_seqs = eval_tokens.map(|t| t.sequences).unwrap_or_default();
    log::info!("training {} parameters for {} steps", model.parameter_count(), settings.steps);
    let run = training::train(&train_tokens.sequences, &eval_seqs, &model, &cfg.optimizer, &settings)?;
    let loss_path = out_dir.join("loss.csv");
    io::write_atomic(&loss_path, run.loss_csv().as_bytes())?;
    let final_ckpt = training::final_checkpoint_path(&out_dir);
    println!(
        "trained {} steps; final train loss {:.4}{}",
        run.loss_history.len(),
        run.loss_history.last().copied().unwrap_or(f64::NAN),
        run.final_eval_loss.map(|l| format!(", held-out {l:.4}")).unwrap_or_default()
    );
    let mut outputs = vec![final_ckpt.clone(), loss_path];
    outputs.extend(run.checkpoints.iter().filter(|p| **p != final_ckpt).cloned());
    finish(m, started, &outputs)
}

/// Token sequences from a token file, or encoded from a trajectory file.
fn load_sequences(path: &Path, grid: &Grid) -> Result<Vec<Vec<u32>>> {
    let bytes = io::read_file(path)?;
    match detect_kind(&bytes) {
        Some(FileKind::Tokens) => {
            let f = io::tokens::decode(&bytes, path)?;
            if f.vocab != grid.vocab_size() {
                return Err(Error::Domain(format!(
                    "{}: vocabulary {} differs from the grid's {}",
                    path.display(),
                    f.vocab,
                    grid.vocab_size()
                )));
            }
            Ok(f.sequences)
        }
        Some(FileKind::Trajectories) => io::trajectory::decode(&bytes, path)?
            .1
            .iter()
            .map(|t| grid.encode_trajectory(t))
            .collect(),
        _ => Err(Error::format(path, "expected a token or trajectory file")),
    }
}

fn generate(a: GenerateArgs, argv: &[String], started: Instant) -> Result<()> {
    let mut m = manifest_for("generate", argv, &a);
    m.seeds.insert("seed".into(), a.seed);
    for p in [&a.checkpoint, &a.grid, &a.prefix_from] {
        m.add_input(p)?;
    }
    let ck = checkpoint::load(&a.checkpoint)?;
    let grid = io::grid::load(&a.grid)?;
    if grid.vocab_size() != ck.header.model.vocab {
        return Err(Error::Domain(format!(
            "grid vocabulary {} differs from model vocabulary {}",
            grid.vocab_size(),
            ck.header.model.vocab
        )));
    }
    let mut sequences = load_sequences(&a.prefix_from, &grid)?;
    if let Some(c) = a.count {
        if c > sequences.len() {
            return Err(Error::Domain(format!("asked for {c} prefixes, file has {}", sequences.len())));
        }
        sequences.truncate(c);
    }
    let prefixes = sequences
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s.get(..a.k)
                .map(<[u32]>::to_vec)
                .ok_or_else(|| Error::Length(format!("sequence {i} has {} tokens, k = {}", s.len(), a.k)))
        })
        .collect::<Result<Vec<_>>>()?;
    let sampler = Sampler::new(
        SamplerConfig {
            temperature: a.temperature,
            mask_to_observed: !a.no_mask,
            max_new_tokens: a.new_tokens,
            seed: a.seed,
            context: a.context.policy(ck.header.model.context),
        },
        ck.header.model.vocab,
        ck.header.observed_tokens.as_deref(),
    )?;
    let out = sample_many(&ck.params, &prefixes, &sampler)?;
    let file = TokenFile::new(grid.vocab_size(), out)?;
    io::tokens::save(&a.out, &file)?;
    let mut outputs = vec![a.out.clone()];
    if let Some(d) = &a.decoded {
        let trajs = file
            .sequences
            .iter()
            .map(|s| grid.decode_sequence(s, a.tau))
            .collect::<Result<Vec<_>>>()?;
        io::trajectory::save(d, grid.dim(), &trajs)?;
        outputs.push(d.clone());
    }
    println!(
        "{} sequences of {} tokens -> {}",
        file.sequences.len(),
        a.k + a.new_tokens,
        a.out.display()
    );
    finish(m, started, &outputs)
}

fn take_states(mut seqs: Vec<Vec<u32>>, max: Option<usize>) -> Vec<Vec<u32>> {
    if let Some(mut left) = max {
        seqs.retain_mut(|s| {
            let keep = left.min(s.len());
            s.truncate(keep);
            left -= keep;
            keep > 0
        });
    }
    seqs
}

fn skip_prefix(seqs: Vec<Vec<u32>>, skip: usize) -> Vec<Vec<u32>> {
    seqs.into_iter().map(|s| s[skip.min(s.len())..].to_vec()).collect()
}

fn save_report(path: &Path, body: &ReportBody) -> Result<Vec<PathBuf>> {
    io::report::save(path, body)?;
    print!("{}", body.to_text());
    Ok(vec![path.to_path_buf(), path.with_extension("csv")])
}

fn eval_wasserstein(a: WassersteinArgs, argv: &[String], started: Instant) -> Result<()> {
    let mut m = manifest_for("eval wasserstein", argv, &a);
    m.add_input(&a.grid)?;
    let grid = io::grid::load(&a.grid)?;
    let mut dist = |p: &Path, skip: usize| -> Result<evaluation::EmpiricalDistribution> {
        m.add_input(p)?;
        let seqs = skip_prefix(load_sequences(p, &grid)?, skip);
        empirical_distribution(&take_states(seqs, a.max_states), &grid)
    };
    let model = dist(&a.model, a.skip)?;
    let truth = dist(&a.truth, 0)?;
    let baseline = a.baseline.as_deref().map(|p| dist(p, 0)).transpose()?;
    let row = WassersteinRow {
        grid_size: grid.segments(),
        w_model_true: evaluation::wasserstein(&model, &truth)?,
        w_true_true: baseline.as_ref().map(|b| evaluation::wasserstein(b, &truth)).transpose()?,
    };
    finish_report(m, started, &a.out, ReportBody::Wasserstein { rows: vec![row] })
}

fn finish_report(m: RunManifest, started: Instant, out: &Path, body: ReportBody) -> Result<()> {
    let outputs = save_report(out, &body)?;
    finish(m, started, &outputs)
}

fn eval_lyapunov(a: LyapunovArgs, argv: &[String], started: Instant) -> Result<()> {
    let mut m = manifest_for("eval lyapunov", argv, &a);
    m.add_input(&a.grid)?;
    m.add_input(&a.tokens)?;
    let grid = io::grid::load(&a.grid)?;
    let system = parse_system(&a.system)?;
    let mode = match a.windows.as_str() {
        "sliding" => WindowMode::Sliding,
        "disjoint" => WindowMode::Disjoint,
        other => return Err(Error::Usage(format!("unknown window mode {other:?}"))),
    };
    let seqs = skip_prefix(load_sequences(&a.tokens, &grid)?, a.skip);
    let series = lyapunov_series(&seqs, &grid, &system, a.n_max, mode)?;
    let est = fit_lyapunov(&series, a.fit_min..=a.fit_max)?;
    finish_report(m, started, &a.out, ReportBody::Lyapunov(est))
}

/// System from `--system`, else from the dataset sidecar.
fn system_for(explicit: Option<&str>, data: &Path) -> Result<SystemSpec> {
    match explicit {
        Some(s) => parse_system(s),
        None => io::trajectory::load_meta(data)
            .map(|m| m.system)
            .map_err(|_| Error::Usage(format!("{} has no metadata sidecar; pass --system", data.display()))),
    }
}

fn eval_divergence(a: DivergenceArgs, argv: &[String], started: Instant) -> Result<()> {
    let mut m = manifest_for("eval divergence", argv, &a);
    m.seeds.insert("seed".into(), a.seed);
    for p in [&a.reference, &a.generated, &a.grid] {
        m.add_input(p)?;
    }
    let system = system_for(a.system.as_deref(), &a.reference)?;
    let grid = io::grid::load(&a.grid)?;
    let refs = load_trajectories(&a.reference)?;
    let gens = load_sequences(&a.generated, &grid)?;
    let reference = refs
        .get(a.index)
        .ok_or_else(|| Error::Domain(format!("reference index {} out of {}", a.index, refs.len())))?;
    let generated = gens
        .get(a.index)
        .ok_or_else(|| Error::Domain(format!("generated index {} out of {}", a.index, gens.len())))?;
    let settings = DivergenceSettings {
        k: a.k,
        lambda: a
            .lambda
            .unwrap_or_else(|| evaluation::divergence::reference_lyapunov(system.kind())),
        samples: a.samples,
        horizon: a.horizon.unwrap_or(generated.len()),
        seed: a.seed,
        substeps: a.substeps,
    };
    let report = divergence_time(reference, generated, &grid, &system, &settings)?;
    finish_report(m, started, &a.out, ReportBody::Divergence(report))
}

fn eval_diffcurve(a: DiffCurveArgs, argv: &[String], started: Instant) -> Result<()> {
    let mut m = manifest_for("eval diffcurve", argv, &a);
    m.seeds.insert("seed".into(), a.seed);
    for p in [&a.checkpoint, &a.grid, &a.test] {
        m.add_input(p)?;
    }
    let system = system_for(a.system.as_deref(), &a.test)?;
    let ck = checkpoint::load(&a.checkpoint)?;
    let grid = io::grid::load(&a.grid)?;
    let mut test = load_trajectories(&a.test)?;
    if let Some(len) = a.segment_length {
        test = segments(&test, len)?;
    }
    let settings = DiffCurveSettings {
        k: a.k,
        count: a.count,
        lambda: a
            .lambda
            .unwrap_or_else(|| evaluation::divergence::reference_lyapunov(system.kind())),
        samples: a.samples,
        seed: a.seed,
        substeps: a.substeps,
        context: a.context.policy(ck.header.model.context),
    };
    let observed = if a.no_mask {
        None
    } else {
        Some(
            ck.header
                .observed_tokens
                .as_deref()
                .ok_or_else(|| Error::Domain("checkpoint records no observed tokens; pass --no-mask".into()))?,
        )
    };
    let curve = diff_curve(&test, &ck.params, observed, &grid, &system, &settings)?;
    finish_report(m, started, &a.out, ReportBody::DiffCurve(curve))
}

/// Human-readable summary of any project file.
pub fn describe(path: &Path) -> Result<String> {
    let bytes = io::read_file(path)?;
    let kind = detect_kind(&bytes).ok_or_else(|| Error::format(path, "not a recognized project file"))?;
    let text = match kind {
        FileKind::Trajectories => {
            let (dim, trajs) = io::trajectory::decode(&bytes, path)?;
            let lens: Vec<usize> = trajs.iter().map(Trajectory::len).collect();
            format!(
                "trajectories (DYNTRAJ1)\n  dim: {dim}\n  count: {}\n  tau: {}\n  states: {}\n",
                trajs.len(),
                trajs.first().map(|t| t.tau()).unwrap_or(0.0),
                summarize(&lens)
            )
        }
        FileKind::Tokens => {
            let f = io::tokens::decode(&bytes, path)?;
            let lens: Vec<usize> = f.sequences.iter().map(Vec::len).collect();
            format!(
                "tokens (DYNTOK01)\n  vocab: {}\n  sequences: {}\n  tokens: {}\n  lengths: {}\n",
                f.vocab,
                f.sequences.len(),
                f.total_tokens(),
                summarize(&lens)
            )
        }
        FileKind::Checkpoint => {
            let ck = checkpoint::decode(&bytes, path)?;
            let header = serde_json::to_string_pretty(&ck.header.model).expect("serializable");
            format!(
                "checkpoint (DYNCKPT1 v{})\n  step: {}\n  init_seed: {}\n  train_seed: {}\n  parameters: {}\n  observed tokens: {}\n  model: {header}\n",
                checkpoint::VERSION,
                ck.header.step,
                ck.header.init_seed,
                ck.header.train_seed,
                ck.params.len(),
                ck.header.observed_tokens.as_ref().map_or("none".to_string(), |o| o.len().to_string()),
            )
        }
        _ => {
            let value: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))?;
            serde_json::to_string_pretty(&value).expect("valid json") + "\n"
        }
    };
    Ok(text)
}

fn summarize(lens: &[usize]) -> String {
    match (lens.iter().min(), lens.iter().max()) {
        (Some(a), Some(b)) if a == b => format!("{a} each"),
        (Some(a), Some(b)) => format!("{a}..{b}"),
        _ => "none".into(),
    }
}

fn inspect(path: &Path) -> Result<()> {
    print!("{}", describe(path)?);
    Ok(())
}

fn protocol(a: ProtocolArgs) -> Result<()> {
    let protocol: Protocol = a.name.parse()?;
    let opts = PlanOptions {
        desk: a.desk_scale,
        seed: a.seed,
        train_steps: a.train_steps,
        new_tokens: a.new_tokens,
    };
    let plan = protocols::plan(protocol, &a.workdir, &opts);
    if !a.execute {
        print!("{}", plan.to_script());
        return Ok(());
    }
    for (path, content) in &plan.files {
        io::write_atomic(path, content.as_bytes())?;
    }
    for (i, cmd) in plan.commands.iter().enumerate() {
        log::info!("[{}/{}] {}", i + 1, plan.commands.len(), cmd.join(" "));
        let cli = Cli::try_parse_from(cmd).map_err(|e| Error::Usage(e.to_string()))?;
        execute(cli, cmd)?;
    }
    Ok(())
}

/// Seeds keyed by name, for callers assembling their own manifests.
pub fn seeds(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}
