//! Train the desk model on Hénon tokens and save a checkpoint.
//!
//! cargo run --release --example train_henon -- [steps] [out.ckpt]

use std::path::PathBuf;

use dyntok::discretization::{fit_grid, DEFAULT_MARGIN};
use dyntok::dynamics::{generate_dataset, Preset, Split};
use dyntok::io::checkpoint;
use dyntok::training::{train, AdamWConfig, TrainSettings};
use dyntok::transformer::ModelConfig;

fn main() -> dyntok::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().map_or(200, |s| s.parse().expect("steps must be an integer"));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "henon-desk.ckpt".into()));

    let preset = Preset::by_name("henon-desk")?;
    let train_set = generate_dataset(&preset.request(Split::Train, 0))?.trajectories;
    let test_set = generate_dataset(&preset.request(Split::Test, 0))?.trajectories;
    let all: Vec<_> = train_set.iter().chain(&test_set).cloned().collect();
    let grid = fit_grid(&all, 20, DEFAULT_MARGIN)?;
    let encode = |ts: &[dyntok::dynamics::Trajectory]| -> dyntok::Result<Vec<Vec<u32>>> {
        ts.iter().map(|t| grid.encode_trajectory(t)).collect()
    };
    let (train_tok, test_tok) = (encode(&train_set)?, encode(&test_set)?);

    let model = ModelConfig::desk(grid.vocab_size());
    println!("{} parameters, vocabulary {}", model.parameter_count(), model.vocab);
    let hyper = AdamWConfig {
        lr: 1e-3,
        ..AdamWConfig::default()
    };
    let settings = TrainSettings {
        steps,
        eval_interval: (steps / 4).max(1),
        ..TrainSettings::default()
    };
    let run = train(&train_tok, &test_tok, &model, &hyper, &settings)?;
    for (step, loss) in &run.eval_history {
        println!("step {step:>5}: held-out loss {loss:.4}");
    }
    println!("uniform baseline ln V = {:.4}", (model.vocab as f64).ln());
    checkpoint::save(&out, &run.checkpoint())?;
    println!("saved {}", out.display());
    Ok(())
}
