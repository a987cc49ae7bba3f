//! The on-disk formats: trajectories, grids, tokens, and a run manifest
//! with SHA-256 digests.
//!
//! cargo run --release --example files_and_manifests

use dyntok::discretization::{fit_grid, DEFAULT_MARGIN};
use dyntok::dynamics::{generate_dataset, Preset, Split};
use dyntok::io::manifest::{manifest_path, RunManifest};
use dyntok::io::tokens::TokenFile;
use dyntok::io::{self, grid, tokens, trajectory};

fn main() -> dyntok::Result<()> {
    let dir = std::env::temp_dir().join("dyntok-files-example");
    let mut req = Preset::by_name("rossler-desk")?.request(Split::Test, 1);
    req.count = 3;
    let data = generate_dataset(&req)?;

    let traj_path = dir.join("test.traj");
    trajectory::save_dataset(&traj_path, &data)?;
    let g = fit_grid(&data.trajectories, 12, DEFAULT_MARGIN)?;
    let grid_path = dir.join("grid.json");
    grid::save(&grid_path, &g)?;
    let seqs = data
        .trajectories
        .iter()
        .map(|t| g.encode_trajectory(t))
        .collect::<Result<Vec<_>, _>>()?;
    let tok_path = dir.join("test.tok");
    tokens::save(&tok_path, &TokenFile::new(g.vocab_size(), seqs)?)?;

    let mut m = RunManifest::new("example", std::env::args().collect(), serde_json::json!({ "n": 12 }));
    m.seeds.insert("seed".into(), 1);
    m.add_input(&traj_path)?;
    m.add_input(&grid_path)?;
    m.add_output(&tok_path)?;
    io::manifest::save(&manifest_path(&tok_path), &m)?;

    for p in [&traj_path, &grid_path, &tok_path, &manifest_path(&tok_path)] {
        println!("== {}", p.display());
        print!("{}", dyntok::cli::describe(p)?);
    }
    Ok(())
}
