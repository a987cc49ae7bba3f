//! Exact 1-Wasserstein distance between token distributions.
//!
//! cargo run --release --example wasserstein

use dyntok::discretization::{fit_grid, DEFAULT_MARGIN};
use dyntok::dynamics::{generate_dataset, Preset, Split};
use dyntok::evaluation::{empirical_distribution, wasserstein, wasserstein_with, OtMethod};

fn main() -> dyntok::Result<()> {
    let preset = Preset::by_name("henon")?;
    let a = generate_dataset(&preset.request(Split::Test, 1))?.trajectories;
    let b = generate_dataset(&preset.request(Split::Test, 2))?.trajectories;
    let all: Vec<_> = a.iter().chain(&b).cloned().collect();
    for n in [20, 50] {
        let grid = fit_grid(&all, n, DEFAULT_MARGIN)?;
        let enc = |ts: &[dyntok::dynamics::Trajectory]| -> dyntok::Result<Vec<Vec<u32>>> {
            ts.iter().map(|t| grid.encode_trajectory(t)).collect()
        };
        let (da, db) = (
            empirical_distribution(&enc(&a)?, &grid)?,
            empirical_distribution(&enc(&b)?, &grid)?,
        );
        let exact = wasserstein(&da, &db)?;
        println!(
            "N = {n}: supports {} / {}, W(true1, true2) = {exact:.6}",
            da.support_len(),
            db.support_len()
        );
        if n == 20 {
            // the entropic value sits above the exact one by roughly epsilon
            let eps = 3e-2;
            let ent = wasserstein_with(
                &da,
                &db,
                OtMethod::Entropic {
                    epsilon: eps,
                    max_iter: 20_000,
                },
            )?;
            println!("       entropic (epsilon {eps}) gives {ent:.6}");
        }
    }
    Ok(())
}
