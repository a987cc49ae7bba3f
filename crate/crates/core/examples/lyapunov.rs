//! Largest Lyapunov exponent of the Hénon map from tokens alone.
//!
//! cargo run --release --example lyapunov

use dyntok::discretization::{fit_grid, DEFAULT_MARGIN};
use dyntok::dynamics::{generate_dataset, Preset, Split, SystemSpec};
use dyntok::evaluation::{fit_lyapunov, lyapunov_series, WindowMode};

fn main() -> dyntok::Result<()> {
    let trajs = generate_dataset(&Preset::by_name("henon")?.request(Split::Test, 0))?.trajectories;
    for n in [20, 50, 200] {
        let grid = fit_grid(&trajs, n, DEFAULT_MARGIN)?;
        let tokens: Vec<Vec<u32>> = trajs.iter().map(|t| grid.encode_trajectory(t)).collect::<Result<_, _>>()?;
        let series = lyapunov_series(&tokens, &grid, &SystemSpec::henon(), 15, WindowMode::Sliding)?;
        let fit = fit_lyapunov(&series, 1..=15)?;
        println!(
            "N = {n:>3}: lambda_1 = {:.4}, lambda_15 = {:.4}, extrapolated {:.4} (c1 {:.3}, c2 {:.3})",
            series.values[0], series.values[14], fit.lambda, fit.c1, fit.c2
        );
    }
    println!("reference 0.4192");
    Ok(())
}
