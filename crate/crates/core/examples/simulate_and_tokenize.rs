//! Simulate Lorenz trajectories, fit a grid, and round-trip them through tokens.
//!
//! cargo run --release --example simulate_and_tokenize

use dyntok::discretization::{fit_grid, DEFAULT_MARGIN};
use dyntok::dynamics::{generate_dataset, Preset, Split};

fn main() -> dyntok::Result<()> {
    let mut req = Preset::by_name("lorenz-desk")?.request(Split::Train, 7);
    req.count = 4;
    req.steps = 1000;
    let data = generate_dataset(&req)?;
    println!(
        "{} trajectories, {} states, tau = {}",
        data.trajectories.len(),
        data.total_states(),
        data.meta.tau
    );

    for n in [10, 20, 50] {
        let grid = fit_grid(&data.trajectories, n, DEFAULT_MARGIN)?;
        let tokens = grid.encode_trajectory(&data.trajectories[0])?;
        let decoded = grid.decode_sequence(&tokens, data.meta.tau)?;
        // reconstruction error is bounded by the cell half-diagonal
        let worst = data.trajectories[0]
            .states()
            .zip(decoded.states())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let mut distinct = tokens.clone();
        distinct.sort_unstable();
        distinct.dedup();
        println!(
            "N = {n:>2}: V = {:>6}, {} distinct tokens in trajectory 0, max decode error {worst:.4} (cell radius {:.4})",
            grid.vocab_size(),
            distinct.len(),
            grid.cell_radius()
        );
    }
    Ok(())
}
