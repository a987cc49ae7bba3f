//! Divergence time of a token sequence against rejection-sampled true runs.
//!
//! Uses a slightly perturbed true Hénon orbit as the "model" output, so the
//! measured time reflects how fast nearby states separate.
//!
//! cargo run --release --example divergence

use dyntok::discretization::{fit_grid, DEFAULT_MARGIN};
use dyntok::dynamics::{iterate, SystemSpec};
use dyntok::evaluation::{divergence_time, initial_spread, DivergenceSettings};

fn main() -> dyntok::Result<()> {
    let henon = SystemSpec::henon();
    let warm = iterate(&henon, &[-0.95, 0.35], 1000)?;
    let x0 = warm.state(1000).to_vec();
    let reference = iterate(&henon, &x0, 200)?;
    let grid = fit_grid(std::slice::from_ref(&warm), 20, DEFAULT_MARGIN)?;

    let mut nudged = x0.clone();
    nudged[0] += 1e-9;
    let mut generated = grid.encode_trajectory(&iterate(&henon, &nudged, 200)?)?;
    let reference_tokens = grid.encode_trajectory(&reference)?;
    let agree = reference_tokens.iter().zip(&generated).take_while(|(a, b)| a == b).count();
    let k = agree.min(10);
    println!("sequences agree on the first {agree} tokens; conditioning on k = {k}");

    let settings = DivergenceSettings {
        k,
        lambda: 0.4192,
        samples: 2000,
        horizon: 150,
        seed: 3,
        substeps: 1,
    };
    println!(
        "delta_x0 = {:.3e}",
        initial_spread(grid.cell_radius(), settings.lambda, k, 1.0)
    );
    generated[..k].copy_from_slice(&reference_tokens[..k]);
    match divergence_time(&reference, &generated, &grid, &henon, &settings) {
        Ok(r) => println!(
            "divergence time {:.0} steps (accepted {}/{}, rate {:.3})",
            r.divergence_time, r.accepted, r.drawn, r.acceptance_rate
        ),
        Err(e) => println!("{e}"),
    }
    Ok(())
}
