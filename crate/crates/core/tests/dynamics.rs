use dyntok::dynamics::{integrate, iterate, SystemSpec};
use proptest::prelude::*;

mod common;
use common::ulps;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// State at time `t` reached with `substeps` RK4 steps.
fn endpoint(system: &SystemSpec, x0: &[f64], t: f64, substeps: usize) -> Vec<f64> {
    let traj = integrate(system, x0, t, 1, substeps).unwrap();
    traj.state(1).to_vec()
}

fn observed_order(system: &SystemSpec, x0: &[f64], t: f64, n: usize) -> f64 {
    let coarse = endpoint(system, x0, t, n);
    let mid = endpoint(system, x0, t, 2 * n);
    let fine = endpoint(system, x0, t, 4 * n);
    (dist(&coarse, &mid) / dist(&mid, &fine)).log2()
}

#[test]
fn rk4_converges_at_fourth_order() {
    let lorenz = observed_order(&SystemSpec::lorenz(), &[1.0, 1.0, 1.0], 0.5, 50);
    let rossler = observed_order(&SystemSpec::rossler(), &[5.0, 0.0, 0.0], 2.0, 40);
    for (name, p) in [("lorenz", lorenz), ("rossler", rossler)] {
        assert!((3.7..=4.3).contains(&p), "{name}: order {p}");
    }
}

fn fd_jacobian_error(system: &SystemSpec, x: &[f64]) -> f64 {
    let h = 1e-5;
    let f = |y: &[f64]| {
        if system.is_discrete() {
            system.map_step(y).unwrap()
        } else {
            system.vector_field(y).unwrap()
        }
    };
    let j = system.jacobian(x).unwrap();
    let d = x.len();
    let mut worst = 0.0f64;
    for col in 0..d {
        let mut up = x.to_vec();
        let mut down = x.to_vec();
        up[col] += h;
        down[col] -= h;
        let (fu, fd) = (f(&up), f(&down));
        for row in 0..d {
            let numeric = (fu[row] - fd[row]) / (2.0 * h);
            let analytic = j.get(row, col);
            let err = (numeric - analytic).abs() / analytic.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    worst
}

proptest! {
    #[test]
    fn jacobians_match_finite_differences(
        x in -20.0..20.0f64, y in -20.0..20.0f64, z in 0.0..45.0f64,
    ) {
        for system in [SystemSpec::lorenz(), SystemSpec::rossler()] {
            prop_assert!(fd_jacobian_error(&system, &[x, y, z]) <= 1e-6);
        }
        let hx = x / 15.0;
        let hy = y / 50.0;
        prop_assert!(fd_jacobian_error(&SystemSpec::henon(), &[hx, hy]) <= 1e-6);
    }
}

#[test]
fn henon_step_from_reference_point() {
    let t = iterate(&SystemSpec::henon(), &[-0.95, 0.35], 1).unwrap();
    let next = t.state(1);
    assert_eq!(next[1], -0.285);
    // 1 − 1.4·0.95² + 0.35 evaluated exactly on the binary inputs, then rounded
    let exact = 0.086_500_000_000_000_17;
    assert!(ulps(next[0], exact) <= 4, "{}", next[0]);
    assert!((next[0] - 0.0865).abs() < 1e-15);
}

#[test]
fn trajectories_are_reproducible() {
    let a = integrate(&SystemSpec::lorenz(), &[0.1, -0.05, 0.02], 0.03, 200, 30).unwrap();
    let b = integrate(&SystemSpec::lorenz(), &[0.1, -0.05, 0.02], 0.03, 200, 30).unwrap();
    assert_eq!(a.as_flat(), b.as_flat());
}
