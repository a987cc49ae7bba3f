use dyntok::discretization::Grid;
use dyntok::evaluation::transport::solve_exact;
use dyntok::evaluation::{empirical_distribution, wasserstein, EmpiricalDistribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::*;

#[test]
fn network_simplex_matches_dense_lp() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..200 {
        let (supply, demand, cost) = random_instance(&mut rng);
        let total: u64 = supply.iter().sum();
        let oracle = transport_lp(&supply, &demand, &cost) / total as f64;
        let ours = solve_exact(&supply, &demand, |i, j| cost[i][j]).unwrap().cost;
        assert!((ours - oracle).abs() <= 1e-9, "case {case}: {ours} vs {oracle}");
    }
}

fn random_distribution(rng: &mut ChaCha8Rng, grid: &Grid) -> EmpiricalDistribution {
    let len = rng.gen_range(1..=12);
    let seq: Vec<u32> = (0..len).map(|_| rng.gen_range(0..grid.vocab_size() as u32)).collect();
    empirical_distribution(&[seq], grid).unwrap()
}

#[test]
fn wasserstein_is_a_metric() {
    let grid = Grid::new(4, vec![-1.0, 0.0], vec![1.0, 3.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let (u, v, w) = (
            random_distribution(&mut rng, &grid),
            random_distribution(&mut rng, &grid),
            random_distribution(&mut rng, &grid),
        );
        let uv = wasserstein(&u, &v).unwrap();
        assert!(wasserstein(&u, &u).unwrap().abs() <= 1e-12);
        assert!((uv - wasserstein(&v, &u).unwrap()).abs() <= 1e-12);
        assert!(uv <= wasserstein(&u, &w).unwrap() + wasserstein(&w, &v).unwrap() + 1e-12);
        if u.weights() != v.weights() {
            assert!(uv > 0.0);
        }
    }
}
