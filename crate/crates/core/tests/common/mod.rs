//! Oracles and fixtures shared by the test targets.
#![allow(dead_code)]

pub mod pipeline;

use dyntok::transformer::{cross_entropy_loss, forward, gradients, init_model, ModelConfig, ParameterSet, PositionEncoding};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gradient entries below this magnitude are compared absolutely.
pub const GRAD_FLOOR: f64 = 1e-6;

pub fn tiny(tie: bool) -> ModelConfig {
    ModelConfig {
        vocab: 11,
        context: 12,
        dim: 16,
        layers: 2,
        heads: 2,
        dropout: 0.0,
        tie_embeddings: tie,
        position: PositionEncoding::Learned,
    }
}

pub fn random_tokens(rng: &mut impl Rng, len: usize, vocab: usize) -> Vec<u32> {
    (0..len).map(|_| rng.gen_range(0..vocab as u32)).collect()
}

pub fn loss_at(params: &ParameterSet, x: &[u32], y: &[u32]) -> f64 {
    cross_entropy_loss(&forward(params, x).unwrap(), y).unwrap()
}

/// Worst relative error of the analytic gradient against central
/// differences over every parameter.
pub fn worst_fd_error(cfg: &ModelConfig, seed: u64) -> f64 {
    let mut params = init_model(cfg, seed).unwrap();
    // perturb norms and biases away from their trivial init values
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
    for v in params.data_mut() {
        *v += rng.gen_range(-0.05..0.05);
    }
    let seq = random_tokens(&mut rng, 13, cfg.vocab);
    let (x, y) = (&seq[..12], &seq[1..]);
    let analytic = gradients(&params, x, y, None).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let orig = params.data()[i];
        params.data_mut()[i] = orig + h;
        let up = loss_at(&params, x, y);
        params.data_mut()[i] = orig - h;
        let down = loss_at(&params, x, y);
        params.data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let a = analytic.data()[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_FLOOR);
        worst = worst.max(rel);
    }
    worst
}

const PIVOT_EPS: f64 = 1e-12;

/// Dense two-phase simplex with Bland's rule for `min c·x, A x = b, x ≥ 0`.
/// Independent of the network solver; only suitable for tiny problems.
pub fn dense_lp(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> f64 {
    let (m, n) = (a.len(), c.len());
    // columns: n originals, m artificials, then the right-hand side
    let width = n + m + 1;
    let mut t: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row = vec![0.0; width];
            row[..n].copy_from_slice(&a[i]);
            row[n + i] = 1.0;
            row[width - 1] = b[i];
            row
        })
        .collect();
    let mut basis: Vec<usize> = (n..n + m).collect();

    let optimize = |t: &mut Vec<Vec<f64>>, basis: &mut Vec<usize>, cost: &[f64], allowed: usize| loop {
        let reduced =
            |j: usize, t: &Vec<Vec<f64>>, basis: &Vec<usize>| cost[j] - (0..m).map(|i| cost[basis[i]] * t[i][j]).sum::<f64>();
        let Some(enter) = (0..allowed).find(|&j| reduced(j, t, basis) < -1e-11) else {
            return;
        };
        let mut leave: Option<usize> = None;
        for i in 0..m {
            if t[i][enter] > PIVOT_EPS {
                let ratio = t[i][width - 1] / t[i][enter];
                leave = match leave {
                    None => Some(i),
                    Some(l) => {
                        let best = t[l][width - 1] / t[l][enter];
                        if ratio < best - 1e-12 || (ratio <= best + 1e-12 && basis[i] < basis[l]) {
                            Some(i)
                        } else {
                            Some(l)
                        }
                    }
                };
            }
        }
        let r = leave.expect("transportation problems are bounded");
        let p = t[r][enter];
        t[r].iter_mut().for_each(|v| *v /= p);
        for i in 0..m {
            if i != r && t[i][enter] != 0.0 {
                let f = t[i][enter];
                let pivot_row = t[r].clone();
                t[i].iter_mut().zip(&pivot_row).for_each(|(v, pr)| *v -= f * pr);
            }
        }
        basis[r] = enter;
    };

    let mut phase1 = vec![0.0; n + m];
    phase1[n..].iter_mut().for_each(|v| *v = 1.0);
    optimize(&mut t, &mut basis, &phase1, n + m);
    let infeasibility: f64 = (0..m).filter(|&i| basis[i] >= n).map(|i| t[i][width - 1]).sum();
    assert!(infeasibility < 1e-9, "oracle found no feasible point");

    let mut phase2 = c.to_vec();
    phase2.extend(std::iter::repeat_n(0.0, m));
    optimize(&mut t, &mut basis, &phase2, n);
    (0..m).map(|i| phase2[basis[i]] * t[i][width - 1]).sum()
}

pub fn transport_lp(supply: &[u64], demand: &[u64], cost: &[Vec<f64>]) -> f64 {
    let (m, n) = (supply.len(), demand.len());
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..m {
        let mut row = vec![0.0; m * n];
        (0..n).for_each(|j| row[i * n + j] = 1.0);
        rows.push(row);
        rhs.push(supply[i] as f64);
    }
    for j in 0..n {
        let mut row = vec![0.0; m * n];
        (0..m).for_each(|i| row[i * n + j] = 1.0);
        rows.push(row);
        rhs.push(demand[j] as f64);
    }
    let c: Vec<f64> = cost.iter().flatten().copied().collect();
    dense_lp(&rows, &rhs, &c)
}

/// Split `total` into `parts` positive integers.
pub fn partition(rng: &mut ChaCha8Rng, total: u64, parts: usize) -> Vec<u64> {
    let mut cuts: Vec<u64> = (0..parts - 1).map(|_| rng.gen_range(1..total)).collect();
    cuts.sort_unstable();
    cuts.dedup();
    while cuts.len() < parts - 1 {
        let c = rng.gen_range(1..total);
        if !cuts.contains(&c) {
            cuts.push(c);
            cuts.sort_unstable();
        }
    }
    let mut out = Vec::with_capacity(parts);
    let mut prev = 0;
    for c in cuts.into_iter().chain(std::iter::once(total)) {
        out.push(c - prev);
        prev = c;
    }
    out
}

/// Balanced transport problem with supports of at most 8 points in the
/// unit square and Euclidean costs.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<u64>, Vec<u64>, Vec<Vec<f64>>) {
    let m = rng.gen_range(1..=8);
    let n = rng.gen_range(1..=8);
    let total = rng.gen_range(m.max(n) as u64 + 1..=60);
    let supply = partition(rng, total, m);
    let demand = partition(rng, total, n);
    let xs: Vec<[f64; 2]> = (0..m).map(|_| [rng.gen(), rng.gen()]).collect();
    let ys: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen(), rng.gen()]).collect();
    let cost = xs
        .iter()
        .map(|x| {
            ys.iter()
                .map(|y| ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt())
                .collect()
        })
        .collect();
    (supply, demand, cost)
}

/// Distance in units in the last place.
pub fn ulps(a: f64, b: f64) -> u64 {
    (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
}
