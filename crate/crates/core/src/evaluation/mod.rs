//! Attractor-reconstruction metrics.

pub mod divergence;
pub mod lyapunov;
pub mod transport;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::discretization::{Grid, Token};
use crate::error::{Error, Result};

pub use divergence::{
    diff_curve, divergence_time, initial_spread, match_time, DiffCurve, DiffCurveSettings, DivergenceReport, DivergenceSettings,
};
pub use lyapunov::{fit_lyapunov, lyapunov_series, lyapunov_series_with, LyapunovEstimate, LyapunovSeries, WindowMode};

/// Supports above this size (on either side) go to the entropic solver
/// under [`OtMethod::Auto`].
pub const EXACT_SUPPORT_LIMIT: usize = 20_000;

/// Visit counts of grid cells.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDistribution {
    grid: Grid,
    counts: BTreeMap<u32, u64>,
    total: u64,
}

impl EmpiricalDistribution {
    /// From explicit cell counts; zero counts are dropped.
    pub fn from_counts(grid: &Grid, counts: impl IntoIterator<Item = (u32, u64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut total = 0u64;
        for (t, c) in counts {
            if t as usize >= grid.vocab_size() {
                return Err(Error::Domain(format!(
                    "token {t} outside vocabulary of size {}",
                    grid.vocab_size()
                )));
            }
            if c > 0 {
                *map.entry(t).or_insert(0) += c;
                total += c;
            }
        }
        if total == 0 {
            return Err(Error::Domain("empirical distribution of no states".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            counts: map,
            total,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn support_len(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &BTreeMap<u32, u64> {
        &self.counts
    }

    pub fn weight(&self, token: u32) -> f64 {
        self.counts.get(&token).map_or(0.0, |&c| c as f64 / self.total as f64)
    }

    /// `(token, probability)` in ascending token order.
    pub fn weights(&self) -> Vec<(u32, f64)> {
        self.counts.iter().map(|(&t, &c)| (t, c as f64 / self.total as f64)).collect()
    }
}

/// Normalized visit frequencies over every state of every sequence.
pub fn empirical_distribution(sequences: &[Vec<u32>], grid: &Grid) -> Result<EmpiricalDistribution> {
    let mut counts = BTreeMap::new();
    for s in sequences {
        for &t in s {
            *counts.entry(t).or_insert(0u64) += 1;
        }
    }
    EmpiricalDistribution::from_counts(grid, counts)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum OtMethod {
    /// Exact below [`EXACT_SUPPORT_LIMIT`], entropic above.
    Auto,
    Exact,
    Entropic {
        epsilon: f64,
        max_iter: usize,
    },
}

/// Default entropic regularization relative to the largest ground cost.
const AUTO_EPSILON_FRACTION: f64 = 1e-3;
/// L1 error allowed on the Sinkhorn row marginals.
const SINKHORN_TOL: f64 = 1e-6;

/// Exact 1-Wasserstein distance between two distributions on one grid,
/// with Euclidean cost between cell centers.
pub fn wasserstein(u: &EmpiricalDistribution, v: &EmpiricalDistribution) -> Result<f64> {
    wasserstein_with(u, v, OtMethod::Auto)
}

pub fn wasserstein_with(u: &EmpiricalDistribution, v: &EmpiricalDistribution, method: OtMethod) -> Result<f64> {
    if u.grid != v.grid {
        return Err(Error::Domain("distributions live on different grids".into()));
    }
    let centers = |d: &EmpiricalDistribution| -> Vec<Vec<f64>> {
        d.counts
            .keys()
            .map(|&t| d.grid.decode_token(Token(t)).expect("token checked on construction"))
            .collect()
    };
    let cu = centers(u);
    let cv = centers(v);
    let cost = |i: usize, j: usize| -> f64 { cu[i].iter().zip(&cv[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() };
    let large = u.support_len().max(v.support_len()) > EXACT_SUPPORT_LIMIT;
    let method = match method {
        OtMethod::Auto if large => {
            let diag = 2.0 * u.grid.cell_radius() * u.grid.segments() as f64;
            OtMethod::Entropic {
                epsilon: AUTO_EPSILON_FRACTION * diag,
                max_iter: 10_000,
            }
        }
        OtMethod::Auto => OtMethod::Exact,
        m => m,
    };
    match method {
        OtMethod::Exact => {
            let g = gcd(u.total, v.total);
            let (su, sv) = (v.total / g, u.total / g);
            let supply: Vec<u64> = u.counts.values().map(|&c| c * su).collect();
            let demand: Vec<u64> = v.counts.values().map(|&c| c * sv).collect();
            Ok(transport::solve_exact(&supply, &demand, cost)?.cost)
        }
        OtMethod::Entropic { epsilon, max_iter } => {
            log::warn!(
                "supports of {} and {} cells: using entropic transport (epsilon {epsilon})",
                u.support_len(),
                v.support_len()
            );
            let a: Vec<f64> = u.weights().into_iter().map(|w| w.1).collect();
            let b: Vec<f64> = v.weights().into_iter().map(|w| w.1).collect();
            Ok(transport::solve_entropic(&a, &b, cost, epsilon, max_iter, SINKHORN_TOL)?.cost)
        }
        OtMethod::Auto => unreachable!(),
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// One row of a Wasserstein comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WassersteinRow {
    pub grid_size: usize,
    pub w_model_true: f64,
    /// Absent when no second true batch was given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_true_true: Option<f64>,
}
