//! How long a generated token sequence tracks the true dynamics.
//!
//! True trajectories are drawn around the reference initial state with
//! spread `δx0 = l_d · exp(−λ k τ)` (`l_d` the cell radius) and kept only if
//! their first `k` tokens match the reference. Each survivor is then
//! compared token by token with the model output.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::discretization::{Grid, Token};
use crate::dynamics::{SystemKind, SystemSpec, Trajectory};
use crate::error::{Error, Result};
use crate::generation::{sample_continuation, ContextPolicy, Sampler, SamplerConfig};
use crate::rng;
use crate::transformer::ParameterSet;

/// Literature largest Lyapunov exponent, used when none is given.
pub fn reference_lyapunov(kind: SystemKind) -> f64 {
    match kind {
        SystemKind::Lorenz => 0.9056,
        SystemKind::Rossler => 1.0 / 5.33,
        SystemKind::Henon => 0.4192,
    }
}

/// `cell_radius · exp(−λ k τ)`.
pub fn initial_spread(cell_radius: f64, lambda: f64, k: usize, tau: f64) -> f64 {
    cell_radius * (-lambda * k as f64 * tau).exp()
}

/// `τ · (first index ≥ k where the sequences differ − k)`, or the full
/// compared length past `k` if they never differ.
pub fn match_time(candidate: &[u32], generated: &[u32], k: usize, tau: f64) -> f64 {
    let end = candidate.len().min(generated.len());
    let first = (k..end).find(|&i| candidate[i] != generated[i]).unwrap_or(end);
    first.saturating_sub(k) as f64 * tau
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSettings {
    /// Conditioning length in tokens.
    pub k: usize,
    /// Exponent used for the initial spread.
    pub lambda: f64,
    /// Sample budget.
    pub samples: usize,
    /// Number of tokens compared, counting the conditioning prefix.
    pub horizon: usize,
    pub seed: u64,
    /// RK4 substeps per stored step (ignored for maps).
    pub substeps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub k: usize,
    pub tau: f64,
    pub lambda: f64,
    pub cell_radius: f64,
    pub delta_x0: f64,
    pub horizon: usize,
    pub drawn: usize,
    pub accepted: usize,
    pub acceptance_rate: f64,
    pub match_times: Vec<f64>,
    /// Maximum of `match_times`.
    pub divergence_time: f64,
}

/// Normal draws around `x0`, simulated and encoded step by step.
struct PrefixSampler<'a> {
    grid: &'a Grid,
    system: &'a SystemSpec,
    tau: f64,
    substeps: usize,
    x0: &'a [f64],
    spread: Normal<f64>,
}

impl<'a> PrefixSampler<'a> {
    fn new(grid: &'a Grid, system: &'a SystemSpec, tau: f64, substeps: usize, x0: &'a [f64], delta: f64) -> Result<Self> {
        let spread = Normal::new(0.0, delta).map_err(|e| Error::Domain(format!("initial spread {delta}: {e}")))?;
        Ok(Self {
            grid,
            system,
            tau,
            substeps,
            x0,
            spread,
        })
    }

    /// One draw of up to `len` states. Returns false as soon as the tokens
    /// leave `prefix`; otherwise feeds each state to `keep_going`, which may
    /// end the run early.
    fn draw(
        &self,
        rng: &mut rng::Rng,
        prefix: &[u32],
        len: usize,
        mut keep_going: impl FnMut(usize, u32, &[f64]) -> bool,
    ) -> Result<bool> {
        let mut x: Vec<f64> = self.x0.iter().map(|c| c + self.spread.sample(rng)).collect();
        for i in 0..len {
            if i > 0 && !self.system.advance(&mut x, self.tau, self.substeps) {
                return Err(Error::Divergence {
                    step: i,
                    trajectory: None,
                });
            }
            let t = self.grid.encode_unchecked(&x);
            if i < prefix.len() && t != prefix[i] {
                return Ok(false);
            }
            if !keep_going(i, t, &x) {
                break;
            }
        }
        Ok(true)
    }
}

/// Divergence time of `generated` against rejection-sampled true
/// continuations of `reference`.
pub fn divergence_time(
    reference: &Trajectory,
    generated: &[u32],
    grid: &Grid,
    system: &SystemSpec,
    settings: &DivergenceSettings,
) -> Result<DivergenceReport> {
    let DivergenceSettings {
        k,
        lambda,
        samples,
        horizon,
        seed,
        substeps,
    } = *settings;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
    }
    if k == 0 || horizon <= k {
        return Err(Error::Domain(format!("need 1 ≤ k < horizon, got k={k}, horizon={horizon}")));
    }
    if samples == 0 || substeps == 0 {
        return Err(Error::Domain("sample budget and substeps must be positive".into()));
    }
    if generated.len() < horizon {
        return Err(Error::Length(format!(
            "generated sequence of {} tokens is shorter than the horizon {horizon}",
            generated.len()
        )));
    }
    if reference.len() < k {
        return Err(Error::Length(format!(
            "reference of {} states is shorter than k={k}",
            reference.len()
        )));
    }
    if reference.dim() != system.dim() || grid.dim() != system.dim() {
        return Err(Error::Shape("reference, grid and system dimensions differ".into()));
    }
    let prefix: Vec<u32> = reference
        .states()
        .take(k)
        .map(|s| grid.encode_state(s).map(Token::id))
        .collect::<Result<_>>()?;
    if generated[..k] != prefix[..] {
        return Err(Error::Domain(
            "generated sequence does not start with the reference's first k tokens".into(),
        ));
    }
    let tau = reference.tau();
    let radius = grid.cell_radius();
    let delta = initial_spread(radius, lambda, k, tau);
    let sampler = PrefixSampler::new(grid, system, tau, substeps, reference.state(0), delta)?;
    let mut rng = rng::stream_rng(seed, 0);
    let mut match_times = Vec::new();
    for _ in 0..samples {
        let mut first_mismatch = horizon;
        let hit = sampler.draw(&mut rng, &prefix, horizon, |i, t, _| {
            if i >= k && t != generated[i] {
                first_mismatch = i;
                return false;
            }
            true
        })?;
        if hit {
            match_times.push((first_mismatch - k) as f64 * tau);
        }
    }
    if match_times.is_empty() {
        return Err(Error::NoAcceptance { k, drawn: samples });
    }
    let divergence_time = match_times.iter().cloned().fold(0.0, f64::max);
    Ok(DivergenceReport {
        k,
        tau,
        lambda,
        cell_radius: radius,
        delta_x0: delta,
        horizon,
        drawn: samples,
        accepted: match_times.len(),
        acceptance_rate: match_times.len() as f64 / samples as f64,
        match_times,
        divergence_time,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffCurveSettings {
    pub k: usize,
    pub count: usize,
    pub lambda: f64,
    /// Draw budget per paired trajectory.
    pub samples: usize,
    pub seed: u64,
    pub substeps: usize,
    pub context: ContextPolicy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffCurve {
    pub times: Vec<f64>,
    pub model_vs_true: Vec<f64>,
    pub true_vs_true: Vec<f64>,
    pub used: usize,
    pub skipped: usize,
}

impl DiffCurve {
    /// `t,mean_model_dist,mean_true_dist` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,mean_model_dist,mean_true_dist\n");
        for i in 0..self.times.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.times[i], self.model_vs_true[i], self.true_vs_true[i]
            ));
        }
        out
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Mean distance to the reference over time for greedy model continuations
/// and for paired true trajectories sharing the first `k` tokens.
pub fn diff_curve(
    test: &[Trajectory],
    params: &ParameterSet,
    observed: Option<&[u32]>,
    grid: &Grid,
    system: &SystemSpec,
    settings: &DiffCurveSettings,
) -> Result<DiffCurve> {
    let DiffCurveSettings {
        k,
        count,
        lambda,
        samples,
        seed,
        substeps,
        context,
    } = settings.clone();
    let len = test
        .first()
        .map(Trajectory::len)
        .ok_or_else(|| Error::Domain("empty test set".into()))?;
    if test.iter().any(|t| t.len() != len) {
        return Err(Error::Shape("test trajectories differ in length".into()));
    }
    if count == 0 || count > test.len() {
        return Err(Error::Domain(format!("count {count} outside 1..={}", test.len())));
    }
    if k == 0 || k >= len {
        return Err(Error::Domain(format!("need 1 ≤ k < {len}, got {k}")));
    }
    if !(lambda > 0.0) || samples == 0 || substeps == 0 {
        return Err(Error::Domain("lambda, sample budget and substeps must be positive".into()));
    }
    let tau = test[0].tau();
    let sampler = Sampler::new(
        SamplerConfig {
            temperature: 0.0,
            mask_to_observed: observed.is_some(),
            max_new_tokens: len - k,
            seed,
            context,
        },
        params.config().vocab,
        observed,
    )?;
    let mut order: Vec<usize> = (0..test.len()).collect();
    order.shuffle(&mut rng::stream_rng(seed, 0));
    order.truncate(count);

    let delta = initial_spread(grid.cell_radius(), lambda, k, tau);
    let mut model_sum = vec![0.0; len];
    let mut true_sum = vec![0.0; len];
    let (mut used, mut skipped) = (0usize, 0usize);
    for &idx in &order {
        let reference = &test[idx];
        let tokens = grid.encode_trajectory(reference)?;
        let generated = sample_continuation(params, &tokens[..k], &sampler)?;
        let pairer = PrefixSampler::new(grid, system, tau, substeps, reference.state(0), delta)?;
        let mut rng = rng::stream_rng(seed, 1 + idx as u64);
        let mut paired = None;
        for _ in 0..samples {
            let mut states = Vec::with_capacity(len * system.dim());
            let hit = pairer.draw(&mut rng, &tokens[..k], len, |_, _, x| {
                states.extend_from_slice(x);
                true
            })?;
            if hit {
                paired = Some(states);
                break;
            }
        }
        let Some(paired) = paired else {
            skipped += 1;
            continue;
        };
        let d = system.dim();
        for t in 0..len {
            let center = grid.decode_token(Token(generated[t]))?;
            model_sum[t] += distance(&center, reference.state(t));
            true_sum[t] += distance(&paired[t * d..(t + 1) * d], reference.state(t));
        }
        used += 1;
    }
    if skipped * 2 >= count {
        return Err(Error::NoAcceptance {
            k,
            drawn: samples * count,
        });
    }
    let scale = 1.0 / used as f64;
    Ok(DiffCurve {
        times: (0..len).map(|i| i as f64 * tau).collect(),
        model_vs_true: model_sum.iter().map(|s| s * scale).collect(),
        true_vs_true: true_sum.iter().map(|s| s * scale).collect(),
        used,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::fit_grid;
    use crate::dynamics::{integrate, iterate};
    use crate::transformer::{init_model, ModelConfig, PositionEncoding};

    #[test]
    fn spread_hand_value() {
        let d = initial_spread(0.35355, 0.9056, 100, 0.03);
        assert!((d - 0.02336).abs() < 1e-5, "{d}");
    }

    #[test]
    fn match_time_edges() {
        let g = [1, 2, 3, 4, 5, 6];
        assert_eq!(match_time(&g, &g, 2, 0.5), 2.0);
        assert_eq!(match_time(&[1, 2, 9, 4, 5, 6], &g, 2, 0.5), 0.0);
        assert_eq!(match_time(&[1, 2, 3, 4, 0, 6], &g, 2, 0.5), 1.0);
    }

    fn henon_setup() -> (SystemSpec, Trajectory, Grid) {
        let sys = SystemSpec::henon();
        let traj = iterate(&sys, &[0.1, 0.1], 300).unwrap();
        let grid = fit_grid(&[traj.clone()], 20, 1e-3).unwrap();
        (sys, traj, grid)
    }

    #[test]
    fn perfect_match_reaches_the_bound() {
        let (sys, traj, grid) = henon_setup();
        let tokens = grid.encode_trajectory(&traj).unwrap();
        let settings = DivergenceSettings {
            k: 10,
            lambda: 1e6,
            samples: 3,
            horizon: 40,
            seed: 1,
            substeps: 1,
        };
        let r = divergence_time(&traj, &tokens, &grid, &sys, &settings).unwrap();
        assert_eq!(r.delta_x0, 0.0);
        assert_eq!(r.accepted, 3);
        assert_eq!(r.divergence_time, 30.0);
    }

    #[test]
    fn immediate_mismatch_is_zero() {
        let (sys, traj, grid) = henon_setup();
        let mut tokens = grid.encode_trajectory(&traj).unwrap();
        tokens[10] = (tokens[10] + 1) % grid.vocab_size() as u32;
        let settings = DivergenceSettings {
            k: 10,
            lambda: 1e6,
            samples: 2,
            horizon: 40,
            seed: 1,
            substeps: 1,
        };
        let r = divergence_time(&traj, &tokens, &grid, &sys, &settings).unwrap();
        assert_eq!(r.divergence_time, 0.0);
    }

    #[test]
    fn no_acceptance_is_an_error() {
        let (sys, traj, grid) = henon_setup();
        let tokens = grid.encode_trajectory(&traj).unwrap();
        let settings = DivergenceSettings {
            k: 60,
            // tiny exponent: the spread is about one cell, far too wide to
            // reproduce 60 tokens
            lambda: 1e-9,
            samples: 20,
            horizon: 80,
            seed: 3,
            substeps: 1,
        };
        let err = divergence_time(&traj, &tokens, &grid, &sys, &settings).unwrap_err();
        assert!(matches!(err, Error::NoAcceptance { k: 60, drawn: 20 }), "{err}");
    }

    #[test]
    fn reports_are_bounded_and_seeded() {
        let sys = SystemSpec::lorenz();
        let traj = integrate(&sys, &[1.0, 1.0, 20.0], 0.03, 200, 10).unwrap();
        let grid = fit_grid(&[traj.clone()], 10, 1e-3).unwrap();
        let tokens = grid.encode_trajectory(&traj).unwrap();
        let settings = DivergenceSettings {
            k: 20,
            lambda: 0.9056,
            samples: 50,
            horizon: 150,
            seed: 2,
            substeps: 10,
        };
        let a = divergence_time(&traj, &tokens, &grid, &sys, &settings).unwrap();
        let b = divergence_time(&traj, &tokens, &grid, &sys, &settings).unwrap();
        assert_eq!(a, b);
        assert!(a.accepted <= a.drawn && a.accepted > 0);
        assert!(a.divergence_time >= 0.0 && a.divergence_time <= (150 - 20) as f64 * 0.03 + 1e-12);
    }

    #[test]
    fn diff_curve_shared_prefix_and_identical_pair() {
        let (sys, _, _) = henon_setup();
        let test: Vec<Trajectory> = (0..3)
            .map(|i| iterate(&sys, &[0.1 + 0.01 * i as f64, 0.1], 30).unwrap())
            .collect();
        let grid = fit_grid(&test, 8, 1e-3).unwrap();
        let cfg = ModelConfig {
            vocab: grid.vocab_size(),
            context: 16,
            dim: 8,
            layers: 1,
            heads: 2,
            dropout: 0.0,
            tie_embeddings: true,
            position: PositionEncoding::Learned,
        };
        let params = init_model(&cfg, 0).unwrap();
        let settings = DiffCurveSettings {
            k: 5,
            count: 1,
            lambda: 1e6,
            samples: 4,
            seed: 9,
            substeps: 1,
            context: ContextPolicy::Refill { keep: 8 },
        };
        let c = diff_curve(&test, &params, None, &grid, &sys, &settings).unwrap();
        assert_eq!(c.times.len(), 31);
        assert!(c.true_vs_true.iter().all(|&d| d == 0.0));
        let diag = 2.0 * grid.cell_radius();
        assert!(c.model_vs_true[..5].iter().all(|&d| d <= diag));
        assert!(c.to_csv().starts_with("t,mean_model_dist,mean_true_dist\n0,"));
    }
}
