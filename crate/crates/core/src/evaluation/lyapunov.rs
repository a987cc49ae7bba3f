//! Largest Lyapunov exponent from token sequences.
//!
//! Each token stands for its cell center; the Jacobian of the map at that
//! center is multiplied along windows of length `n`, and
//! `λ_n = ⟨ln ‖J_{m+n-1} ⋯ J_m‖₂⟩ / n`. The limit is extrapolated by
//! fitting `λ + c1/n + c2/n²`.

use std::collections::HashMap;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::discretization::{Grid, Token};
use crate::dynamics::SystemSpec;
use crate::error::{Error, Result};
use crate::linalg::{least_squares, SquareMatrix};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowMode {
    /// Every start position.
    #[default]
    Sliding,
    /// Starts at multiples of `n`.
    Disjoint,
}

/// `values[n - 1]` is λ_n, averaged over `windows[n - 1]` windows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSeries {
    pub values: Vec<f64>,
    pub windows: Vec<usize>,
}

impl LyapunovSeries {
    /// A series given directly, e.g. from a previous run.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite series value {v}")));
        }
        let windows = vec![0; values.len()];
        Ok(Self { values, windows })
    }

    pub fn n_max(&self) -> usize {
        self.values.len()
    }

    /// `n,lambda_n,windows` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,lambda_n,windows\n");
        for (i, (v, w)) in self.values.iter().zip(&self.windows).enumerate() {
            out.push_str(&format!("{},{v},{w}\n", i + 1));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub series: LyapunovSeries,
    pub lambda: f64,
    pub c1: f64,
    pub c2: f64,
    pub fit_n_min: usize,
    pub fit_n_max: usize,
}

/// λ_n for `n = 1..=n_max` of a discrete map, with Jacobians evaluated at
/// decoded cell centers.
pub fn lyapunov_series(
    sequences: &[Vec<u32>],
    grid: &Grid,
    system: &SystemSpec,
    n_max: usize,
    mode: WindowMode,
) -> Result<LyapunovSeries> {
    if !system.is_discrete() {
        return Err(Error::Unsupported(format!(
            "Lyapunov estimation from tokens needs a discrete map; {} is continuous-time",
            system.kind()
        )));
    }
    if grid.dim() != system.dim() {
        return Err(Error::Shape(format!(
            "grid of dimension {} for a {}-dimensional system",
            grid.dim(),
            system.dim()
        )));
    }
    lyapunov_series_with(sequences, grid, |x| system.jacobian_unchecked(x), n_max, mode)
}

/// As [`lyapunov_series`] with an arbitrary Jacobian.
pub fn lyapunov_series_with(
    sequences: &[Vec<u32>],
    grid: &Grid,
    jacobian: impl Fn(&[f64]) -> SquareMatrix,
    n_max: usize,
    mode: WindowMode,
) -> Result<LyapunovSeries> {
    if n_max < 3 {
        return Err(Error::Domain(format!("n_max must be at least 3, got {n_max}")));
    }
    let mut cache: HashMap<u32, SquareMatrix> = HashMap::new();
    let mut sums = vec![0.0; n_max];
    let mut counts = vec![0usize; n_max];
    for seq in sequences {
        let mut jacs = Vec::with_capacity(seq.len());
        for &t in seq {
            let j = match cache.get(&t) {
                Some(j) => j.clone(),
                None => {
                    let j = jacobian(&grid.decode_token(Token(t))?);
                    cache.insert(t, j.clone());
                    j
                }
            };
            jacs.push(j);
        }
        match mode {
            WindowMode::Sliding => {
                for m in 0..jacs.len() {
                    let len = n_max.min(jacs.len() - m);
                    accumulate(&jacs[m..m + len], |n, log_norm| {
                        sums[n - 1] += log_norm;
                        counts[n - 1] += 1;
                    })?;
                }
            }
            WindowMode::Disjoint => {
                for n in 1..=n_max {
                    let mut m = 0;
                    while m + n <= jacs.len() {
                        let mut last = 0.0;
                        accumulate(&jacs[m..m + n], |_, l| last = l)?;
                        sums[n - 1] += last;
                        counts[n - 1] += 1;
                        m += n;
                    }
                }
            }
        }
    }
    if let Some(n) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Domain(format!("no window of length {} fits the sequences", n + 1)));
    }
    let values = sums
        .iter()
        .zip(&counts)
        .enumerate()
        .map(|(i, (s, &c))| s / (c as f64 * (i + 1) as f64))
        .collect();
    Ok(LyapunovSeries { values, windows: counts })
}

/// Multiply `jacs` left to right in time order (`J_k ⋯ J_0`), rescaling by
/// the running norm, and report `ln ‖J_{n-1} ⋯ J_0‖` for each prefix length `n`.
fn accumulate(jacs: &[SquareMatrix], mut emit: impl FnMut(usize, f64)) -> Result<()> {
    let Some(first) = jacs.first() else {
        return Ok(());
    };
    let mut p = SquareMatrix::identity(first.dim());
    let mut acc = 0.0;
    for (k, j) in jacs.iter().enumerate() {
        p = j.matmul(&p);
        let s = p.spectral_norm();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Domain("Jacobian product has zero or non-finite norm".into()));
        }
        acc += s.ln();
        p.scale(1.0 / s);
        emit(k + 1, acc);
    }
    Ok(())
}

/// Least-squares fit of `λ_n = λ + c1/n + c2/n²` over `n_range`.
pub fn fit_lyapunov(series: &LyapunovSeries, n_range: RangeInclusive<usize>) -> Result<LyapunovEstimate> {
    let (lo, hi) = (*n_range.start(), *n_range.end());
    if lo == 0 || hi > series.n_max() {
        return Err(Error::Domain(format!(
            "fit range {lo}..={hi} outside the series 1..={}",
            series.n_max()
        )));
    }
    let ns: Vec<usize> = n_range.collect();
    if ns.len() < 3 {
        return Err(Error::Domain(format!("fit needs at least 3 distinct n, got {}", ns.len())));
    }
    let mut a = Vec::with_capacity(ns.len() * 3);
    let mut b = Vec::with_capacity(ns.len());
    for &n in &ns {
        let x = 1.0 / n as f64;
        a.extend_from_slice(&[1.0, x, x * x]);
        b.push(series.values[n - 1]);
    }
    let coef = least_squares(&a, ns.len(), 3, &b)?;
    if coef.iter().any(|c| !c.is_finite()) {
        return Err(Error::Domain("non-finite fit coefficients".into()));
    }
    Ok(LyapunovEstimate {
        series: series.clone(),
        lambda: coef[0],
        c1: coef[1],
        c2: coef[2],
        fit_n_min: lo,
        fit_n_max: hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_at_origin_give_zero() {
        // one cell centered exactly at 0
        let grid = Grid::new(1, vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let s = lyapunov_series(&[vec![0; 20]], &grid, &SystemSpec::henon(), 5, WindowMode::Sliding).unwrap();
        assert!(s.values[0].abs() < 1e-15, "{:?}", s.values);
        assert_eq!(s.windows, vec![20, 19, 18, 17, 16]);
    }

    #[test]
    fn identity_jacobian_is_neutral() {
        let grid = Grid::new(4, vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let seqs = vec![vec![0, 5, 9, 3, 15, 2, 7], vec![1, 1, 4, 8]];
        for mode in [WindowMode::Sliding, WindowMode::Disjoint] {
            let s = lyapunov_series_with(&seqs, &grid, |_| SquareMatrix::identity(2), 4, mode).unwrap();
            assert!(s.values.iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn continuous_systems_are_rejected() {
        let grid = Grid::new(2, vec![0.0; 3], vec![1.0; 3]).unwrap();
        let err = lyapunov_series(&[vec![0; 9]], &grid, &SystemSpec::lorenz(), 3, WindowMode::Sliding);
        assert!(matches!(err, Err(Error::Unsupported(_))));
    }

    #[test]
    fn running_normalization_equals_direct_product() {
        let grid = Grid::new(10, vec![-1.5, -0.5], vec![1.5, 0.5]).unwrap();
        let henon = SystemSpec::henon();
        let seq: Vec<u32> = (0..40).map(|i| (i * 37 % 100) as u32).collect();
        let s = lyapunov_series(&[seq.clone()], &grid, &henon, 10, WindowMode::Sliding).unwrap();
        for n in 1..=10 {
            let mut total = 0.0;
            let mut count = 0;
            for m in 0..=seq.len() - n {
                let mut p = SquareMatrix::identity(2);
                for &t in &seq[m..m + n] {
                    let j = henon.jacobian(&grid.decode_token(Token(t)).unwrap()).unwrap();
                    p = j.matmul(&p);
                }
                total += p.spectral_norm().ln();
                count += 1;
            }
            let direct = total / (count as f64 * n as f64);
            assert!((direct - s.values[n - 1]).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn short_sequences_skip_long_windows() {
        let grid = Grid::new(4, vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let s = lyapunov_series(
            &[vec![0, 1], vec![2, 3, 4, 5]],
            &grid,
            &SystemSpec::henon(),
            3,
            WindowMode::Sliding,
        )
        .unwrap();
        assert_eq!(s.windows, vec![6, 4, 2]);
        assert!(lyapunov_series(&[vec![0, 1]], &grid, &SystemSpec::henon(), 3, WindowMode::Sliding).is_err());
    }

    #[test]
    fn fit_recovers_exact_models() {
        let series = LyapunovSeries::from_values((1..=15).map(|n| 0.4192 + 0.3 / n as f64).collect()).unwrap();
        let e = fit_lyapunov(&series, 1..=15).unwrap();
        assert!((e.lambda - 0.4192).abs() < 1e-10);
        assert!((e.c1 - 0.3).abs() < 1e-10);
        assert!(e.c2.abs() < 1e-10);

        let flat = LyapunovSeries::from_values(vec![0.5; 15]).unwrap();
        let e = fit_lyapunov(&flat, 1..=15).unwrap();
        assert!((e.lambda - 0.5).abs() < 1e-12 && e.c1.abs() < 1e-10 && e.c2.abs() < 1e-10);

        let full = LyapunovSeries::from_values(
            (1..=15)
                .map(|n| {
                    let x = 1.0 / n as f64;
                    -0.2 + 1.5 * x - 0.7 * x * x
                })
                .collect(),
        )
        .unwrap();
        let e = fit_lyapunov(&full, 2..=12).unwrap();
        assert!((e.lambda + 0.2).abs() < 1e-10 && (e.c1 - 1.5).abs() < 1e-9 && (e.c2 + 0.7).abs() < 1e-9);
    }

    #[test]
    fn fit_needs_three_points() {
        let s = LyapunovSeries::from_values(vec![0.1; 15]).unwrap();
        assert!(matches!(fit_lyapunov(&s, 4..=5), Err(Error::Domain(_))));
        assert!(fit_lyapunov(&s, 1..=16).is_err());
    }
}
