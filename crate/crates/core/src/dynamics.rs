//! The three benchmark systems, their integrators, and dataset generation.
//!
//! Continuous-time systems (Lorenz, Rossler) are advanced with fixed-step
//! classical RK4; the Henon map is iterated directly. Stored states are
//! `x(k·τ)` for `k = 0..=steps`, so the initial condition is always the
//! first state of a trajectory.

use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::rng::{self, Rng};

/// Default number of RK4 substeps per stored step.
pub const DEFAULT_SUBSTEPS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeKind {
    Continuous,
    Discrete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Lorenz,
    Rossler,
    Henon,
}

impl SystemKind {
    pub fn name(self) -> &'static str {
        match self {
            SystemKind::Lorenz => "lorenz",
            SystemKind::Rossler => "rossler",
            SystemKind::Henon => "henon",
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SystemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lorenz" => Ok(SystemKind::Lorenz),
            "rossler" | "rössler" => Ok(SystemKind::Rossler),
            "henon" | "hénon" => Ok(SystemKind::Henon),
            other => Err(Error::Usage(format!("unknown system {other:?}"))),
        }
    }
}

/// A dynamical system together with its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SystemSpec {
    Lorenz { sigma: f64, rho: f64, beta: f64 },
    Rossler { a: f64, b: f64, c: f64 },
    Henon { a: f64, b: f64 },
}

impl SystemSpec {
    /// Standard chaotic Lorenz regime σ=10, ρ=28, β=8/3.
    pub fn lorenz() -> Self {
        SystemSpec::Lorenz {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
        }
    }

    pub fn rossler() -> Self {
        SystemSpec::Rossler {
            a: 0.15,
            b: 0.2,
            c: 10.0,
        }
    }

    pub fn henon() -> Self {
        SystemSpec::Henon { a: 1.4, b: 0.3 }
    }

    pub fn default_for(kind: SystemKind) -> Self {
        match kind {
            SystemKind::Lorenz => Self::lorenz(),
            SystemKind::Rossler => Self::rossler(),
            SystemKind::Henon => Self::henon(),
        }
    }

    pub fn kind(&self) -> SystemKind {
        match self {
            SystemSpec::Lorenz { .. } => SystemKind::Lorenz,
            SystemSpec::Rossler { .. } => SystemKind::Rossler,
            SystemSpec::Henon { .. } => SystemKind::Henon,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SystemSpec::Henon { .. } => 2,
            _ => 3,
        }
    }

    pub fn time_kind(&self) -> TimeKind {
        match self {
            SystemSpec::Henon { .. } => TimeKind::Discrete,
            _ => TimeKind::Continuous,
        }
    }

    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            SystemSpec::Lorenz { sigma, rho, beta } => {
                vec![("sigma", sigma), ("rho", rho), ("beta", beta)]
            }
            SystemSpec::Rossler { a, b, c } => vec![("a", a), ("b", b), ("c", c)],
            SystemSpec::Henon { a, b } => vec![("a", a), ("b", b)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.params() {
            if !v.is_finite() {
                return Err(Error::Domain(format!("{} parameter {name} is not finite", self.kind())));
            }
        }
        Ok(())
    }

    fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!(
                "{} state has dimension {}, expected {}",
                self.kind(),
                x.len(),
                self.dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite state {x:?}")));
        }
        Ok(())
    }

    /// Right-hand side `f(x)` of a continuous-time system.
    pub fn vector_field(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.time_kind() == TimeKind::Discrete {
            return Err(Error::Unsupported(format!(
                "{} is discrete-time and has no vector field",
                self.kind()
            )));
        }
        self.check_state(x)?;
        let mut out = vec![0.0; 3];
        self.field_into(x, &mut out);
        Ok(out)
    }

    /// One iteration of a discrete-time map.
    pub fn map_step(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.time_kind() == TimeKind::Continuous {
            return Err(Error::Unsupported(format!(
                "{} is continuous-time; use integrate",
                self.kind()
            )));
        }
        self.check_state(x)?;
        let mut out = vec![0.0; 2];
        self.map_into(x, &mut out);
        Ok(out)
    }

    /// Analytic Jacobian of the map (discrete) or vector field (continuous).
    pub fn jacobian(&self, x: &[f64]) -> Result<SquareMatrix> {
        self.check_state(x)?;
        Ok(self.jacobian_unchecked(x))
    }

    pub(crate) fn jacobian_unchecked(&self, x: &[f64]) -> SquareMatrix {
        match *self {
            SystemSpec::Lorenz { sigma, rho, beta } => {
                SquareMatrix::from_rows(&[&[-sigma, sigma, 0.0], &[rho - x[2], -1.0, -x[0]], &[x[1], x[0], -beta]])
            }
            SystemSpec::Rossler { a, c, .. } => {
                SquareMatrix::from_rows(&[&[0.0, -1.0, -1.0], &[1.0, a, 0.0], &[x[2], 0.0, x[0] - c]])
            }
            SystemSpec::Henon { a, b } => SquareMatrix::from_rows(&[&[-2.0 * a * x[0], 1.0], &[b, 0.0]]),
        }
    }

    fn field_into(&self, x: &[f64], out: &mut [f64]) {
        match *self {
            SystemSpec::Lorenz { sigma, rho, beta } => {
                out[0] = sigma * (x[1] - x[0]);
                out[1] = x[0] * (rho - x[2]) - x[1];
                out[2] = x[0] * x[1] - beta * x[2];
            }
            SystemSpec::Rossler { a, b, c } => {
                out[0] = -x[1] - x[2];
                out[1] = x[0] + a * x[1];
                out[2] = b + x[2] * (x[0] - c);
            }
            SystemSpec::Henon { .. } => unreachable!("discrete map has no vector field"),
        }
    }

    fn map_into(&self, x: &[f64], out: &mut [f64]) {
        match *self {
            SystemSpec::Henon { a, b } => {
                out[0] = 1.0 - a * x[0] * x[0] + x[1];
                out[1] = b * x[0];
            }
            _ => unreachable!("continuous system has no map"),
        }
    }

    /// One classical RK4 step of size `h`, in place.
    fn rk4_step(&self, x: &mut [f64], h: f64) {
        let d = x.len();
        let mut k1 = [0.0; 3];
        let mut k2 = [0.0; 3];
        let mut k3 = [0.0; 3];
        let mut k4 = [0.0; 3];
        let mut tmp = [0.0; 3];
        self.field_into(x, &mut k1[..d]);
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * h * k1[i];
        }
        self.field_into(&tmp[..d], &mut k2[..d]);
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * h * k2[i];
        }
        self.field_into(&tmp[..d], &mut k3[..d]);
        for i in 0..d {
            tmp[i] = x[i] + h * k3[i];
        }
        self.field_into(&tmp[..d], &mut k4[..d]);
        for i in 0..d {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    /// Advance `x` by one stored step: `tau` of RK4 time in `substeps`
    /// pieces for flows, one iteration for maps. Returns false if the
    /// state became non-finite.
    pub(crate) fn advance(&self, x: &mut [f64], tau: f64, substeps: usize) -> bool {
        match self.time_kind() {
            TimeKind::Continuous => {
                let h = tau / substeps as f64;
                for _ in 0..substeps {
                    self.rk4_step(x, h);
                }
            }
            TimeKind::Discrete => {
                let mut out = [0.0; 2];
                self.map_into(x, &mut out);
                x.copy_from_slice(&out);
            }
        }
        x.iter().all(|v| v.is_finite())
    }

    pub fn is_discrete(&self) -> bool {
        self.time_kind() == TimeKind::Discrete
    }
}

/// A sampled trajectory: `len()` states of dimension `dim`, `tau` apart.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    dim: usize,
    tau: f64,
    states: Vec<f64>,
}

impl Trajectory {
    /// Build from row-major values; `values.len()` must be a multiple of `dim`.
    pub fn from_flat(dim: usize, tau: f64, states: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Shape("trajectory dimension must be positive".into()));
        }
        if !states.len().is_multiple_of(dim) {
            return Err(Error::Shape(format!(
                "{} values do not form {dim}-dimensional states",
                states.len()
            )));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::Domain(format!("tau must be positive, got {tau}")));
        }
        Ok(Self { dim, tau, states })
    }

    pub fn from_states<S: AsRef<[f64]>>(dim: usize, tau: f64, states: &[S]) -> Result<Self> {
        let mut flat = Vec::with_capacity(states.len() * dim);
        for s in states {
            let s = s.as_ref();
            if s.len() != dim {
                return Err(Error::Shape(format!(
                    "state of dimension {} in a {dim}-dimensional trajectory",
                    s.len()
                )));
            }
            flat.extend_from_slice(s);
        }
        Self::from_flat(dim, tau, flat)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn len(&self) -> usize {
        self.states.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.states.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.states
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.states
    }
}

/// Consecutive non-overlapping pieces of `len` states; short tails are dropped.
pub fn segments(trajectories: &[Trajectory], len: usize) -> Result<Vec<Trajectory>> {
    if len == 0 {
        return Err(Error::Domain("segment length must be at least 1".into()));
    }
    let mut out = Vec::new();
    for t in trajectories {
        let d = t.dim();
        for chunk in t.as_flat().chunks_exact(len * d) {
            out.push(Trajectory::from_flat(d, t.tau(), chunk.to_vec())?);
        }
    }
    Ok(out)
}

/// RK4-integrate a continuous-time system, storing `steps + 1` states.
pub fn integrate(system: &SystemSpec, x0: &[f64], tau: f64, steps: usize, substeps: usize) -> Result<Trajectory> {
    if system.is_discrete() {
        return Err(Error::Unsupported(format!("{} is discrete-time; use iterate", system.kind())));
    }
    if substeps == 0 {
        return Err(Error::Domain("substeps must be at least 1".into()));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::Domain(format!("tau must be positive, got {tau}")));
    }
    system.validate()?;
    system.check_state(x0)?;
    evolve(system, x0, tau, steps, substeps, 0)
}

/// Iterate a discrete map `steps` times, storing `steps + 1` states.
pub fn iterate(system: &SystemSpec, x0: &[f64], steps: usize) -> Result<Trajectory> {
    if !system.is_discrete() {
        return Err(Error::Unsupported(format!(
            "{} is continuous-time; use integrate",
            system.kind()
        )));
    }
    system.validate()?;
    system.check_state(x0)?;
    evolve(system, x0, 1.0, steps, 1, 0)
}

/// Simulate either kind of system; `tau`/`substeps` are ignored for maps.
pub fn simulate(system: &SystemSpec, x0: &[f64], tau: f64, steps: usize, substeps: usize) -> Result<Trajectory> {
    if system.is_discrete() {
        iterate(system, x0, steps)
    } else {
        integrate(system, x0, tau, steps, substeps)
    }
}

fn evolve(system: &SystemSpec, x0: &[f64], tau: f64, steps: usize, substeps: usize, burn_in: usize) -> Result<Trajectory> {
    let d = system.dim();
    let mut x = x0.to_vec();
    for step in 0..burn_in {
        if !system.advance(&mut x, tau, substeps) {
            return Err(Error::Divergence {
                step: step + 1,
                trajectory: None,
            });
        }
    }
    let mut states = Vec::with_capacity((steps + 1) * d);
    states.extend_from_slice(&x);
    for step in 0..steps {
        if !system.advance(&mut x, tau, substeps) {
            return Err(Error::Divergence {
                step: burn_in + step + 1,
                trajectory: None,
            });
        }
        states.extend_from_slice(&x);
    }
    let tau = if system.is_discrete() { 1.0 } else { tau };
    Trajectory::from_flat(d, tau, states)
}

/// Draw an initial condition from the preset distribution of `system`'s kind.
pub fn sample_initial(system: &SystemSpec, rng: &mut Rng) -> Vec<f64> {
    match system.kind() {
        SystemKind::Lorenz => (0..3).map(|_| rng.gen_range(-0.1..0.1)).collect(),
        SystemKind::Rossler => [5.0, 0.0, 0.0].iter().map(|c| c + rng.gen_range(-1.0..1.0)).collect(),
        SystemKind::Henon => [-0.95, 0.35].iter().map(|c| c + rng.gen_range(-0.05..0.05)).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn stream_base(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Test => 1 << 32,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(Error::Usage(format!("unknown split {other:?}"))),
        }
    }
}

/// Everything needed to regenerate a dataset bit-for-bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub preset: String,
    pub system: SystemSpec,
    pub split: Split,
    pub seed: u64,
    pub tau: f64,
    pub steps: usize,
    pub substeps: usize,
    pub burn_in: usize,
    pub rng: String,
    /// The stored sequence begins with the sampled initial condition itself.
    pub includes_initial_state: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub trajectories: Vec<Trajectory>,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.meta.system.dim()
    }

    pub fn total_states(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }
}

/// Parameters for [`generate_dataset`].
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetRequest {
    pub preset: String,
    pub system: SystemSpec,
    pub split: Split,
    pub count: usize,
    pub steps: usize,
    pub tau: f64,
    pub substeps: usize,
    pub burn_in: usize,
    pub seed: u64,
}

/// Generate `count` trajectories, each from its own seeded stream, so the
/// result is a pure function of the request.
pub fn generate_dataset(req: &DatasetRequest) -> Result<Dataset> {
    if req.count == 0 {
        return Err(Error::Domain("dataset needs at least one trajectory".into()));
    }
    req.system.validate()?;
    let continuous = !req.system.is_discrete();
    if continuous && !(req.tau.is_finite() && req.tau > 0.0) {
        return Err(Error::Domain(format!("tau must be positive, got {}", req.tau)));
    }
    if continuous && req.substeps == 0 {
        return Err(Error::Domain("substeps must be at least 1".into()));
    }
    let (tau, substeps) = if continuous { (req.tau, req.substeps) } else { (1.0, 1) };
    let mut trajectories = Vec::with_capacity(req.count);
    for i in 0..req.count {
        let mut rng = rng::stream_rng(req.seed, req.split.stream_base() + i as u64);
        let x0 = sample_initial(&req.system, &mut rng);
        let traj = evolve(&req.system, &x0, tau, req.steps, substeps, req.burn_in).map_err(|e| match e {
            Error::Divergence { step, .. } => Error::Divergence {
                step,
                trajectory: Some(i),
            },
            other => other,
        })?;
        trajectories.push(traj);
    }
    Ok(Dataset {
        meta: DatasetMeta {
            preset: req.preset.clone(),
            system: req.system,
            split: req.split,
            seed: req.seed,
            tau,
            steps: req.steps,
            substeps,
            burn_in: req.burn_in,
            rng: rng::RNG_ALGORITHM.to_string(),
            includes_initial_state: true,
        },
        trajectories,
    })
}

/// Named experiment configurations: the published setups and reduced
/// desk-scale versions of each.
#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub system: SystemSpec,
    pub train_count: usize,
    pub test_count: usize,
    pub tau: f64,
    pub steps: usize,
}

impl Preset {
    pub fn all() -> Vec<Preset> {
        vec![
            Preset {
                name: "lorenz",
                system: SystemSpec::lorenz(),
                train_count: 1000,
                test_count: 20,
                tau: 0.03,
                // duration 1000 at τ = 0.03
                steps: 33_333,
            },
            Preset {
                name: "rossler",
                system: SystemSpec::rossler(),
                train_count: 1000,
                test_count: 20,
                tau: 0.1,
                steps: 10_000,
            },
            Preset {
                name: "henon",
                system: SystemSpec::henon(),
                train_count: 100,
                test_count: 10,
                tau: 1.0,
                steps: 10_000,
            },
            Preset {
                name: "lorenz-desk",
                system: SystemSpec::lorenz(),
                train_count: 50,
                test_count: 10,
                tau: 0.03,
                steps: 3_000,
            },
            Preset {
                name: "rossler-desk",
                system: SystemSpec::rossler(),
                train_count: 50,
                test_count: 10,
                tau: 0.1,
                steps: 2_000,
            },
            Preset {
                name: "henon-desk",
                system: SystemSpec::henon(),
                train_count: 20,
                test_count: 10,
                tau: 1.0,
                steps: 10_000,
            },
        ]
    }

    pub fn by_name(name: &str) -> Result<Preset> {
        Self::all()
            .into_iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::Usage(format!("unknown preset {name:?}")))
    }

    pub fn request(&self, split: Split, seed: u64) -> DatasetRequest {
        DatasetRequest {
            preset: self.name.to_string(),
            system: self.system,
            split,
            count: match split {
                Split::Train => self.train_count,
                Split::Test => self.test_count,
            },
            steps: self.steps,
            tau: self.tau,
            substeps: DEFAULT_SUBSTEPS,
            burn_in: 0,
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn lorenz_field_at_ones() {
        let f = SystemSpec::lorenz().vector_field(&[1.0, 1.0, 1.0]).unwrap();
        assert!(close(&f, &[0.0, 26.0, -5.0 / 3.0], 1e-14));
    }

    #[test]
    fn rossler_field_at_preset_center() {
        let f = SystemSpec::rossler().vector_field(&[5.0, 0.0, 0.0]).unwrap();
        assert!(close(&f, &[0.0, 5.0, 0.2], 1e-15));
    }

    #[test]
    fn lorenz_equilibria() {
        let (beta, rho) = (8.0 / 3.0, 28.0);
        let r = (beta * (rho - 1.0_f64)).sqrt();
        for s in [1.0, -1.0] {
            let f = SystemSpec::lorenz().vector_field(&[s * r, s * r, rho - 1.0]).unwrap();
            assert!(close(&f, &[0.0; 3], 1e-12), "{f:?}");
        }
    }

    #[test]
    fn henon_steps() {
        let h = SystemSpec::henon();
        let y = h.map_step(&[-0.95, 0.35]).unwrap();
        assert!(close(&y, &[0.0865, -0.285], 1e-15));
        assert_eq!(h.map_step(&[0.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        // fixed point: root of 1.4x² + 0.7x − 1 = 0
        let xs = (-0.7 + (0.49f64 + 5.6).sqrt()) / 2.8;
        let fp = [xs, 0.3 * xs];
        assert!(close(&h.map_step(&fp).unwrap(), &fp, 1e-12));
        assert!(close(&fp, &[0.63135, 0.18941], 1e-4));
    }

    #[test]
    fn kind_mismatch_errors() {
        assert!(matches!(
            SystemSpec::henon().vector_field(&[0.0, 0.0]),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(SystemSpec::lorenz().map_step(&[0.0; 3]), Err(Error::Unsupported(_))));
        assert!(matches!(
            SystemSpec::lorenz().vector_field(&[f64::NAN, 0.0, 0.0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(SystemSpec::lorenz().vector_field(&[0.0, 0.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn henon_jacobian_at_zero() {
        let j = SystemSpec::henon().jacobian(&[0.0, 123.0]).unwrap();
        assert_eq!(j.as_slice(), &[0.0, 1.0, 0.3, 0.0]);
        assert!((j.spectral_norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_steps_keeps_initial_state() {
        let t = integrate(&SystemSpec::lorenz(), &[1.0, 2.0, 3.0], 0.03, 0, 30).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.state(0), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn integration_divergence_is_reported() {
        let wild = SystemSpec::Lorenz {
            sigma: 1e200,
            rho: 28.0,
            beta: 1.0,
        };
        match integrate(&wild, &[1.0, 2.0, 3.0], 1.0, 10, 1) {
            Err(Error::Divergence { step, .. }) => assert!(step >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn lorenz_one_step_matches_fine_reference() {
        let sys = SystemSpec::lorenz();
        let coarse = integrate(&sys, &[1.0, 1.0, 1.0], 0.03, 1, 30).unwrap();
        let fine = integrate(&sys, &[1.0, 1.0, 1.0], 0.03, 1, 3000).unwrap();
        assert!(close(coarse.state(1), fine.state(1), 1e-6));
    }

    #[test]
    fn fixed_point_stays_fixed() {
        let r = (8.0 / 3.0 * 27.0f64).sqrt();
        let fp = [r, r, 27.0];
        let t = integrate(&SystemSpec::lorenz(), &fp, 0.03, 100, 100).unwrap();
        for s in t.states() {
            assert!(close(s, &fp, 1e-6));
        }
    }

    #[test]
    fn initial_condition_boxes() {
        let mut rng = rng::stream_rng(3, 0);
        for _ in 0..1000 {
            let l = sample_initial(&SystemSpec::lorenz(), &mut rng);
            assert!(l.iter().all(|v| (-0.1..=0.1).contains(v)));
            let r = sample_initial(&SystemSpec::rossler(), &mut rng);
            assert!((4.0..=6.0).contains(&r[0]));
            assert!(r[1..].iter().all(|v| (-1.0..=1.0).contains(v)));
            let h = sample_initial(&SystemSpec::henon(), &mut rng);
            assert!((-1.0..=-0.9).contains(&h[0]) && (0.3..=0.4).contains(&h[1]));
        }
        let a = sample_initial(&SystemSpec::rossler(), &mut rng::stream_rng(9, 2));
        let b = sample_initial(&SystemSpec::rossler(), &mut rng::stream_rng(9, 2));
        assert_eq!(a, b);
    }

    #[test]
    fn henon_full_preset_shape() {
        let p = Preset::by_name("henon").unwrap();
        assert_eq!((p.train_count, p.test_count, p.steps), (100, 10, 10_000));
        let mut req = p.request(Split::Train, 1);
        req.count = 2;
        let ds = generate_dataset(&req).unwrap();
        assert_eq!(ds.trajectories.len(), 2);
        assert!(ds.trajectories.iter().all(|t| t.len() == 10_001 && t.tau() == 1.0));
    }

    #[test]
    fn single_state_dataset() {
        let mut req = Preset::by_name("lorenz").unwrap().request(Split::Train, 5);
        req.count = 1;
        req.steps = 0;
        let ds = generate_dataset(&req).unwrap();
        assert_eq!(ds.trajectories.len(), 1);
        assert_eq!(ds.trajectories[0].len(), 1);
    }

    #[test]
    fn splits_draw_different_initial_conditions() {
        let p = Preset::by_name("henon-desk").unwrap();
        let mut a = p.request(Split::Train, 4);
        let mut b = p.request(Split::Test, 4);
        a.count = 1;
        b.count = 1;
        a.steps = 0;
        b.steps = 0;
        let ta = generate_dataset(&a).unwrap();
        let tb = generate_dataset(&b).unwrap();
        assert_ne!(ta.trajectories[0], tb.trajectories[0]);
    }

    #[test]
    fn burn_in_discards_transient() {
        let p = Preset::by_name("henon-desk").unwrap();
        let mut req = p.request(Split::Train, 4);
        req.count = 1;
        req.steps = 5;
        let plain = generate_dataset(&req).unwrap();
        req.burn_in = 2;
        req.steps = 3;
        let burned = generate_dataset(&req).unwrap();
        assert_eq!(burned.trajectories[0].state(0), plain.trajectories[0].state(2));
        assert_eq!(burned.trajectories[0].state(3), plain.trajectories[0].state(5));
    }
}
