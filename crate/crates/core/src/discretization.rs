//! Uniform-grid tokenizer: continuous states ↔ cell ids.
//!
//! A grid covers a box `[lo, hi]` with `n` equal segments per dimension.
//! Cell `(i_0, …, i_{d-1})` has id `Σ i_j · n^(d-1-j)`, so dimension 0 is
//! the most significant digit. Ids are 0-based.

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};

/// Default relative margin added on each side of the fitted box.
pub const DEFAULT_MARGIN: f64 = 1e-3;

/// Half-width used for a dimension whose training values are all equal.
const DEGENERATE_HALF_WIDTH: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(pub u32);

impl Token {
    pub fn id(self) -> u32 {
        self.0
    }
}

pub type TokenSequence = Vec<u32>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Grid {
    pub fn new(n: usize, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("grid needs at least one segment".into()));
        }
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::Shape(format!("grid bounds of lengths {} and {}", lo.len(), hi.len())));
        }
        for (j, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::Domain(format!("dimension {j}: need finite lo < hi, got [{l}, {h}]")));
            }
        }
        let vocab = (n as u128).checked_pow(lo.len() as u32);
        if vocab.is_none_or(|v| v > u32::MAX as u128) {
            return Err(Error::Domain(format!(
                "vocabulary {n}^{} does not fit 32-bit token ids",
                lo.len()
            )));
        }
        Ok(Self {
            dim: lo.len(),
            n,
            lo,
            hi,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn segments(&self) -> usize {
        self.n
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn vocab_size(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn cell_width(&self, j: usize) -> f64 {
        (self.hi[j] - self.lo[j]) / self.n as f64
    }

    /// Radius of the sphere circumscribing one cell (half its diagonal).
    pub fn cell_radius(&self) -> f64 {
        0.5 * (0..self.dim).map(|j| self.cell_width(j).powi(2)).sum::<f64>().sqrt()
    }

    fn axis_index(&self, j: usize, v: f64) -> usize {
        let w = self.cell_width(j);
        let i = ((v - self.lo[j]) / w).floor();
        if i <= 0.0 {
            0
        } else if i >= (self.n - 1) as f64 {
            self.n - 1
        } else {
            i as usize
        }
    }

    /// Map a state to its cell; out-of-box states clamp to the nearest cell.
    pub fn encode_state(&self, x: &[f64]) -> Result<Token> {
        if x.len() != self.dim {
            return Err(Error::Shape(format!(
                "state of dimension {} on a {}-dimensional grid",
                x.len(),
                self.dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("cannot encode non-finite state {x:?}")));
        }
        Ok(Token(self.encode_unchecked(x)))
    }

    pub(crate) fn encode_unchecked(&self, x: &[f64]) -> u32 {
        let mut id = 0usize;
        for (j, &v) in x.iter().enumerate() {
            id = id * self.n + self.axis_index(j, v);
        }
        id as u32
    }

    /// Per-dimension cell indices of a token.
    pub fn cell_indices(&self, t: Token) -> Result<Vec<usize>> {
        self.check_token(t.0)?;
        let mut rem = t.0 as usize;
        let mut idx = vec![0; self.dim];
        for j in (0..self.dim).rev() {
            idx[j] = rem % self.n;
            rem /= self.n;
        }
        Ok(idx)
    }

    /// Center of the token's cell.
    pub fn decode_token(&self, t: Token) -> Result<Vec<f64>> {
        let idx = self.cell_indices(t)?;
        Ok(idx
            .iter()
            .enumerate()
            .map(|(j, &i)| self.lo[j] + (i as f64 + 0.5) * self.cell_width(j))
            .collect())
    }

    fn check_token(&self, id: u32) -> Result<()> {
        if id as usize >= self.vocab_size() {
            return Err(Error::Domain(format!(
                "token {id} outside vocabulary of size {}",
                self.vocab_size()
            )));
        }
        Ok(())
    }

    pub fn encode_trajectory(&self, traj: &Trajectory) -> Result<TokenSequence> {
        traj.states().map(|s| self.encode_state(s).map(Token::id)).collect()
    }

    /// Cell centers of `tokens` as a trajectory with step `tau`.
    pub fn decode_sequence(&self, tokens: &[u32], tau: f64) -> Result<Trajectory> {
        let mut flat = Vec::with_capacity(tokens.len() * self.dim);
        for &t in tokens {
            flat.extend(self.decode_token(Token(t))?);
        }
        Trajectory::from_flat(self.dim, tau, flat)
    }

    /// Euclidean distance between the centers of two cells.
    pub fn center_distance(&self, a: u32, b: u32) -> Result<f64> {
        let ca = self.decode_token(Token(a))?;
        let cb = self.decode_token(Token(b))?;
        Ok(ca.iter().zip(&cb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
    }
}

/// Fit a grid to the bounding box of all training states, expanded by
/// `margin × (max − min)` on each side.
pub fn fit_grid(trajectories: &[Trajectory], n: usize, margin: f64) -> Result<Grid> {
    if !(margin.is_finite() && margin >= 0.0) {
        return Err(Error::Domain(format!("margin must be ≥ 0, got {margin}")));
    }
    let first = trajectories
        .iter()
        .find(|t| !t.is_empty())
        .ok_or_else(|| Error::Domain("cannot fit a grid to an empty dataset".into()))?;
    let dim = first.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for t in trajectories {
        if t.dim() != dim {
            return Err(Error::Shape(format!("mixed trajectory dimensions {dim} and {}", t.dim())));
        }
        for s in t.states() {
            for j in 0..dim {
                if !s[j].is_finite() {
                    return Err(Error::Domain("non-finite state in dataset".into()));
                }
                lo[j] = lo[j].min(s[j]);
                hi[j] = hi[j].max(s[j]);
            }
        }
    }
    for j in 0..dim {
        let span = hi[j] - lo[j];
        if span > 0.0 {
            lo[j] -= margin * span;
            hi[j] += margin * span;
        } else {
            log::warn!(
                "dimension {j} is degenerate (all values {}); widening by ±{DEGENERATE_HALF_WIDTH}",
                lo[j]
            );
            lo[j] -= DEGENERATE_HALF_WIDTH;
            hi[j] += DEGENERATE_HALF_WIDTH;
        }
    }
    Grid::new(n, lo, hi)
}
