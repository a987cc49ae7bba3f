//! Small dense linear algebra: Jacobian-sized square matrices and a
//! Householder least-squares solve.

use crate::error::{Error, Result};

/// Row-major square matrix of Jacobian size (d ≤ 3 in practice).
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            assert_eq!(r.len(), n, "matrix must be square");
            data.extend_from_slice(r);
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `self · rhs`
    pub fn matmul(&self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.n, rhs.n);
        let n = self.n;
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// Largest singular value.
    ///
    /// Closed form for 2×2; otherwise power iteration on `AᵀA` until the
    /// relative change drops below 1e-12.
    pub fn spectral_norm(&self) -> f64 {
        match self.n {
            0 => 0.0,
            1 => self.data[0].abs(),
            2 => {
                let [a, b, c, d] = [self.data[0], self.data[1], self.data[2], self.data[3]];
                // σ_max² = (s + √(s² − 4 det²)) / 2 with s = ‖A‖_F²
                let s = a * a + b * b + c * c + d * d;
                let det = a * d - b * c;
                let disc = ((s - 2.0 * det.abs()) * (s + 2.0 * det.abs())).max(0.0);
                ((s + disc.sqrt()) / 2.0).sqrt()
            }
            _ => self.power_iteration_norm(1e-12, 10_000),
        }
    }

    pub(crate) fn power_iteration_norm(&self, tol: f64, max_iter: usize) -> f64 {
        let n = self.n;
        // Gram matrix AᵀA
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                g[i * n + j] = (0..n).map(|k| self.get(k, i) * self.get(k, j)).sum();
            }
        }
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
        let mut lambda = 0.0;
        for _ in 0..max_iter {
            let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| g[i * n + j] * v[j]).sum()).collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            v = w.iter().map(|x| x / norm).collect();
            let converged = (norm - lambda).abs() <= tol * norm;
            lambda = norm;
            if converged {
                break;
            }
        }
        lambda.sqrt()
    }
}

/// Least-squares solution of `A x ≈ b` for a tall `rows × cols` matrix
/// (row-major) via Householder QR. Fails when `A` is numerically rank
/// deficient.
pub fn least_squares(a: &[f64], rows: usize, cols: usize, b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != rows * cols || b.len() != rows {
        return Err(Error::Shape(format!(
            "least squares: {}×{} design with {} values, rhs of {}",
            rows,
            cols,
            a.len(),
            b.len()
        )));
    }
    if rows < cols {
        return Err(Error::Domain(format!("least squares needs at least {cols} rows, got {rows}")));
    }
    let mut r = a.to_vec();
    let mut y = b.to_vec();
    let scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for k in 0..cols {
        let norm = (k..rows).map(|i| r[i * cols + k].powi(2)).sum::<f64>().sqrt();
        if norm <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Domain("rank-deficient least-squares design".into()));
        }
        let alpha = if r[k * cols + k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..rows).map(|i| r[i * cols + k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for j in k..cols {
                let dot: f64 = (k..rows).map(|i| v[i - k] * r[i * cols + j]).sum();
                let f = 2.0 * dot / vnorm2;
                for i in k..rows {
                    r[i * cols + j] -= f * v[i - k];
                }
            }
            let dot: f64 = (k..rows).map(|i| v[i - k] * y[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..rows {
                y[i] -= f * v[i - k];
            }
        }
        let diag = r[k * cols + k];
        if diag.abs() <= 1e-12 * scale {
            return Err(Error::Domain("rank-deficient least-squares design".into()));
        }
    }
    let mut x = vec![0.0; cols];
    for k in (0..cols).rev() {
        let s: f64 = ((k + 1)..cols).map(|j| r[k * cols + j] * x[j]).sum();
        x[k] = (y[k] - s) / r[k * cols + k];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_norm_closed_form_matches_power_iteration() {
        let cases = [
            [0.0, 1.0, 0.3, 0.0],
            [1.0, 2.0, 3.0, 4.0],
            [-2.8, 1.0, 0.3, 0.0],
            [5.0, 0.0, 0.0, 5.0],
            [0.0, 0.0, 0.0, 0.0],
        ];
        for c in cases {
            let m = SquareMatrix::from_rows(&[&c[..2], &c[2..]]);
            let closed = m.spectral_norm();
            let iter = m.power_iteration_norm(1e-15, 100_000);
            assert!((closed - iter).abs() < 1e-9, "{c:?}: {closed} vs {iter}");
        }
    }

    #[test]
    fn henon_jacobian_at_origin_has_unit_norm() {
        let m = SquareMatrix::from_rows(&[&[0.0, 1.0], &[0.3, 0.0]]);
        assert!((m.spectral_norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn three_by_three_diagonal_norm() {
        let m = SquareMatrix::from_rows(&[&[1.0, 0.0, 0.0], &[0.0, -7.0, 0.0], &[0.0, 0.0, 2.0]]);
        assert!((m.spectral_norm() - 7.0).abs() < 1e-9);
    }

    #[test]
    fn least_squares_exact_fit() {
        // y = 2 + 3/n - 1/n²
        let rows = 15;
        let mut a = Vec::new();
        let mut b = Vec::new();
        for n in 1..=rows {
            let inv = 1.0 / n as f64;
            a.extend_from_slice(&[1.0, inv, inv * inv]);
            b.push(2.0 + 3.0 * inv - inv * inv);
        }
        let x = least_squares(&a, rows, 3, &b).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-11);
        assert!((x[2] + 1.0).abs() < 1e-11);
    }

    #[test]
    fn least_squares_rejects_rank_deficiency() {
        let a = [1.0, 2.0, 2.0, 4.0, 3.0, 6.0];
        assert!(least_squares(&a, 3, 2, &[1.0, 2.0, 3.0]).is_err());
    }
}
