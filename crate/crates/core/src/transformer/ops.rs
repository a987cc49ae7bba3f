//! Dense kernels shared by the training and inference paths.

use crate::rng;

pub(crate) const LN_EPS: f64 = 1e-5;

/// `c (m×n) = beta·c + a (m×k) · b (k×n)`, all row-major.
pub(crate) fn matmul(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64], beta: f64) {
    debug_assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: slice lengths checked above, strides describe row-major
    // matrices inside those slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c (m×n) = beta·c + a (m×k) · bᵀ` where `b` is stored `n×k`.
pub(crate) fn matmul_nt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64], beta: f64) {
    debug_assert!(a.len() >= m * k && b.len() >= n * k && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: as in `matmul`; b is read through transposed strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c (m×n) = beta·c + aᵀ · b` where `a` is stored `k×m` and `b` is `k×n`.
pub(crate) fn matmul_tn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64], beta: f64) {
    debug_assert!(a.len() >= k * m && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: as in `matmul`; a is read through transposed strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `out (n) = x (k) · w (k×n) + bias`, for single-row decoding where
/// packing a full gemm is wasted work.
pub(crate) fn vecmat_bias(x: &[f64], w: &[f64], n: usize, bias: &[f64], out: &mut [f64]) {
    out[..n].copy_from_slice(&bias[..n]);
    for (i, &xi) in x.iter().enumerate() {
        let row = &w[i * n..(i + 1) * n];
        for (o, wv) in out[..n].iter_mut().zip(row) {
            *o += xi * wv;
        }
    }
}

pub(crate) fn add_bias(rows: usize, cols: usize, x: &mut [f64], bias: &[f64]) {
    for r in 0..rows {
        for (v, b) in x[r * cols..(r + 1) * cols].iter_mut().zip(bias) {
            *v += b;
        }
    }
}

pub(crate) fn accumulate_colsum(rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        for (o, v) in out.iter_mut().zip(&x[r * cols..(r + 1) * cols]) {
            *o += v;
        }
    }
}

/// Row-wise layer norm. Writes the normalized input to `xhat`, the scaled
/// output to `y` and the per-row reciprocal std to `rstd`.
pub(crate) fn layer_norm(
    rows: usize,
    d: usize,
    x: &[f64],
    gamma: &[f64],
    beta: &[f64],
    xhat: &mut [f64],
    y: &mut [f64],
    rstd: &mut [f64],
) {
    for r in 0..rows {
        let xr = &x[r * d..(r + 1) * d];
        let mean = xr.iter().sum::<f64>() / d as f64;
        let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let rs = 1.0 / (var + LN_EPS).sqrt();
        rstd[r] = rs;
        for j in 0..d {
            let h = (xr[j] - mean) * rs;
            xhat[r * d + j] = h;
            y[r * d + j] = h * gamma[j] + beta[j];
        }
    }
}

/// Backward of [`layer_norm`]; accumulates parameter gradients and adds the
/// input gradient into `dx`.
pub(crate) fn layer_norm_backward(
    rows: usize,
    d: usize,
    dy: &[f64],
    xhat: &[f64],
    rstd: &[f64],
    gamma: &[f64],
    dgamma: &mut [f64],
    dbeta: &mut [f64],
    dx: &mut [f64],
) {
    let inv_d = 1.0 / d as f64;
    for r in 0..rows {
        let dyr = &dy[r * d..(r + 1) * d];
        let xr = &xhat[r * d..(r + 1) * d];
        let mut sum_dxhat = 0.0;
        let mut sum_dxhat_x = 0.0;
        for j in 0..d {
            dgamma[j] += dyr[j] * xr[j];
            dbeta[j] += dyr[j];
            let g = dyr[j] * gamma[j];
            sum_dxhat += g;
            sum_dxhat_x += g * xr[j];
        }
        let mean_g = sum_dxhat * inv_d;
        let mean_gx = sum_dxhat_x * inv_d;
        for j in 0..d {
            let g = dyr[j] * gamma[j];
            dx[r * d + j] += rstd[r] * (g - mean_g - xr[j] * mean_gx);
        }
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // √(2/π)
const GELU_K: f64 = 0.044_715;

/// Tanh approximation of GELU as used by GPT-2.
pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_K * x * x * x)).tanh())
}

pub(crate) fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_K * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)
}

/// In-place numerically stable softmax.
pub(crate) fn softmax_in_place(x: &mut [f64]) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let inv = 1.0 / sum;
    x.iter_mut().for_each(|v| *v *= inv);
}

/// Dropout sites, used as part of the mask key.
#[derive(Clone, Copy)]
pub(crate) enum DropSite {
    Embedding = 0,
    Attention = 1,
    Mlp = 2,
}

/// Inverted-dropout multipliers (0 or 1/(1−p)) for a `rows × d` activation,
/// keyed by (seed, layer, site, position, element).
pub(crate) fn dropout_mask(seed: u64, layer: usize, site: DropSite, rows: usize, d: usize, p: f64) -> Vec<f64> {
    let keep = 1.0 / (1.0 - p);
    let mut mask = Vec::with_capacity(rows * d);
    for pos in 0..rows {
        for j in 0..d {
            let u = rng::keyed_uniform(&[seed, layer as u64, site as u64, pos as u64, j as u64]);
            mask.push(if u < p { 0.0 } else { keep });
        }
    }
    mask
}

/// Fixed sinusoidal position code for position `pos` into `out` (length d).
pub(crate) fn sinusoid(pos: usize, out: &mut [f64]) {
    let d = out.len();
    for i in 0..d {
        let pair = (i / 2) as f64;
        let freq = 1.0 / 10_000f64.powf(2.0 * pair / d as f64);
        let angle = pos as f64 * freq;
        out[i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_variants_agree_with_naive() {
        let (m, k, n) = (3, 4, 5);
        let a: Vec<f64> = (0..m * k).map(|i| i as f64 * 0.5 - 2.0).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64).sin()).collect();
        let mut naive = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                naive[i * n + j] = (0..k).map(|p| a[i * k + p] * b[p * n + j]).sum();
            }
        }
        let mut c = vec![0.0; m * n];
        matmul(m, k, n, &a, &b, &mut c, 0.0);
        assert!(c.iter().zip(&naive).all(|(x, y)| (x - y).abs() < 1e-12));

        let mut bt = vec![0.0; n * k];
        for p in 0..k {
            for j in 0..n {
                bt[j * k + p] = b[p * n + j];
            }
        }
        let mut c2 = vec![0.0; m * n];
        matmul_nt(m, k, n, &a, &bt, &mut c2, 0.0);
        assert!(c2.iter().zip(&naive).all(|(x, y)| (x - y).abs() < 1e-12));

        let mut at = vec![0.0; k * m];
        for i in 0..m {
            for p in 0..k {
                at[p * m + i] = a[i * k + p];
            }
        }
        let mut c3 = vec![1.0; m * n];
        matmul_tn(m, k, n, &at, &b, &mut c3, 1.0);
        assert!(c3.iter().zip(&naive).all(|(x, y)| (x - 1.0 - y).abs() < 1e-12));
    }

    #[test]
    fn gelu_derivative_matches_finite_difference() {
        for &x in &[-3.0, -0.7, 0.0, 0.4, 2.5] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn dropout_mask_rate_and_determinism() {
        let m = dropout_mask(5, 1, DropSite::Mlp, 100, 100, 0.1);
        let dropped = m.iter().filter(|&&v| v == 0.0).count();
        assert!((800..1200).contains(&dropped));
        assert_eq!(m, dropout_mask(5, 1, DropSite::Mlp, 100, 100, 0.1));
        assert_ne!(m, dropout_mask(5, 2, DropSite::Mlp, 100, 100, 0.1));
    }
}
