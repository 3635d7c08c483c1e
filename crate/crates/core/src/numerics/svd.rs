use crate::{Error, Result};

use super::Matrix;

/// Thin singular value decomposition `a = u * diag(singular_values) * vt`.
///
/// `u` is `rows x k` with orthonormal columns, `vt` is `k x cols` with
/// orthonormal rows, and `singular_values` holds `k = min(rows, cols)`
/// non-negative values in non-increasing order.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub vt: Matrix,
}

impl SvdResult {
    /// Reconstructs `u * diag(s) * vt`.
    pub fn reconstruct(&self) -> Result<Matrix> {
        let k = self.singular_values.len();
        let mut scaled = self.vt.clone();
        for (i, &s) in self.singular_values.iter().enumerate().take(k) {
            for v in scaled.row_mut(i) {
                *v *= s;
            }
        }
        self.u.matmul(&scaled)
    }
}

/// Exact thin SVD by one-sided Jacobi.
///
/// The decomposition runs Hestenes rotations on the rows of the wide
/// orientation of the input (rows are contiguous in memory, so each
/// rotation is a pair of streaming slice updates). Rotations repeat in
/// sweeps until every row pair is orthogonal to nearly machine precision.
/// Rank-deficient inputs get their null directions from a deterministic
/// canonical-basis completion, so `u` and `vt` are always orthonormal.
pub fn exact_svd(a: &Matrix) -> Result<SvdResult> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(Error::InvalidInput(format!(
            "svd of a {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    if a.rows() >= a.cols() {
        // Tall input: factor the wide transpose, rows of w are aᵀ's rows.
        let (row_basis, sigma, col_basis) = jacobi_wide(a.transpose());
        Ok(SvdResult { u: col_basis, singular_values: sigma, vt: row_basis })
    } else {
        let (row_basis, sigma, col_basis) = jacobi_wide(a.clone());
        Ok(SvdResult { u: row_basis.transpose(), singular_values: sigma, vt: col_basis.transpose() })
    }
}

/// Core factorization of a wide matrix `w` (`m x n`, `m <= n`).
///
/// Returns `(g, sigma, q)` where `g` is `m x m` orthonormal, `sigma` has
/// length `m`, and `q` is `n x m` with orthonormal columns, such that
/// `w = gᵀ * diag(sigma) * qᵀ`. Equivalently, for `w = aᵀ` with tall `a`:
/// `a = q * diag(sigma) * g`, i.e. `g` is `vt` and `q` is `u`.
fn jacobi_wide(mut w: Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let m = w.rows();
    let mut g = Matrix::identity(m);

    // Rotation threshold: a pair is considered orthogonal when
    // |<p,q>| <= eps * ||p|| * ||q||. Convergence is quadratic; the sweep
    // cap is a safety net, not an expected exit.
    const EPS: f64 = 1e-15;
    const MAX_SWEEPS: usize = 64;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..m {
            for q in (p + 1)..m {
                let (alpha, beta, gamma) = row_moments(&w, p, q);
                if gamma * gamma <= EPS * EPS * alpha * beta || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut w, p, q, c, s);
                rotate_rows(&mut g, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    // Row norms are the singular values; order them descending.
    let norms: Vec<f64> = (0..m)
        .map(|i| w.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());

    let n = w.cols();
    let sigma: Vec<f64> = order.iter().map(|&i| norms[i]).collect();
    let mut g_sorted = Matrix::zeros(m, m);
    for (dst, &src) in order.iter().enumerate() {
        g_sorted.row_mut(dst).copy_from_slice(g.row(src));
    }

    // Columns of q: normalized rows of w, with deterministic completion
    // where the singular value has collapsed to (numerical) zero.
    let tiny = sigma.first().copied().unwrap_or(0.0) * 1e-13;
    let mut q_rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    for (dst, &src) in order.iter().enumerate() {
        if sigma[dst] > tiny && sigma[dst] > 0.0 {
            let inv = 1.0 / sigma[dst];
            q_rows.push(w.row(src).iter().map(|v| v * inv).collect());
        } else {
            q_rows.push(complete_direction(&q_rows, n));
        }
    }
    let q = Matrix::from_parts(m, n, q_rows.concat()).transpose();
    (g_sorted, sigma, q)
}

/// One fused pass computing `(<p,p>, <q,q>, <p,q>)` for two rows.
fn row_moments(w: &Matrix, p: usize, q: usize) -> (f64, f64, f64) {
    let rp = w.row(p);
    let rq = w.row(q);
    let mut alpha = 0.0;
    let mut beta = 0.0;
    let mut gamma = 0.0;
    for (&a, &b) in rp.iter().zip(rq) {
        alpha += a * a;
        beta += b * b;
        gamma += a * b;
    }
    (alpha, beta, gamma)
}

/// Applies the plane rotation `[c -s; s c]` to rows `p` and `q`.
fn rotate_rows(w: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let (rp, rq) = w.rows_pair_mut(p, q);
    for (a, b) in rp.iter_mut().zip(rq) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Picks the canonical basis vector with the largest residual against the
/// accumulated orthonormal rows, orthogonalizes it twice, and normalizes.
/// Scanning ascending and requiring strict improvement makes the choice
/// deterministic.
fn complete_direction(existing: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut best_idx = 0;
    let mut best_residual = -1.0;
    for i in 0..n {
        // Residual norm² of e_i after projecting out existing rows.
        let projected: f64 = existing.iter().map(|row| row[i] * row[i]).sum();
        let residual = 1.0 - projected;
        if residual > best_residual + 1e-12 {
            best_residual = residual;
            best_idx = i;
        }
    }
    let mut v = vec![0.0; n];
    v[best_idx] = 1.0;
    for _ in 0..2 {
        for row in existing {
            let dot: f64 = row.iter().zip(&v).map(|(r, x)| r * x).sum();
            for (x, r) in v.iter_mut().zip(row) {
                *x -= dot * r;
            }
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    debug_assert!(norm > 0.0, "completion produced a zero vector");
    for x in &mut v {
        *x /= norm;
    }
    v
}

// ───────────────────────────── Tests ─────────────────────────────
