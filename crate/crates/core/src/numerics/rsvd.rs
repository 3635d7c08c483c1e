use crate::{Error, Result};

use super::{exact_svd, qr_orthonormalize, Matrix, SeededRng, SvdResult};

/// Default oversampling beyond the requested rank for the range finder.
pub const DEFAULT_OVERSAMPLE: usize = 10;

/// Default number of subspace (power) iterations.
pub const DEFAULT_POWER_ITERS: usize = 2;

/// Rank-`k` truncated SVD by Gaussian range finding.
///
/// The classic randomized scheme: sketch `y = a * omega` with a seeded
/// Gaussian test matrix of `k + oversample` columns, orthonormalize,
/// refine with `power_iters` subspace iterations (re-orthonormalizing
/// after every product to stop the sketch collapsing onto the dominant
/// direction), project to the small matrix `b = qᵀ * a`, and take the
/// exact SVD of `b`. The sample count is capped at `min(rows, cols)`, at
/// which point the projection is exact regardless of the draw.
///
/// For a fixed seed the result is bit-identical run to run.
pub fn randomized_svd(
    a: &Matrix,
    k: usize,
    oversample: usize,
    power_iters: usize,
    rng: &mut SeededRng,
) -> Result<SvdResult> {
    let (n, m) = (a.rows(), a.cols());
    if n == 0 || m == 0 {
        return Err(Error::InvalidInput(format!("randomized svd of a {n}x{m} matrix")));
    }
    let min_dim = n.min(m);
    if k > min_dim {
        return Err(Error::InvalidInput(format!(
            "rank {k} exceeds min dimension {min_dim}"
        )));
    }
    if k == 0 {
        return Ok(SvdResult {
            u: Matrix::zeros(n, 0),
            singular_values: Vec::new(),
            vt: Matrix::zeros(0, m),
        });
    }

    let samples = (k + oversample).min(min_dim);
    let omega_values: Vec<f64> = (0..m * samples).map(|_| rng.next_normal()).collect();
    let omega = Matrix::from_parts(m, samples, omega_values);

    let at = a.transpose();
    let mut q = qr_orthonormalize(&a.matmul(&omega)?)?;
    for _ in 0..power_iters {
        let z = qr_orthonormalize(&at.matmul(&q)?)?;
        q = qr_orthonormalize(&a.matmul(&z)?)?;
    }

    let b = q.transpose().matmul(a)?;
    let small = exact_svd(&b)?;
    let u_full = q.matmul(&small.u)?;

    // Truncate to the requested rank.
    let mut u_values = Vec::with_capacity(n * k);
    for i in 0..n {
        u_values.extend_from_slice(&u_full.row(i)[..k]);
    }
    let mut vt_values = Vec::with_capacity(k * m);
    for i in 0..k {
        vt_values.extend_from_slice(small.vt.row(i));
    }
    Ok(SvdResult {
        u: Matrix::from_parts(n, k, u_values),
        singular_values: small.singular_values[..k].to_vec(),
        vt: Matrix::from_parts(k, m, vt_values),
    })
}

// ───────────────────────────── Tests ─────────────────────────────
