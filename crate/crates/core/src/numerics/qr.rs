use crate::{Error, Result};

use super::Matrix;

/// Orthonormal basis for the column space of `a` (`rows >= cols` required).
///
/// Modified Gram-Schmidt with one re-orthogonalization pass ("twice is
/// enough"), which keeps `qᵀq = I` to near machine precision even for
/// ill-conditioned inputs. When a column is (numerically) dependent on its
/// predecessors, its slot is filled by the deterministic canonical-basis
/// completion: the basis vector with the largest residual against the
/// columns built so far, ties resolved toward the smaller index.
pub fn qr_orthonormalize(a: &Matrix) -> Result<Matrix> {
    let (n, m) = (a.rows(), a.cols());
    if n < m {
        return Err(Error::InvalidInput(format!(
            "qr_orthonormalize needs rows >= cols, got {n}x{m}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidInput("qr_orthonormalize of an empty matrix".into()));
    }

    // Work on rows of the transpose so each vector is contiguous.
    let at = a.transpose();
    let col_scale = (0..m)
        .map(|j| at.row(j).iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0_f64, f64::max);

    let mut q_rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    for j in 0..m {
        let mut v = at.row(j).to_vec();
        for _ in 0..2 {
            for q in &q_rows {
                let dot: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (x, qv) in v.iter_mut().zip(q) {
                    *x -= dot * qv;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // Deficiency threshold is relative to the largest input column.
        if norm > col_scale * 1e-10 && norm > 0.0 {
            for x in &mut v {
                *x /= norm;
            }
            q_rows.push(v);
        } else {
            q_rows.push(complete_direction(&q_rows, n));
        }
    }
    Ok(Matrix::from_parts(m, n, q_rows.concat()).transpose())
}

/// Canonical-basis completion shared with the SVD (kept local to avoid a
/// cross-module dependency on private helpers; the rule is identical).
fn complete_direction(existing: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut best_idx = 0;
    let mut best_residual = -1.0;
    for i in 0..n {
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
    for x in &mut v {
        *x /= norm;
    }
    v
}

// ───────────────────────────── Tests ─────────────────────────────
