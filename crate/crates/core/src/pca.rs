//! Incremental principal component analysis.
//!
//! A model holds the running mean, the top-`k` right singular vectors of
//! the centered data seen so far, and the matching singular values. Batch
//! fitting takes the exact SVD of the centered data; incremental updates
//! re-factorize a small augmented matrix (scaled old components, the
//! centered new batch, and a mean-correction row), so frames can stream
//! through without ever materializing the full data matrix.

use std::fs;
use std::path::Path;

use crate::numerics::{
    exact_svd, randomized_svd, Matrix, SeededRng, DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS,
};
use crate::{Error, Result};

/// Magic prefix of the binary model format; the trailing digit is the
/// format version.
const MAGIC: &[u8; 6] = b"GRPCA1";

/// Seed salt for the deterministic generator used inside `partial_fit`.
const PARTIAL_FIT_STREAM: u64 = 0x5043_4131;

/// Principal component model.
///
/// `components` is `k x d` with orthonormal rows, ordered by decreasing
/// singular value. Each component's largest-magnitude entry is kept
/// non-negative so repeated fits produce identical signs.
#[derive(Debug, Clone)]
pub struct PcaModel {
    mean: Vec<f64>,
    components: Matrix,
    singular_values: Vec<f64>,
    n_seen: usize,
    /// Number of components to retain once enough data has been seen.
    /// Early small batches may support fewer; the model grows back toward
    /// this target as further batches arrive.
    k_target: usize,
}

impl PcaModel {
    /// A model with no data yet, targeting `k` components over `d`-wide rows.
    pub fn empty(k: usize, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("zero-width feature space".into()));
        }
        if k > d {
            return Err(Error::InvalidInput(format!(
                "cannot retain {k} components in a {d}-dimensional space"
            )));
        }
        Ok(Self {
            mean: vec![0.0; d],
            components: Matrix::zeros(0, d),
            singular_values: Vec::new(),
            n_seen: 0,
            k_target: k,
        })
    }

    /// Assembles a model from its parts, validating shape, spectrum order,
    /// and row orthonormality.
    pub fn from_parts(
        mean: Vec<f64>,
        components: Matrix,
        singular_values: Vec<f64>,
        n_seen: usize,
    ) -> Result<Self> {
        let d = mean.len();
        let k = components.rows();
        if d == 0 {
            return Err(Error::InvalidInput("zero-width feature space".into()));
        }
        if components.cols() != d {
            return Err(Error::InvalidInput(format!(
                "components are {}-wide but the mean is {d}-wide",
                components.cols()
            )));
        }
        if singular_values.len() != k {
            return Err(Error::InvalidInput(format!(
                "{k} components but {} singular values",
                singular_values.len()
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite mean entry".into()));
        }
        for w in singular_values.windows(2) {
            if w[0] < w[1] {
                return Err(Error::InvalidInput("singular values not sorted".into()));
            }
        }
        if singular_values.iter().any(|&s| !s.is_finite() || s < 0.0) {
            return Err(Error::InvalidInput("invalid singular value".into()));
        }
        let gram = components.matmul(&components.transpose())?;
        for i in 0..k {
            for j in 0..k {
                let expect = if i == j { 1.0 } else { 0.0 };
                if (gram.get(i, j) - expect).abs() > 1e-6 {
                    return Err(Error::InvalidInput(
                        "component rows are not orthonormal".into(),
                    ));
                }
            }
        }
        Ok(Self { mean, components, singular_values, n_seen, k_target: k })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &Matrix {
        &self.components
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn n_seen(&self) -> usize {
        self.n_seen
    }

    /// Width of the feature space the model was built over.
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Number of components currently retained.
    pub fn rank(&self) -> usize {
        self.components.rows()
    }

    /// A copy keeping only the leading `k` components.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k > self.rank() {
            return Err(Error::InvalidInput(format!(
                "cannot truncate a rank-{} model to {k}",
                self.rank()
            )));
        }
        let mut values = Vec::with_capacity(k * self.dim());
        for i in 0..k {
            values.extend_from_slice(self.components.row(i));
        }
        Ok(Self {
            mean: self.mean.clone(),
            components: Matrix::from_vec(k, self.dim(), values)?,
            singular_values: self.singular_values[..k].to_vec(),
            n_seen: self.n_seen,
            k_target: k,
        })
    }
}

/// Fits a model to a full batch: exact SVD of the centered data.
///
/// Requires at least two rows and `k <= min(n, d)`. For constant data all
/// singular values are zero and the components fall back to the SVD's
/// deterministic rank-deficiency completion.
pub fn fit_batch(x: &Matrix, k: usize) -> Result<PcaModel> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 rows, got {n}")));
    }
    if d == 0 {
        return Err(Error::InvalidInput("zero-width feature space".into()));
    }
    if k > n.min(d) {
        return Err(Error::InvalidInput(format!(
            "k = {k} exceeds min(n, d) = {}",
            n.min(d)
        )));
    }
    let mean = x.column_means()?;
    let centered = center(x, &mean);
    let (components, singular_values) = if k == 0 {
        (Matrix::zeros(0, d), Vec::new())
    } else {
        let svd = exact_svd(&centered)?;
        take_top(&svd.vt, &svd.singular_values, k)
    };
    let mut model =
        PcaModel { mean, components, singular_values, n_seen: n, k_target: k };
    apply_sign_convention(&mut model.components);
    Ok(model)
}

/// Folds one batch into the model and returns the updated model.
///
/// The update follows the augmented-matrix scheme for incremental PCA:
/// stack the singular-value-scaled old components, the batch centered on
/// its own mean, and the mean-correction row
/// `sqrt(n_old * n_batch / n_total) * (mean_old - mean_batch)`, then
/// re-factorize and keep the leading components. The factorization uses
/// the randomized SVD with an internally derived fixed seed, so the
/// result depends only on the model, the batch, and this library version.
///
/// The running mean is updated exactly (weighted average of means).
pub fn partial_fit(model: &PcaModel, batch: &Matrix) -> Result<PcaModel> {
    let d = model.dim();
    if batch.cols() != d {
        return Err(Error::InvalidInput(format!(
            "batch is {}-wide but the model expects {d}",
            batch.cols()
        )));
    }
    if batch.rows() == 0 {
        return Err(Error::InvalidInput("empty batch".into()));
    }

    let b = batch.rows();
    let batch_mean = batch.column_means()?;

    if model.n_seen == 0 {
        let k_eff = model.k_target.min(b.min(d));
        let centered = center(batch, &batch_mean);
        let (components, singular_values) =
            factorize_augmented(&centered, k_eff, b as u64)?;
        let mut next = PcaModel {
            mean: batch_mean,
            components,
            singular_values,
            n_seen: b,
            k_target: model.k_target,
        };
        apply_sign_convention(&mut next.components);
        return Ok(next);
    }

    let n_old = model.n_seen;
    let n_total = n_old + b;
    let mut mean = vec![0.0; d];
    for (m, (&old, &new)) in mean
        .iter_mut()
        .zip(model.mean.iter().zip(&batch_mean))
    {
        *m = (n_old as f64 * old + b as f64 * new) / n_total as f64;
    }

    // Augmented matrix: k_old + b + 1 rows over d columns.
    let k_old = model.rank();
    let mut values = Vec::with_capacity((k_old + b + 1) * d);
    for i in 0..k_old {
        let s = model.singular_values[i];
        values.extend(model.components.row(i).iter().map(|&v| v * s));
    }
    for i in 0..b {
        values.extend(
            batch
                .row(i)
                .iter()
                .zip(&batch_mean)
                .map(|(&v, &m)| v - m),
        );
    }
    let correction = ((n_old as f64 * b as f64) / n_total as f64).sqrt();
    values.extend(
        model
            .mean
            .iter()
            .zip(&batch_mean)
            .map(|(&old, &new)| correction * (old - new)),
    );
    let augmented = Matrix::from_parts(k_old + b + 1, d, values);

    let k_new = model.k_target.min(augmented.rows().min(d));
    let (components, singular_values) =
        factorize_augmented(&augmented, k_new, n_total as u64)?;
    let mut next = PcaModel {
        mean,
        components,
        singular_values,
        n_seen: n_total,
        k_target: model.k_target,
    };
    apply_sign_convention(&mut next.components);
    Ok(next)
}

/// Projects rows of `x` onto the components: `(x - mean) * componentsᵀ`.
pub fn transform(model: &PcaModel, x: &Matrix) -> Result<Matrix> {
    if x.cols() != model.dim() {
        return Err(Error::InvalidInput(format!(
            "input is {}-wide but the model expects {}",
            x.cols(),
            model.dim()
        )));
    }
    center(x, &model.mean).matmul(&model.components.transpose())
}

/// Maps scores back to data space: `z * components + mean`.
pub fn inverse_transform(model: &PcaModel, z: &Matrix) -> Result<Matrix> {
    if z.cols() != model.rank() {
        return Err(Error::InvalidInput(format!(
            "scores are {}-wide but the model retains {} components",
            z.cols(),
            model.rank()
        )));
    }
    let mut recon = z.matmul(&model.components)?;
    for i in 0..recon.rows() {
        for (v, &m) in recon.row_mut(i).iter_mut().zip(&model.mean) {
            *v += m;
        }
    }
    Ok(recon)
}

/// Root-mean-square reconstruction error of `x` through the model,
/// averaged over all `n * d` entries.
///
/// A rank-0 model is allowed and yields the RMSE of `x` about the mean.
pub fn reconstruction_rmse(model: &PcaModel, x: &Matrix) -> Result<f64> {
    let recon = inverse_transform(model, &transform(model, x)?)?;
    let n_entries = (x.rows() * x.cols()) as f64;
    if n_entries == 0.0 {
        return Err(Error::InvalidInput("empty input".into()));
    }
    let sum_sq: f64 = x
        .values()
        .iter()
        .zip(recon.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sum_sq / n_entries).sqrt())
}

impl PcaModel {
    /// Serializes the model: magic, `u64` counts `(k, d, n_seen)`, then
    /// mean, singular values, and row-major components as little-endian
    /// `f64`. Writing is byte-deterministic.
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let k = self.rank();
        let d = self.dim();
        let mut bytes = Vec::with_capacity(6 + 24 + 8 * (d + k + k * d));
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&(k as u64).to_le_bytes());
        bytes.extend_from_slice(&(d as u64).to_le_bytes());
        bytes.extend_from_slice(&(self.n_seen as u64).to_le_bytes());
        for &v in &self.mean {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        for &v in &self.singular_values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        for &v in self.components.values() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes
    }

    /// Loads a model written by [`PcaModel::save`], validating the magic,
    /// the declared shapes, and the model invariants.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 30 || &bytes[..6] != MAGIC {
            return Err(Error::Format("not a PCA model (bad magic)".into()));
        }
        let k = read_u64(&bytes[6..14]) as usize;
        let d = read_u64(&bytes[14..22]) as usize;
        let n_seen = read_u64(&bytes[22..30]) as usize;
        let expected = 30 + 8 * (d + k + k * d);
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "expected {expected} bytes for a {k}x{d} model, got {}",
                bytes.len()
            )));
        }
        let mut cursor = 30;
        let mut read_f64s = |count: usize| -> Vec<f64> {
            let out = bytes[cursor..cursor + 8 * count]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            cursor += 8 * count;
            out
        };
        let mean = read_f64s(d);
        let singular_values = read_f64s(k);
        let comp_values = read_f64s(k * d);
        let components = Matrix::from_vec(k, d, comp_values)
            .map_err(|e| Error::Format(e.to_string()))?;
        Self::from_parts(mean, components, singular_values, n_seen)
            .map_err(|e| Error::Format(e.to_string()))
    }
}

fn read_u64(bytes: &[u8]) -> u64 {
    u64::from_le_bytes(bytes.try_into().unwrap())
}

fn center(x: &Matrix, mean: &[f64]) -> Matrix {
    let mut values = Vec::with_capacity(x.rows() * x.cols());
    for i in 0..x.rows() {
        values.extend(x.row(i).iter().zip(mean).map(|(&v, &m)| v - m));
    }
    Matrix::from_parts(x.rows(), x.cols(), values)
}

fn take_top(vt: &Matrix, sigma: &[f64], k: usize) -> (Matrix, Vec<f64>) {
    let d = vt.cols();
    let mut values = Vec::with_capacity(k * d);
    for i in 0..k {
        values.extend_from_slice(vt.row(i));
    }
    (Matrix::from_parts(k, d, values), sigma[..k].to_vec())
}

/// Factorization used by the incremental path. The randomized SVD's
/// sample count is capped at the matrix dimensions, so whenever the
/// requested rank covers the full space the result is exact.
fn factorize_augmented(m: &Matrix, k: usize, stream: u64) -> Result<(Matrix, Vec<f64>)> {
    if k == 0 {
        return Ok((Matrix::zeros(0, m.cols()), Vec::new()));
    }
    let mut rng = SeededRng::derived(PARTIAL_FIT_STREAM, stream);
    let svd = randomized_svd(m, k, DEFAULT_OVERSAMPLE, DEFAULT_POWER_ITERS, &mut rng)?;
    Ok((svd.vt, svd.singular_values))
}

/// Flips component rows so the largest-magnitude entry is non-negative
/// (first such entry wins on ties), making signs reproducible.
fn apply_sign_convention(components: &mut Matrix) {
    for i in 0..components.rows() {
        let row = components.row(i);
        let mut lead = 0;
        for (j, v) in row.iter().enumerate() {
            if v.abs() > row[lead].abs() {
                lead = j;
            }
        }
        if row[lead] < 0.0 {
            for v in components.row_mut(i) {
                *v = -*v;
            }
        }
    }
}

// ───────────────────────────── Tests ─────────────────────────────
