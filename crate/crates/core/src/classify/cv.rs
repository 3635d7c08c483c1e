use crate::numerics::{Matrix, SeededRng};
use crate::verify::{tabulate, ContingencyTable};
use crate::{Error, Result};

use super::glm::{apply_threshold, fit_logistic};

/// GLM settings used inside cross-validation folds.
const FOLD_MAX_ITER: usize = 100;
const FOLD_TOL: f64 = 1e-8;
const THRESHOLD: f64 = 0.5;

/// A partition of sample indices into folds. Fold sizes differ by at
/// most one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    /// Fold index in `[0, k)` per sample.
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn len(&self) -> usize {
        self.fold_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fold_of.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        sizes
    }

    pub fn indices_in(&self, fold: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }
}

/// Shuffles `0..n` and deals samples round-robin into `k` folds.
/// Deterministic for a given generator state.
pub fn kfold_split(n: usize, k: usize, rng: &mut SeededRng) -> Result<FoldAssignment> {
    if k < 2 || n < k {
        return Err(Error::InvalidInput(format!(
            "cannot split {n} samples into {k} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let mut fold_of = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % k;
    }
    Ok(FoldAssignment { k, fold_of })
}

/// Like [`kfold_split`] but deals each class separately so per-fold
/// class counts differ by at most one. The second class continues the
/// round-robin where the first left off, keeping total fold sizes
/// within one of each other as well.
pub fn stratified_kfold_split(
    labels: &[bool],
    k: usize,
    rng: &mut SeededRng,
) -> Result<FoldAssignment> {
    let n = labels.len();
    if k < 2 || n < k {
        return Err(Error::InvalidInput(format!(
            "cannot split {n} samples into {k} folds"
        )));
    }
    let mut fold_of = vec![0; n];
    let mut pos = 0usize;
    for class in [true, false] {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        rng.shuffle(&mut members);
        for i in members {
            fold_of[i] = pos % k;
            pos += 1;
        }
    }
    Ok(FoldAssignment { k, fold_of })
}

/// Out-of-fold predictions pooled over a cross-validation run.
/// Samples whose fold was degenerate carry `None` and are excluded
/// from the pooled counts.
#[derive(Debug, Clone)]
pub struct CvResult {
    pub probabilities: Vec<Option<f64>>,
    pub predictions: Vec<Option<bool>>,
    pub fold_tables: Vec<Option<ContingencyTable>>,
    pub pooled: ContingencyTable,
    /// Folds whose training split contained a single class.
    pub degenerate_folds: Vec<usize>,
    pub assignment: FoldAssignment,
}

/// Splits with a fresh shuffled assignment, then runs
/// [`cross_validate_with`].
pub fn cross_validate(
    x: &Matrix,
    y: &[bool],
    k: usize,
    ridge: f64,
    rng: &mut SeededRng,
) -> Result<CvResult> {
    let assignment = kfold_split(x.rows(), k, rng)?;
    cross_validate_with(x, y, &assignment, ridge)
}

/// Fits on each training split and predicts its held-out fold, so every
/// sample is predicted exactly once. A training split with one class
/// flags the fold degenerate instead of failing the run.
pub fn cross_validate_with(
    x: &Matrix,
    y: &[bool],
    assignment: &FoldAssignment,
    ridge: f64,
) -> Result<CvResult> {
    let n = x.rows();
    if y.len() != n || assignment.len() != n {
        return Err(Error::InvalidInput(format!(
            "{n} rows, {} labels, {} fold entries",
            y.len(),
            assignment.len()
        )));
    }
    let k = assignment.k;
    if k < 2 || assignment.fold_of.iter().any(|&f| f >= k) {
        return Err(Error::InvalidInput("fold assignment out of range".into()));
    }
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == n {
        return Err(Error::DegenerateLabels(format!(
            "labels are single-class ({positives} of {n} positive)"
        )));
    }

    let mut probabilities: Vec<Option<f64>> = vec![None; n];
    let mut predictions: Vec<Option<bool>> = vec![None; n];
    let mut fold_tables: Vec<Option<ContingencyTable>> = vec![None; n.min(k)];
    fold_tables.resize(k, None);
    let mut pooled = ContingencyTable::default();
    let mut degenerate_folds = Vec::new();

    for fold in 0..k {
        let train: Vec<usize> = (0..n).filter(|&i| assignment.fold_of[i] != fold).collect();
        let test = assignment.indices_in(fold);
        let train_pos = train.iter().filter(|&&i| y[i]).count();
        if train_pos == 0 || train_pos == train.len() {
            degenerate_folds.push(fold);
            continue;
        }

        let train_x = Matrix::from_rows(&train.iter().map(|&i| x.row(i).to_vec()).collect::<Vec<_>>())?;
        let train_y: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        let fit = fit_logistic(&train_x, &train_y, ridge, FOLD_MAX_ITER, FOLD_TOL)?;

        let test_x = Matrix::from_rows(&test.iter().map(|&i| x.row(i).to_vec()).collect::<Vec<_>>())?;
        let probs = fit.predict_proba(&test_x)?;
        let preds = apply_threshold(&probs, THRESHOLD);
        let truth: Vec<bool> = test.iter().map(|&i| y[i]).collect();
        let table = tabulate(&preds, &truth)?;
        pooled = pooled.add(&table);
        fold_tables[fold] = Some(table);
        for ((&i, p), pred) in test.iter().zip(probs).zip(preds) {
            probabilities[i] = Some(p);
            predictions[i] = Some(pred);
        }
    }

    Ok(CvResult {
        probabilities,
        predictions,
        fold_tables,
        pooled,
        degenerate_folds,
        assignment: assignment.clone(),
    })
}
