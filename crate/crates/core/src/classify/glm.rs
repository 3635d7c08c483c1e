use std::fmt::Write as _;

use crate::numerics::Matrix;
use crate::verify::fmt_metric;
use crate::{Error, Result};

use super::normal::standard_normal_cdf;

/// Features with sample variance below this are dropped from the solve
/// and reported as zero-coefficient rows with undefined statistics.
const VARIANCE_FLOOR: f64 = 1e-12;

/// Coefficient magnitude (log-odds scale) treated as evidence of perfect
/// separation. Fitting stops and the fit is flagged, not failed. Must sit
/// below the point where saturated probabilities stall the iteration
/// (around 18 for unit-scale features), else the stall masks the flag.
const SEPARATION_CAP: f64 = 15.0;

/// Two-sided 95% normal quantile used for confidence intervals.
const Z_95: f64 = 1.959964;

/// A fitted logistic regression. `coefficients[0]` is the intercept;
/// entry `j + 1` belongs to feature `j`. Statistics are `None` for
/// dropped features.
#[derive(Debug, Clone)]
pub struct GlmFit {
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<Option<f64>>,
    pub z_scores: Vec<Option<f64>>,
    pub p_values: Vec<Option<f64>>,
    pub ci_low: Vec<Option<f64>>,
    pub ci_high: Vec<Option<f64>>,
    /// Indices of features excluded for having (numerically) no variance.
    pub dropped: Vec<usize>,
    pub converged: bool,
    pub separation_suspected: bool,
    pub iterations: usize,
    /// Ridge-penalized Bernoulli log-likelihood at the returned
    /// coefficients. Non-decreasing in the iteration count.
    pub log_likelihood: f64,
}

impl GlmFit {
    /// Predicted event probabilities for `x` (one row per sample).
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        let d = self.coefficients.len() - 1;
        if x.cols() != d {
            return Err(Error::InvalidInput(format!(
                "model has {d} features, input has {} columns",
                x.cols()
            )));
        }
        Ok((0..x.rows())
            .map(|i| {
                let eta = self.coefficients[0]
                    + x.row(i)
                        .iter()
                        .zip(&self.coefficients[1..])
                        .map(|(v, b)| v * b)
                        .sum::<f64>();
                sigmoid(eta)
            })
            .collect())
    }
}

/// Fits a ridge-penalized logistic regression by iteratively reweighted
/// least squares with step halving; the intercept is never penalized.
/// Standard errors come from the inverse observed information.
pub fn fit_logistic(
    x: &Matrix,
    y: &[bool],
    ridge: f64,
    max_iter: usize,
    tol: f64,
) -> Result<GlmFit> {
    let n = x.rows();
    let d = x.cols();
    if y.len() != n {
        return Err(Error::InvalidInput(format!(
            "{n} feature rows but {} labels",
            y.len()
        )));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) || !(tol > 0.0) {
        return Err(Error::InvalidInput("ridge must be >= 0 and tol > 0".into()));
    }
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == n {
        return Err(Error::DegenerateLabels(format!(
            "labels are single-class ({positives} of {n} positive)"
        )));
    }

    // Columns with no variance cannot be estimated; they are removed
    // here and restored as 0/NA rows afterwards.
    let active: Vec<usize> = (0..d).filter(|&j| column_variance(x, j) >= VARIANCE_FLOOR).collect();
    let dropped: Vec<usize> = (0..d).filter(|j| !active.contains(j)).collect();
    let m = active.len() + 1;

    let mut design = Matrix::zeros(n, m);
    for i in 0..n {
        design.set(i, 0, 1.0);
        for (c, &j) in active.iter().enumerate() {
            design.set(i, c + 1, x.get(i, j));
        }
    }
    let yv: Vec<f64> = y.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();

    let mut beta = vec![0.0; m];
    let mut ll = penalized_ll(&design, &yv, &beta, ridge);
    let mut converged = false;
    let mut separation = false;
    let mut iterations = 0;

    for _ in 0..max_iter {
        iterations += 1;
        let eta: Vec<f64> = (0..n)
            .map(|i| design.row(i).iter().zip(&beta).map(|(v, b)| v * b).sum())
            .collect();
        let p: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();

        let mut grad = vec![0.0; m];
        for i in 0..n {
            let r = yv[i] - p[i];
            for (g, v) in grad.iter_mut().zip(design.row(i)) {
                *g += r * v;
            }
        }
        for (j, g) in grad.iter_mut().enumerate().skip(1) {
            *g -= ridge * beta[j];
        }

        let hessian = weighted_gram(&design, &p, ridge);
        let delta = solve_spd(&hessian, &grad)?;

        // Step halving keeps the penalized objective non-decreasing.
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> =
                beta.iter().zip(&delta).map(|(b, dl)| b + step * dl).collect();
            let cand_ll = penalized_ll(&design, &yv, &cand, ridge);
            if cand_ll.is_finite() && cand_ll >= ll {
                let moved = delta.iter().map(|dl| (step * dl).abs()).fold(0.0, f64::max);
                beta = cand;
                ll = cand_ll;
                accepted = true;
                if moved < tol {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No step of any length improves the objective: at the
            // optimum to within float resolution.
            converged = true;
        }
        if beta.iter().any(|b| b.abs() > SEPARATION_CAP) {
            separation = true;
        }
        if converged || separation {
            break;
        }
    }

    // Observed information at the final coefficients.
    let p: Vec<f64> = (0..n)
        .map(|i| sigmoid(design.row(i).iter().zip(&beta).map(|(v, b)| v * b).sum()))
        .collect();
    let info = weighted_gram(&design, &p, ridge);
    let se_active = inverse_diagonal(&info).map(|diag| {
        diag.into_iter()
            .map(|v| if v > 0.0 { Some(v.sqrt()) } else { None })
            .collect::<Vec<_>>()
    });

    let mut coefficients = vec![0.0; d + 1];
    let mut std_errors = vec![None; d + 1];
    coefficients[0] = beta[0];
    if let Ok(se) = &se_active {
        std_errors[0] = se[0];
    }
    for (c, &j) in active.iter().enumerate() {
        coefficients[j + 1] = beta[c + 1];
        if let Ok(se) = &se_active {
            std_errors[j + 1] = se[c + 1];
        }
    }

    let z_scores: Vec<Option<f64>> = coefficients
        .iter()
        .zip(&std_errors)
        .map(|(c, se)| se.map(|s| c / s))
        .collect();
    let p_values: Vec<Option<f64>> = z_scores
        .iter()
        .map(|z| z.map(|z| 2.0 * (1.0 - standard_normal_cdf(z.abs()))))
        .collect();
    let ci_low: Vec<Option<f64>> = coefficients
        .iter()
        .zip(&std_errors)
        .map(|(c, se)| se.map(|s| c - Z_95 * s))
        .collect();
    let ci_high: Vec<Option<f64>> = coefficients
        .iter()
        .zip(&std_errors)
        .map(|(c, se)| se.map(|s| c + Z_95 * s))
        .collect();

    Ok(GlmFit {
        coefficients,
        std_errors,
        z_scores,
        p_values,
        ci_low,
        ci_high,
        dropped,
        converged,
        separation_suspected: separation,
        iterations,
        log_likelihood: ll,
    })
}

/// Thresholds probabilities into binary predictions; the boundary value
/// itself counts as positive.
pub fn apply_threshold(probs: &[f64], threshold: f64) -> Vec<bool> {
    probs.iter().map(|&p| p >= threshold).collect()
}

/// One CSV row per feature: coefficient, Wald standard error, z score,
/// two-sided p, and 95% confidence bounds. Dropped features print NA.
pub fn significance_table(fit: &GlmFit, feature_names: &[String]) -> Result<String> {
    let d = fit.coefficients.len() - 1;
    if feature_names.len() != d {
        return Err(Error::InvalidInput(format!(
            "{d} features but {} names",
            feature_names.len()
        )));
    }
    let mut out = String::from("feature,coefficient,std_error,z,p,ci_low,ci_high\n");
    for (j, name) in feature_names.iter().enumerate() {
        let k = j + 1;
        let _ = writeln!(
            out,
            "{},{:.6},{},{},{},{},{}",
            name,
            fit.coefficients[k],
            fmt_metric(fit.std_errors[k]),
            fmt_metric(fit.z_scores[k]),
            fmt_metric(fit.p_values[k]),
            fmt_metric(fit.ci_low[k]),
            fmt_metric(fit.ci_high[k]),
        );
    }
    Ok(out)
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^eta) without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn penalized_ll(design: &Matrix, y: &[f64], beta: &[f64], ridge: f64) -> f64 {
    let mut ll = 0.0;
    for i in 0..design.rows() {
        let eta: f64 = design.row(i).iter().zip(beta).map(|(v, b)| v * b).sum();
        ll += y[i] * eta - softplus(eta);
    }
    ll - 0.5 * ridge * beta[1..].iter().map(|b| b * b).sum::<f64>()
}

fn column_variance(x: &Matrix, j: usize) -> f64 {
    let n = x.rows() as f64;
    let mean = (0..x.rows()).map(|i| x.get(i, j)).sum::<f64>() / n;
    (0..x.rows()).map(|i| (x.get(i, j) - mean).powi(2)).sum::<f64>() / n
}

/// X' W X + ridge on the diagonal (intercept unpenalized), with weights
/// w_i = p_i (1 - p_i).
fn weighted_gram(design: &Matrix, p: &[f64], ridge: f64) -> Matrix {
    let m = design.cols();
    let mut h = Matrix::zeros(m, m);
    for i in 0..design.rows() {
        let w = p[i] * (1.0 - p[i]);
        let row = design.row(i);
        for j in 0..m {
            let wj = w * row[j];
            for k in j..m {
                let v = h.get(j, k) + wj * row[k];
                h.set(j, k, v);
            }
        }
    }
    for j in 0..m {
        for k in 0..j {
            let v = h.get(k, j);
            h.set(j, k, v);
        }
    }
    for j in 1..m {
        let v = h.get(j, j) + ridge;
        h.set(j, j, v);
    }
    h
}

/// Cholesky factor with escalating diagonal jitter. Returns the lower
/// factor of a + jitter*I for the smallest workable jitter.
fn cholesky_jittered(a: &Matrix) -> Result<Vec<f64>> {
    let m = a.rows();
    let scale = (0..m).map(|j| a.get(j, j).abs()).fold(0.0, f64::max).max(1.0);
    for &jitter in &[0.0, 1e-10, 1e-8, 1e-6, 1e-4, 1e-2] {
        if let Some(l) = cholesky(a, jitter * scale) {
            return Ok(l);
        }
    }
    Err(Error::Numerical("information matrix is not positive definite".into()))
}

fn cholesky(a: &Matrix, jitter: f64) -> Option<Vec<f64>> {
    let m = a.rows();
    let mut l = vec![0.0; m * m];
    for j in 0..m {
        for k in 0..=j {
            let mut s = a.get(j, k);
            if j == k {
                s += jitter;
            }
            for q in 0..k {
                s -= l[j * m + q] * l[k * m + q];
            }
            if j == k {
                if s <= 0.0 {
                    return None;
                }
                l[j * m + j] = s.sqrt();
            } else {
                l[j * m + k] = s / l[k * m + k];
            }
        }
    }
    Some(l)
}

fn solve_spd(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let m = a.rows();
    let l = cholesky_jittered(a)?;
    let mut v = b.to_vec();
    for j in 0..m {
        for q in 0..j {
            v[j] -= l[j * m + q] * v[q];
        }
        v[j] /= l[j * m + j];
    }
    for j in (0..m).rev() {
        for q in j + 1..m {
            v[j] -= l[q * m + j] * v[q];
        }
        v[j] /= l[j * m + j];
    }
    Ok(v)
}

/// Diagonal of the inverse via columnwise forward and back substitution.
fn inverse_diagonal(a: &Matrix) -> Result<Vec<f64>> {
    let m = a.rows();
    let l = cholesky_jittered(a)?;
    let mut diag = vec![0.0; m];
    for col in 0..m {
        let mut v = vec![0.0; m];
        v[col] = 1.0;
        for j in 0..m {
            for q in 0..j {
                v[j] -= l[j * m + q] * v[q];
            }
            v[j] /= l[j * m + j];
        }
        for j in (0..m).rev() {
            for q in j + 1..m {
                v[j] -= l[q * m + j] * v[q];
            }
            v[j] /= l[j * m + j];
        }
        diag[col] = v[col];
    }
    Ok(diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    fn logit(p: f64) -> f64 {
        (p / (1.0 - p)).ln()
    }

    #[test]
    fn intercept_only_balanced_labels_gives_zero_intercept() {
        let x = Matrix::zeros(8, 0);
        let y = [true, false, true, false, true, false, true, false];
        let fit = fit_logistic(&x, &y, 0.0, 100, 1e-10).unwrap();
        assert!(fit.converged);
        assert!(fit.coefficients[0].abs() < 1e-8);
        let probs = fit.predict_proba(&x).unwrap();
        assert!(probs.iter().all(|p| (p - 0.5).abs() < 1e-8));
    }

    #[test]
    fn single_class_labels_are_rejected() {
        let x = Matrix::zeros(4, 1);
        let err = fit_logistic(&x, &[true; 4], 0.0, 50, 1e-8).unwrap_err();
        assert!(matches!(err, crate::Error::DegenerateLabels(_)));
    }

    // Frozen reference fit of this exact dataset from an independent
    // implementation (unpenalized Newton, tolerance 1e-12).
    fn reference_data() -> (Matrix, Vec<bool>) {
        let rows = [
            [0.5, 1.2], [-0.3, 0.8], [1.1, -0.4], [0.9, 2.1],
            [-1.2, -0.7], [0.2, 0.3], [1.8, 1.5], [-0.6, -1.1],
            [0.4, -0.9], [2.2, 0.6], [-1.5, 0.2], [0.7, 1.9],
            [-0.1, -1.4], [1.3, 0.9], [-0.8, 1.1], [0.6, -0.2],
            [1.0, 0.5], [-0.4, -0.6], [0.3, 1.7], [-1.1, -0.3],
        ];
        let y = [
            true, false, false, true, false, true, true, false, true, true,
            false, false, false, true, true, false, true, false, true, false,
        ];
        let x = Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
        (x, y.to_vec())
    }

    #[test]
    fn matches_reference_coefficients_and_wald_statistics() {
        let (x, y) = reference_data();
        let fit = fit_logistic(&x, &y, 0.0, 200, 1e-12).unwrap();
        assert!(fit.converged);
        let want_coef = [-0.641306263455, 1.135287285778, 0.996826466096];
        let want_se = [0.645720645018, 0.724590438775, 0.659953558213];
        let want_p = [0.320630216532, 0.117161774516, 0.130928787636];
        for k in 0..3 {
            assert!(
                (fit.coefficients[k] - want_coef[k]).abs() < 1e-6,
                "coef {k}: {} vs {}",
                fit.coefficients[k],
                want_coef[k]
            );
            assert!((fit.std_errors[k].unwrap() - want_se[k]).abs() < 1e-6);
            assert!((fit.p_values[k].unwrap() - want_p[k]).abs() < 1e-4);
        }
        assert!((fit.log_likelihood - -9.111319467122732).abs() < 1e-8);
    }

    #[test]
    fn planted_coefficients_are_recovered_within_five_percent() {
        let mut rng = SeededRng::new(11);
        let n = 10_000;
        let truth = [1.0, -0.5, 0.25];
        let mut rows = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let f: Vec<f64> = (0..3).map(|_| rng.next_normal()).collect();
            let eta: f64 = f.iter().zip(&truth).map(|(v, b)| v * b).sum();
            y.push(rng.next_f64() < sigmoid(eta));
            rows.push(f);
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let fit = fit_logistic(&x, &y, 0.0, 100, 1e-10).unwrap();
        assert!(fit.converged);
        for (k, want) in truth.iter().enumerate() {
            let got = fit.coefficients[k + 1];
            assert!(
                ((got - want) / want).abs() < 0.05,
                "coef {k}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn constant_columns_are_dropped_with_na_statistics() {
        let (x, y) = reference_data();
        // Insert a constant column between the two informative ones.
        let rows: Vec<Vec<f64>> = (0..x.rows())
            .map(|i| vec![x.get(i, 0), 7.25, x.get(i, 1)])
            .collect();
        let widened = Matrix::from_rows(&rows).unwrap();
        let fit = fit_logistic(&widened, &y, 0.0, 200, 1e-12).unwrap();
        assert_eq!(fit.dropped, vec![1]);
        assert_eq!(fit.coefficients[2], 0.0);
        assert!(fit.std_errors[2].is_none());
        assert!(fit.z_scores[2].is_none());
        // Remaining coefficients agree with the fit without the column.
        let base = fit_logistic(&x, &y, 0.0, 200, 1e-12).unwrap();
        assert!((fit.coefficients[1] - base.coefficients[1]).abs() < 1e-8);
        assert!((fit.coefficients[3] - base.coefficients[2]).abs() < 1e-8);
        // Prediction ignores the dropped column entirely.
        let p_base = base.predict_proba(&x).unwrap();
        let p_wide = fit.predict_proba(&widened).unwrap();
        for (a, b) in p_base.iter().zip(&p_wide) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn objective_is_non_decreasing_in_iteration_count() {
        let (x, y) = reference_data();
        let mut prev = f64::NEG_INFINITY;
        for max_iter in 1..=10 {
            let fit = fit_logistic(&x, &y, 0.1, max_iter, 1e-14).unwrap();
            assert!(
                fit.log_likelihood >= prev - 1e-12,
                "objective fell at iteration {max_iter}"
            );
            prev = fit.log_likelihood;
        }
    }

    #[test]
    fn perfect_separation_is_flagged_not_fatal() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![if i < 10 { -2.0 } else { 2.0 }])
            .collect();
        let y: Vec<bool> = (0..20).map(|i| i >= 10).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let fit = fit_logistic(&x, &y, 0.0, 200, 1e-10).unwrap();
        assert!(
            fit.separation_suspected,
            "iters={} conv={} beta={:?}",
            fit.iterations, fit.converged, fit.coefficients
        );
        assert!(fit.coefficients.iter().all(|c| c.is_finite()));
        // Ridge keeps the same data well-posed and unflagged.
        let ridged = fit_logistic(&x, &y, 1.0, 200, 1e-10).unwrap();
        assert!(!ridged.separation_suspected);
        assert!(ridged.converged);
    }

    #[test]
    fn predict_proba_identities() {
        let fit = GlmFit {
            coefficients: vec![0.0, 0.0],
            std_errors: vec![None, None],
            z_scores: vec![None, None],
            p_values: vec![None, None],
            ci_low: vec![None, None],
            ci_high: vec![None, None],
            dropped: vec![],
            converged: true,
            separation_suspected: false,
            iterations: 0,
            log_likelihood: 0.0,
        };
        let x = Matrix::from_rows(&[vec![3.0], vec![-1.0]]).unwrap();
        assert!(fit.predict_proba(&x).unwrap().iter().all(|p| *p == 0.5));

        let mut with_intercept = fit.clone();
        with_intercept.coefficients = vec![logit(0.9), 0.0];
        for p in with_intercept.predict_proba(&x).unwrap() {
            assert!((p - 0.9).abs() < 1e-12);
        }

        let mut slope = fit;
        slope.coefficients = vec![0.5, -1.5];
        let p = slope.predict_proba(&x).unwrap();
        assert!((p[0] - sigmoid(0.5 - 1.5 * 3.0)).abs() < 1e-15);
        assert!((p[1] - sigmoid(0.5 + 1.5)).abs() < 1e-15);

        let wrong_width = Matrix::zeros(2, 3);
        assert!(slope.predict_proba(&wrong_width).is_err());
    }

    #[test]
    fn threshold_is_inclusive() {
        assert_eq!(
            apply_threshold(&[0.4, 0.5, 0.6], 0.5),
            vec![false, true, true]
        );
        assert_eq!(apply_threshold(&[0.0, 0.3], 0.0), vec![true, true]);
        assert_eq!(apply_threshold(&[1.0, 0.9], 1.0 + 1e-12), vec![false, false]);
    }

    #[test]
    fn significance_table_rows_and_na_literals() {
        let (x, y) = reference_data();
        let rows: Vec<Vec<f64>> = (0..x.rows())
            .map(|i| vec![x.get(i, 0), 7.25, x.get(i, 1)])
            .collect();
        let widened = Matrix::from_rows(&rows).unwrap();
        let fit = fit_logistic(&widened, &y, 0.0, 200, 1e-12).unwrap();
        let names = vec!["f0".to_string(), "f1".to_string(), "f2".to_string()];
        let table = significance_table(&fit, &names).unwrap();
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "feature,coefficient,std_error,z,p,ci_low,ci_high");
        assert_eq!(lines[2], "f1,0.000000,NA,NA,NA,NA,NA");
        // Wald identities on the printed row for f0.
        let fields: Vec<&str> = lines[1].split(',').collect();
        let coef: f64 = fields[1].parse().unwrap();
        let se: f64 = fields[2].parse().unwrap();
        let z: f64 = fields[3].parse().unwrap();
        let lo: f64 = fields[5].parse().unwrap();
        let hi: f64 = fields[6].parse().unwrap();
        assert!((z - coef / se).abs() < 1e-4);
        assert!((hi - lo - 2.0 * Z_95 * se).abs() < 1e-4);

        assert!(significance_table(&fit, &names[..2].to_vec()).is_err());
    }

    #[test]
    fn zero_z_score_gives_unit_p_value_and_symmetric_interval() {
        assert!((2.0 * (1.0 - standard_normal_cdf(0.0)) - 1.0).abs() < 1e-12);
        let se = 0.25;
        let (lo, hi) = (0.0 - Z_95 * se, 0.0 + Z_95 * se);
        assert!((lo + hi).abs() < 1e-12);
    }
}
