//! Weighted logistic regression by iteratively reweighted least squares.
//!
//! Accepts fractional responses (quasi-likelihood form), frequency weights,
//! and a fixed offset, which is everything the nuisance fits and the TMLE
//! fluctuations need. Deterministic for fixed inputs.

use crate::data::Dataset;
use crate::error::GlmError;
use crate::terms::{Term, TermSpec, Var};
use std::collections::HashMap;

pub const MAX_ITER: usize = 100;
/// Relative Newton-step length below which the fit is declared converged.
pub const STEP_TOL: f64 = 1e-10;
/// Relative deviance-change cutoff (R's glm epsilon), applied when the
/// iteration budget runs out: a separated fit whose likelihood has
/// flattened counts as converged even though the coefficients still drift.
pub const DEV_TOL: f64 = 1e-8;
const RIDGE: f64 = 1e-8;
const MU_FLOOR: f64 = 1e-9;

#[inline]
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Row-major design matrix with an intercept as the first column.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    data: Vec<f64>,
    n: usize,
    p: usize,
    labels: Vec<String>,
}

impl DesignMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self, GlmError> {
        let n = rows.len();
        let p = labels.len();
        let mut data = Vec::with_capacity(n * p);
        for row in &rows {
            if row.len() != p {
                return Err(GlmError::Dimension(format!(
                    "row has {} entries, expected {p}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(GlmError::NonFinite("design matrix"));
        }
        Ok(DesignMatrix { data, n, p, labels })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }
}

/// Build a design from term products, with optional per-variable overrides
/// so counterfactual predictions (e.g. A=a*, S=s) reuse the fitted model.
pub fn build_design(
    dataset: &Dataset,
    terms: &[Term],
    overrides: &HashMap<Var, u8>,
) -> Result<DesignMatrix, GlmError> {
    let labels = TermSpec::labels(terms);
    let rows = dataset
        .rows()
        .iter()
        .map(|obs| {
            std::iter::once(1.0)
                .chain(terms.iter().map(|term| {
                    term.iter()
                        .map(|v| match overrides.get(v) {
                            Some(&fixed) => f64::from(fixed),
                            None => v.value(obs),
                        })
                        .product::<f64>()
                }))
                .collect()
        })
        .collect();
    DesignMatrix::from_rows(rows, labels)
}

/// Result of one IRLS fit.
#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub deviance: f64,
    /// Set when the normal equations were singular and a ridge was applied.
    pub ridged: bool,
}

impl LogisticFit {
    /// Linear predictor without any offset.
    pub fn linear_predictor(&self, x: &DesignMatrix) -> Result<Vec<f64>, GlmError> {
        if x.p() != self.coefficients.len() {
            return Err(GlmError::Dimension(format!(
                "design has {} columns, fit has {} coefficients",
                x.p(),
                self.coefficients.len()
            )));
        }
        Ok((0..x.n())
            .map(|i| dot(x.row(i), &self.coefficients))
            .collect())
    }

    /// Predicted probabilities expit(X beta), returned unclipped.
    pub fn predict_prob(&self, x: &DesignMatrix) -> Result<Vec<f64>, GlmError> {
        Ok(self.linear_predictor(x)?.into_iter().map(expit).collect())
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn deviance(y: &[f64], weights: &[f64], mu: &[f64]) -> f64 {
    let mut dev = 0.0;
    for i in 0..y.len() {
        if weights[i] == 0.0 {
            continue;
        }
        let m = mu[i].clamp(MU_FLOOR, 1.0 - MU_FLOOR);
        dev -= 2.0 * weights[i] * (y[i] * m.ln() + (1.0 - y[i]) * (1.0 - m).ln());
    }
    dev
}

/// Weighted score, i.e. the gradient of the weighted log-likelihood.
pub fn score(x: &DesignMatrix, y: &[f64], weights: &[f64], mu: &[f64]) -> Vec<f64> {
    let p = x.p();
    let mut g = vec![0.0; p];
    for i in 0..x.n() {
        let r = weights[i] * (y[i] - mu[i]);
        if r == 0.0 {
            continue;
        }
        for (gj, xj) in g.iter_mut().zip(x.row(i)) {
            *gj += r * xj;
        }
    }
    g
}

/// Cholesky solve of a symmetric positive definite system; None if a pivot
/// collapses.
fn solve_spd(a: &[f64], b: &[f64], p: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; p * p];
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= l[j * p + k] * l[j * p + k];
        }
        if d <= 1e-300 || !d.is_finite() {
            return None;
        }
        let dj = d.sqrt();
        l[j * p + j] = dj;
        for i in (j + 1)..p {
            let mut v = a[i * p + j];
            for k in 0..j {
                v -= l[i * p + k] * l[j * p + k];
            }
            l[i * p + j] = v / dj;
        }
    }
    // Forward then backward substitution.
    let mut z = b.to_vec();
    for i in 0..p {
        for k in 0..i {
            z[i] -= l[i * p + k] * z[k];
        }
        z[i] /= l[i * p + i];
    }
    for i in (0..p).rev() {
        for k in (i + 1)..p {
            z[i] -= l[k * p + i] * z[k];
        }
        z[i] /= l[i * p + i];
    }
    Some(z)
}

/// Fit a logistic model of `y` on `x` by IRLS with frequency `weights` and a
/// fixed `offset` added to the linear predictor.
pub fn fit_logistic(
    x: &DesignMatrix,
    y: &[f64],
    weights: &[f64],
    offset: &[f64],
) -> Result<LogisticFit, GlmError> {
    let n = x.n();
    let p = x.p();
    if y.len() != n || weights.len() != n || offset.len() != n {
        return Err(GlmError::Dimension(format!(
            "design has {n} rows; y/weights/offset have {}/{}/{}",
            y.len(),
            weights.len(),
            offset.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
        return Err(GlmError::NonFinite("responses (must lie in [0,1])"));
    }
    if weights.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(GlmError::NonFinite("weights"));
    }
    if offset.iter().any(|v| !v.is_finite()) {
        return Err(GlmError::NonFinite("offset"));
    }

    let mut beta = vec![0.0; p];
    let mut mu: Vec<f64> = offset.iter().map(|&o| expit(o)).collect();
    let mut dev = deviance(y, weights, &mu);
    let mut ridged = false;
    let mut iterations = 0;
    let mut dev_stalled = false;

    for iter in 0..MAX_ITER {
        iterations = iter + 1;
        let g = score(x, y, weights, &mu);

        // Weighted information matrix with clipped working weights.
        let mut info = vec![0.0; p * p];
        for i in 0..n {
            let m = mu[i].clamp(MU_FLOOR, 1.0 - MU_FLOOR);
            let wi = weights[i] * m * (1.0 - m);
            if wi == 0.0 {
                continue;
            }
            let row = x.row(i);
            for j in 0..p {
                let wx = wi * row[j];
                for k in j..p {
                    info[j * p + k] += wx * row[k];
                }
            }
        }
        for j in 0..p {
            for k in 0..j {
                info[j * p + k] = info[k * p + j];
            }
        }

        let step = match solve_spd(&info, &g, p) {
            Some(s) => s,
            None => {
                ridged = true;
                let mut reg = info.clone();
                for j in 0..p {
                    reg[j * p + j] += RIDGE;
                }
                match solve_spd(&reg, &g, p) {
                    Some(s) => s,
                    None => break,
                }
            }
        };
        let step_norm = step.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let beta_scale = 1.0 + beta.iter().fold(0.0f64, |m, &v: &f64| m.max(v.abs()));

        // Step-halving keeps separated fits from oscillating; the accept
        // tolerance is relative, so rounding noise at the optimum does not
        // stall the loop.
        let dev_prev = dev;
        let mut accepted = false;
        let mut scale = 1.0;
        for _ in 0..30 {
            let trial: Vec<f64> = beta
                .iter()
                .zip(&step)
                .map(|(b, s)| b + scale * s)
                .collect();
            let trial_mu: Vec<f64> = (0..n)
                .map(|i| expit(offset[i] + dot(x.row(i), &trial)))
                .collect();
            let trial_dev = deviance(y, weights, &trial_mu);
            if trial_dev.is_finite() && trial_dev <= dev + 1e-8 * (1.0 + dev.abs()) {
                beta = trial;
                mu = trial_mu;
                dev = trial_dev;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }

        // Newton's step length bounds the remaining coefficient error, so
        // convergence is declared on the step itself (weight-scale
        // invariant, unlike an absolute score cutoff).
        dev_stalled = accepted && (dev_prev - dev).abs() / (dev.abs() + 0.1) < DEV_TOL;
        if (accepted && scale * step_norm <= STEP_TOL * beta_scale)
            || (!accepted && step_norm <= 1e-6 * beta_scale)
        {
            return Ok(LogisticFit {
                coefficients: beta,
                converged: !ridged,
                iterations,
                deviance: dev,
                ridged,
            });
        }
        if !accepted {
            break;
        }
    }

    // Iteration budget exhausted. Separated fits drift in the coefficients
    // forever while the likelihood flattens out; R's glm calls that
    // converged, and the fitted probabilities are what downstream code
    // consumes, so the deviance criterion decides.
    Ok(LogisticFit {
        coefficients: beta,
        converged: dev_stalled && !ridged,
        iterations,
        deviance: dev,
        ridged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn intercept_only(n: usize) -> DesignMatrix {
        DesignMatrix::from_rows(vec![vec![1.0]; n], vec!["1".to_string()]).unwrap()
    }

    #[test]
    fn intercept_recovers_logit_of_mean() {
        let x = intercept_only(4);
        let fit = fit_logistic(&x, &[1.0, 1.0, 0.0, 0.0], &[1.0; 4], &[0.0; 4]).unwrap();
        assert!(fit.converged);
        assert_abs_diff_eq!(fit.coefficients[0], 0.0, epsilon = 1e-9);

        let fit = fit_logistic(&x, &[1.0, 1.0, 1.0, 0.0], &[1.0; 4], &[0.0; 4]).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 1.0986123, epsilon = 1e-6);
    }

    #[test]
    fn offset_at_weighted_mean_gives_zero_fluctuation() {
        // The TMLE no-op case: offset already equals logit of the weighted
        // mean response, so the intercept MLE is 0.
        let x = intercept_only(4);
        let y = [1.0, 1.0, 1.0, 0.0];
        let off = [logit(0.75); 4];
        let fit = fit_logistic(&x, &y, &[1.0; 4], &off).unwrap();
        assert!(fit.converged);
        assert_abs_diff_eq!(fit.coefficients[0], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn predictions_match_expit_examples() {
        let x = DesignMatrix::from_rows(
            vec![vec![1.0, 1.0], vec![1.0, 0.0]],
            vec!["1".to_string(), "W1".to_string()],
        )
        .unwrap();
        let fit = LogisticFit {
            coefficients: vec![0.4, 0.2],
            converged: true,
            iterations: 0,
            deviance: 0.0,
            ridged: false,
        };
        let p = fit.predict_prob(&x).unwrap();
        assert_abs_diff_eq!(p[0], 0.6456563, epsilon = 1e-7);
        assert_abs_diff_eq!(p[1], 0.5986876, epsilon = 1e-7);

        let zero = LogisticFit { coefficients: vec![0.0, 0.0], ..fit };
        assert!(zero.predict_prob(&x).unwrap().iter().all(|&p| p == 0.5));
    }

    #[test]
    fn weight_scaling_leaves_coefficients_unchanged() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![1.0, f64::from(i % 2), f64::from((i / 2) % 2)])
            .collect();
        let labels = vec!["1".into(), "x1".into(), "x2".into()];
        let x = DesignMatrix::from_rows(rows, labels).unwrap();
        let y: Vec<f64> = (0..20).map(|i| f64::from(i % 3 == 0)).collect();
        let w1 = vec![1.0; 20];
        let w2: Vec<f64> = w1.iter().map(|w| w * 7.25).collect();
        let f1 = fit_logistic(&x, &y, &w1, &vec![0.0; 20]).unwrap();
        let f2 = fit_logistic(&x, &y, &w2, &vec![0.0; 20]).unwrap();
        for (a, b) in f1.coefficients.iter().zip(&f2.coefficients) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn separation_falls_back_to_ridge_without_panicking() {
        // Perfectly separated; also collinear columns.
        let rows = vec![
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![1.0, 1.0, 1.0],
            vec![1.0, 1.0, 1.0],
        ];
        let x = DesignMatrix::from_rows(rows, vec!["1".into(), "x".into(), "x2".into()]).unwrap();
        let y = [0.0, 0.0, 1.0, 1.0];
        let fit = fit_logistic(&x, &y, &[1.0; 4], &[0.0; 4]).unwrap();
        assert!(!fit.converged);
        assert!(fit.coefficients.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn nan_input_is_an_error() {
        let x = intercept_only(2);
        assert!(fit_logistic(&x, &[f64::NAN, 0.0], &[1.0; 2], &[0.0; 2]).is_err());
        assert!(fit_logistic(&x, &[1.0, 0.0], &[1.0, f64::INFINITY], &[0.0; 2]).is_err());
    }
}
