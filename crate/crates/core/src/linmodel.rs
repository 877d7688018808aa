//! Linear-model estimation: the OLS baseline, the PMM2 fixed-point estimator,
//! the symmetric PMM3 Newton-type estimator and their asymptotic inference.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cumulants::{
    central_moments, g2_coefficient, pmm2_weight, pmm3_weights, MomentSet,
    MIN_MOMENT_SAMPLE,
};
use crate::error::{PmmError, Result};

/// Relative singular-value threshold below which the design is rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Skewness of the OLS residuals above which PMM3 attaches a warning.
pub const PMM3_SKEW_WARNING: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressionMethod {
    Ols,
    Pmm2,
    Pmm3,
}

impl RegressionMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Ols => "ols",
            Self::Pmm2 => "pmm2",
            Self::Pmm3 => "pmm3",
        }
    }
}

/// A linear model `y = X beta + e` with a full-column-rank design.
#[derive(Debug, Clone)]
pub struct DesignProblem {
    x: DMatrix<f64>,
    y: DVector<f64>,
    column_names: Vec<String>,
}

impl DesignProblem {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, column_names: Vec<String>) -> Result<Self> {
        let (n, k) = x.shape();
        if y.len() != n {
            return Err(PmmError::LengthMismatch {
                expected: n,
                got: y.len(),
            });
        }
        if column_names.len() != k {
            return Err(PmmError::LengthMismatch {
                expected: k,
                got: column_names.len(),
            });
        }
        if k == 0 {
            return Err(PmmError::InvalidArgument("design has no columns".into()));
        }
        if n <= k {
            return Err(PmmError::InputTooShort {
                needed: k + 1,
                got: n,
            });
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(PmmError::InvalidArgument("non-finite value in design".into()));
        }
        let sv = x.clone().singular_values();
        let smax = sv.max();
        if !(smax > 0.0) || sv.iter().any(|&s| s <= RANK_TOLERANCE * smax) {
            return Err(PmmError::SingularDesign);
        }
        Ok(Self { x, y, column_names })
    }

    /// Builds a design from predictor columns, optionally prepending an
    /// intercept column named `(Intercept)`.
    pub fn from_columns(
        columns: &[Vec<f64>],
        names: &[String],
        y: Vec<f64>,
        intercept: bool,
    ) -> Result<Self> {
        let n = y.len();
        if let Some(bad) = columns.iter().find(|c| c.len() != n) {
            return Err(PmmError::LengthMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        let k = columns.len() + usize::from(intercept);
        let mut x = DMatrix::zeros(n, k);
        let mut col_names = Vec::with_capacity(k);
        let mut j = 0;
        if intercept {
            x.column_mut(0).fill(1.0);
            col_names.push("(Intercept)".to_string());
            j = 1;
        }
        for (i, c) in columns.iter().enumerate() {
            x.column_mut(j + i).copy_from_slice(c);
            col_names.push(
                names
                    .get(i)
                    .cloned()
                    .unwrap_or_else(|| format!("x{}", i + 1)),
            );
        }
        Self::new(x, DVector::from_vec(y), col_names)
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn nobs(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    /// Same design with a different response.
    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        if y.len() != self.nobs() {
            return Err(PmmError::LengthMismatch {
                expected: self.nobs(),
                got: y.len(),
            });
        }
        Ok(Self {
            x: self.x.clone(),
            y,
            column_names: self.column_names.clone(),
        })
    }

    fn residuals(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.y - &self.x * beta
    }
}

/// Thin-QR solver for `(X'X)^{-1} X' v`.
struct LeastSquares {
    qt: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl LeastSquares {
    fn new(x: &DMatrix<f64>) -> Result<Self> {
        let qr = x.clone().qr();
        let r = qr.r();
        let dmax = r.diagonal().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if r.diagonal().iter().any(|d| d.abs() <= RANK_TOLERANCE * dmax) {
            return Err(PmmError::SingularDesign);
        }
        Ok(Self {
            qt: qr.q().transpose(),
            r,
        })
    }

    fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        self.r
            .solve_upper_triangular(&(&self.qt * v))
            .expect("R has a nonzero diagonal")
    }

    fn xtx_inverse(&self) -> DMatrix<f64> {
        let k = self.r.ncols();
        let r_inv = self
            .r
            .solve_upper_triangular(&DMatrix::identity(k, k))
            .expect("R has a nonzero diagonal");
        &r_inv * r_inv.transpose()
    }
}

/// Stopping rule for the iterative fitters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationControl {
    /// Bound on the infinity norm of the coefficient update.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IterationControl {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub method: RegressionMethod,
    pub column_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `None` only for designs with fewer than four observations.
    pub moments: Option<MomentSet>,
    /// g2 for PMM2, g3 for PMM3, 1 for OLS.
    pub g_coefficient: f64,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl RegressionFit {
    pub fn nobs(&self) -> usize {
        self.residuals.len()
    }

    /// Residual variance with denominator `n - 1`.
    pub fn residual_variance(&self) -> f64 {
        match &self.moments {
            Some(m) => m.m2,
            None => sample_variance(&self.residuals),
        }
    }
}

fn sample_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

fn moments_if_possible(residuals: &[f64]) -> Result<Option<MomentSet>> {
    if residuals.len() < MIN_MOMENT_SAMPLE {
        Ok(None)
    } else {
        central_moments(residuals).map(Some)
    }
}

fn push_once(warnings: &mut Vec<String>, msg: String) {
    if !warnings.contains(&msg) {
        warnings.push(msg);
    }
}

/// Clamps a sample efficiency coefficient into `[0, 1]`, recording why.
fn admissible_or_clamped(
    g: Result<f64>,
    fallback: f64,
    label: &str,
    warnings: &mut Vec<String>,
) -> f64 {
    match g {
        Ok(v) => v.clamp(0.0, 1.0),
        Err(e) => {
            push_once(
                warnings,
                format!("{label} set to {fallback} for inadmissible residual cumulants ({e})"),
            );
            fallback
        }
    }
}

pub fn fit_ols(problem: &DesignProblem) -> Result<RegressionFit> {
    let ls = LeastSquares::new(problem.x())?;
    let beta = ls.solve(problem.y());
    let residuals = problem.residuals(&beta);
    let residuals: Vec<f64> = residuals.iter().copied().collect();
    Ok(RegressionFit {
        method: RegressionMethod::Ols,
        column_names: problem.column_names.clone(),
        coefficients: beta.iter().copied().collect(),
        moments: moments_if_possible(&residuals)?,
        residuals,
        g_coefficient: 1.0,
        iterations: 0,
        converged: true,
        warnings: Vec::new(),
    })
}

/// PMM2 fixed-point estimator with default iteration control.
pub fn fit_pmm2(problem: &DesignProblem) -> Result<RegressionFit> {
    fit_pmm2_with(problem, IterationControl::default())
}

/// Iterates `beta <- beta + (X'X)^{-1} X' [e + c (e^2 - m2)]` from the OLS
/// solution, refreshing `m2` and `c` from the current residuals each step.
pub fn fit_pmm2_with(problem: &DesignProblem, control: IterationControl) -> Result<RegressionFit> {
    let (n, k) = problem.x().shape();
    if n < k + 4 {
        return Err(PmmError::InputTooShort {
            needed: k + 4,
            got: n,
        });
    }
    let ls = LeastSquares::new(problem.x())?;
    let mut beta = ls.solve(problem.y());
    let mut warnings = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=control.max_iter {
        iterations = it;
        let e = problem.residuals(&beta);
        let mom = central_moments(e.as_slice())?;
        let c = if mom.is_degenerate() {
            0.0
        } else {
            match g2_coefficient(mom.gamma3, mom.gamma4)
                .and_then(|_| pmm2_weight(mom.m2, mom.m3, mom.m4))
            {
                Ok(c) => c,
                Err(err) => {
                    push_once(
                        &mut warnings,
                        format!("quadratic weight set to 0 for inadmissible iterate ({err})"),
                    );
                    0.0
                }
            }
        };
        let v = e.map(|ei| ei + c * (ei * ei - mom.m2));
        let step = ls.solve(&v);
        beta += &step;
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(PmmError::Optimization("PMM2 iteration diverged".into()));
        }
        if step.amax() < control.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        warnings.push(format!(
            "PMM2 iteration did not converge in {} steps",
            control.max_iter
        ));
    }

    let residuals: Vec<f64> = problem.residuals(&beta).iter().copied().collect();
    let moments = central_moments(&residuals)?;
    let g = if moments.is_degenerate() {
        1.0
    } else {
        admissible_or_clamped(moments.g2(), 1.0, "g2", &mut warnings)
    };
    Ok(RegressionFit {
        method: RegressionMethod::Pmm2,
        column_names: problem.column_names.clone(),
        coefficients: beta.iter().copied().collect(),
        residuals,
        moments: Some(moments),
        g_coefficient: g,
        iterations,
        converged,
        warnings,
    })
}

pub fn fit_pmm3(problem: &DesignProblem) -> Result<RegressionFit> {
    fit_pmm3_with(problem, IterationControl::default())
}

/// Newton-type iteration on `S(beta) = X' [b1 e + b3 e^3]` with the Jacobian
/// replaced by `-(b1 + 3 b3 m2) X'X`. Falls back to OLS when the moment
/// matrix of the residuals is not positive definite.
pub fn fit_pmm3_with(problem: &DesignProblem, control: IterationControl) -> Result<RegressionFit> {
    let (n, k) = problem.x().shape();
    if n < k + 6 {
        return Err(PmmError::InputTooShort {
            needed: k + 6,
            got: n,
        });
    }
    let ols = fit_ols(problem)?;
    let ls = LeastSquares::new(problem.x())?;
    let mut warnings = Vec::new();
    if let Some(m) = &ols.moments {
        if !m.is_degenerate() && m.gamma3.abs() > PMM3_SKEW_WARNING {
            warnings.push(format!(
                "OLS residual skewness {:.3} exceeds {PMM3_SKEW_WARNING}; PMM3 assumes symmetric errors",
                m.gamma3
            ));
        }
    }

    let fallback = |mut warnings: Vec<String>, reason: String| {
        warnings.push(format!("PMM3 fell back to OLS: {reason}"));
        let mut fit = ols.clone();
        fit.warnings = warnings;
        Ok(fit)
    };

    let mut beta = DVector::from_column_slice(&ols.coefficients);
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=control.max_iter {
        iterations = it;
        let e = problem.residuals(&beta);
        let mom = central_moments(e.as_slice())?;
        if mom.is_degenerate() {
            converged = true;
            break;
        }
        let w = match pmm3_weights(mom.m2, mom.m4, mom.m6) {
            Ok(w) => w,
            Err(err) => return fallback(warnings, err.to_string()),
        };
        let score = e.map(|ei| w.score(ei));
        let step = ls.solve(&score) / w.slope;
        beta += &step;
        if beta.iter().any(|b| !b.is_finite()) {
            return fallback(warnings, "iteration diverged".into());
        }
        if step.amax() < control.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        warnings.push(format!(
            "PMM3 iteration did not converge in {} steps",
            control.max_iter
        ));
    }

    let residuals: Vec<f64> = problem.residuals(&beta).iter().copied().collect();
    let moments = central_moments(&residuals)?;
    let g = if moments.is_degenerate() {
        1.0
    } else {
        admissible_or_clamped(moments.g3(), 1.0, "g3", &mut warnings)
    };
    Ok(RegressionFit {
        method: RegressionMethod::Pmm3,
        column_names: problem.column_names.clone(),
        coefficients: beta.iter().copied().collect(),
        residuals,
        moments: Some(moments),
        g_coefficient: g,
        iterations,
        converged,
        warnings,
    })
}

pub fn fit_regression(problem: &DesignProblem, method: RegressionMethod) -> Result<RegressionFit> {
    match method {
        RegressionMethod::Ols => fit_ols(problem),
        RegressionMethod::Pmm2 => fit_pmm2(problem),
        RegressionMethod::Pmm3 => fit_pmm3(problem),
    }
}

/// `g * m2 * (X'X)^{-1}`, the finite-sample form of the asymptotic covariance.
pub fn asymptotic_covariance(fit: &RegressionFit, problem: &DesignProblem) -> Result<DMatrix<f64>> {
    if !fit.converged {
        return Err(PmmError::InvalidArgument(
            "asymptotic covariance requires a converged fit".into(),
        ));
    }
    covariance_unchecked(fit, problem)
}

/// Covariance formula without the convergence guard, for simulation summaries.
pub(crate) fn covariance_unchecked(
    fit: &RegressionFit,
    problem: &DesignProblem,
) -> Result<DMatrix<f64>> {
    if fit.coefficients.len() != problem.ncols() {
        return Err(PmmError::LengthMismatch {
            expected: problem.ncols(),
            got: fit.coefficients.len(),
        });
    }
    let ls = LeastSquares::new(problem.x())?;
    Ok(ls.xtx_inverse() * (fit.g_coefficient * fit.residual_variance()))
}

/// Two-sided standard normal quantile for a confidence level.
pub fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(PmmError::InvalidArgument(format!(
            "confidence level {level} outside (0, 1)"
        )));
    }
    Ok(Normal::standard().inverse_cdf(0.5 * (1.0 + level)))
}

/// Normal-quantile intervals `beta_j +/- z sqrt(cov_jj)`.
pub fn confidence_intervals(
    fit: &RegressionFit,
    problem: &DesignProblem,
    level: f64,
) -> Result<Vec<(f64, f64)>> {
    let z = normal_quantile(level)?;
    let cov = asymptotic_covariance(fit, problem)?;
    Ok(fit
        .coefficients
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let half = z * cov[(j, j)].max(0.0).sqrt();
            (b - half, b + half)
        })
        .collect())
}

/// Gaussian quasi-likelihood summaries of a residual vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InformationCriteria {
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    /// Number of parameters counted: coefficients plus the variance.
    pub n_params: usize,
    /// Set when the residual sum of squares is zero and the likelihood is infinite.
    pub perfect_fit: bool,
}

/// Quasi-likelihood `-n/2 (log(2 pi RSS/n) + 1)` with `n_coef + 1` parameters.
pub fn gaussian_criteria(residuals: &[f64], n_coef: usize) -> InformationCriteria {
    let n = residuals.len() as f64;
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let n_params = n_coef + 1;
    let kp = n_params as f64;
    if rss <= 0.0 {
        return InformationCriteria {
            loglik: f64::INFINITY,
            aic: f64::NEG_INFINITY,
            bic: f64::NEG_INFINITY,
            n_params,
            perfect_fit: true,
        };
    }
    let loglik = -0.5 * n * ((2.0 * std::f64::consts::PI * rss / n).ln() + 1.0);
    InformationCriteria {
        loglik,
        aic: -2.0 * loglik + 2.0 * kp,
        bic: -2.0 * loglik + n.ln() * kp,
        n_params,
        perfect_fit: false,
    }
}

pub fn information_criteria(fit: &RegressionFit) -> InformationCriteria {
    gaussian_criteria(&fit.residuals, fit.coefficients.len())
}
