//! Time-series plumbing shared by the CSS and PMM estimators: model orders,
//! differencing and its inverse, lag designs, the conditional residual
//! recursion for multiplicative seasonal ARIMA models, the CSS baseline and
//! simulation.
//!
//! Sign conventions: the AR side is `phi(B) Phi(B^s) (w_t - mean)` with
//! `phi(B) = 1 - sum phi_j B^j`, the MA side is `theta(B) Theta(B^s) e_t` with
//! `theta(B) = 1 + sum theta_k B^k`. Lag-coefficient vectors returned by
//! [`expand_polynomial`] are indexed from lag 1.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cumulants::{central_moments, MomentSet};
use crate::error::{PmmError, Result};
use crate::linmodel::{fit_ols, gaussian_criteria, DesignProblem, InformationCriteria};
use crate::optim::{minimize, BfgsOptions};

/// `(p, d, q) x (P, D, Q)_s` order of a seasonal ARIMA model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    #[serde(rename = "P")]
    pub seasonal_p: usize,
    #[serde(rename = "D")]
    pub seasonal_d: usize,
    #[serde(rename = "Q")]
    pub seasonal_q: usize,
    /// Seasonal period, 0 for non-seasonal models.
    #[serde(rename = "s")]
    pub period: usize,
    pub include_mean: bool,
}

impl ModelOrder {
    /// Non-seasonal order; the mean is estimated only when `d == 0`.
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        Self {
            p,
            d,
            q,
            seasonal_p: 0,
            seasonal_d: 0,
            seasonal_q: 0,
            period: 0,
            include_mean: d == 0,
        }
    }

    pub fn seasonal(
        p: usize,
        d: usize,
        q: usize,
        seasonal_p: usize,
        seasonal_d: usize,
        seasonal_q: usize,
        period: usize,
    ) -> Result<Self> {
        Self {
            p,
            d,
            q,
            seasonal_p,
            seasonal_d,
            seasonal_q,
            period,
            include_mean: d + seasonal_d == 0,
        }
        .validated()
    }

    pub fn with_mean(mut self, include_mean: bool) -> Self {
        self.include_mean = include_mean;
        self
    }

    /// Checks the seasonal invariants and clears `include_mean` for
    /// differenced models.
    pub fn validated(mut self) -> Result<Self> {
        let has_seasonal = self.seasonal_p + self.seasonal_d + self.seasonal_q > 0;
        if self.period == 1 || (has_seasonal && self.period < 2) {
            return Err(PmmError::InvalidOrder(format!(
                "seasonal terms need a period >= 2, got {}",
                self.period
            )));
        }
        if self.d + self.seasonal_d > 0 {
            self.include_mean = false;
        }
        Ok(self)
    }

    pub fn is_seasonal(&self) -> bool {
        self.period >= 2 && self.seasonal_p + self.seasonal_d + self.seasonal_q > 0
    }

    /// Degree of the expanded AR polynomial, also the number of conditioning
    /// observations excluded from the CSS objective.
    pub fn ar_degree(&self) -> usize {
        self.p + self.period * self.seasonal_p
    }

    pub fn ma_degree(&self) -> usize {
        self.q + self.period * self.seasonal_q
    }

    pub fn diff_degree(&self) -> usize {
        self.d + self.period * self.seasonal_d
    }

    /// Number of estimated ARMA coefficients plus the mean, if any.
    pub fn n_params(&self) -> usize {
        self.p + self.q + self.seasonal_p + self.seasonal_q + usize::from(self.include_mean)
    }

    /// Non-seasonal AR without MA terms: estimable by a lag regression.
    pub fn is_pure_ar(&self) -> bool {
        self.p > 0 && self.q == 0 && self.seasonal_p == 0 && self.seasonal_q == 0
    }

    /// Shortest series accepted by the fitters.
    pub fn min_length(&self) -> usize {
        self.p
            + self.q
            + self.period * (self.seasonal_p + self.seasonal_q)
            + self.diff_degree()
            + 6
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_params());
        names.extend((1..=self.p).map(|i| format!("ar{i}")));
        names.extend((1..=self.q).map(|i| format!("ma{i}")));
        names.extend((1..=self.seasonal_p).map(|i| format!("sar{i}")));
        names.extend((1..=self.seasonal_q).map(|i| format!("sma{i}")));
        if self.include_mean {
            names.push("mean".into());
        }
        names
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TsParams {
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub seasonal_phi: Vec<f64>,
    pub seasonal_theta: Vec<f64>,
    pub mean: f64,
}

impl TsParams {
    pub fn zeros(order: &ModelOrder) -> Self {
        Self {
            phi: vec![0.0; order.p],
            theta: vec![0.0; order.q],
            seasonal_phi: vec![0.0; order.seasonal_p],
            seasonal_theta: vec![0.0; order.seasonal_q],
            mean: 0.0,
        }
    }

    pub fn check(&self, order: &ModelOrder) -> Result<()> {
        for (have, want) in [
            (self.phi.len(), order.p),
            (self.theta.len(), order.q),
            (self.seasonal_phi.len(), order.seasonal_p),
            (self.seasonal_theta.len(), order.seasonal_q),
        ] {
            if have != want {
                return Err(PmmError::LengthMismatch {
                    expected: want,
                    got: have,
                });
            }
        }
        let all = self
            .phi
            .iter()
            .chain(&self.theta)
            .chain(&self.seasonal_phi)
            .chain(&self.seasonal_theta);
        if all.chain(std::iter::once(&self.mean)).any(|v| !v.is_finite()) {
            return Err(PmmError::InvalidArgument("non-finite model parameter".into()));
        }
        Ok(())
    }

    /// Flattens to `[phi, theta, seasonal_phi, seasonal_theta, mean?]`.
    pub fn pack(&self, order: &ModelOrder) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .phi
            .iter()
            .chain(&self.theta)
            .chain(&self.seasonal_phi)
            .chain(&self.seasonal_theta)
            .copied()
            .collect();
        if order.include_mean {
            v.push(self.mean);
        }
        v
    }

    pub fn unpack(v: &[f64], order: &ModelOrder) -> Self {
        let mut it = v.iter().copied();
        let mut take = |k: usize| -> Vec<f64> { it.by_ref().take(k).collect() };
        let phi = take(order.p);
        let theta = take(order.q);
        let seasonal_phi = take(order.seasonal_p);
        let seasonal_theta = take(order.seasonal_q);
        let mean = if order.include_mean {
            take(1).first().copied().unwrap_or(0.0)
        } else {
            0.0
        };
        Self {
            phi,
            theta,
            seasonal_phi,
            seasonal_theta,
            mean,
        }
    }

    /// Lag coefficients of the expanded AR polynomial.
    pub fn ar_lags(&self, period: usize) -> Vec<f64> {
        expand_polynomial(&self.phi, &self.seasonal_phi, period)
            .expect("orders validated before expansion")
    }

    /// Lag coefficients of the expanded MA polynomial `1 + sum b_k B^k`.
    pub fn ma_lags(&self, period: usize) -> Vec<f64> {
        let neg = |v: &[f64]| v.iter().map(|c| -c).collect::<Vec<_>>();
        expand_polynomial(&neg(&self.theta), &neg(&self.seasonal_theta), period)
            .expect("orders validated before expansion")
            .into_iter()
            .map(|c| -c)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TsMethod {
    Css,
    Pmm2,
    Pmm3,
}

impl TsMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Css => "css",
            Self::Pmm2 => "pmm2",
            Self::Pmm3 => "pmm3",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsFit {
    pub method: TsMethod,
    pub order: ModelOrder,
    pub params: TsParams,
    /// One residual per differenced observation; the first `conditioning`
    /// entries are computed from zero presample values.
    pub residuals: Vec<f64>,
    pub original_series: Vec<f64>,
    pub conditioning: usize,
    /// Moments of the residuals after the conditioning window.
    pub moments: MomentSet,
    pub g_coefficient: f64,
    /// Value of the minimized objective (sum of squares for CSS).
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl TsFit {
    /// Residuals that enter the objective (after the conditioning window).
    pub fn effective_residuals(&self) -> &[f64] {
        &self.residuals[self.conditioning..]
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.params.pack(&self.order)
    }

    pub fn information_criteria(&self) -> InformationCriteria {
        gaussian_criteria(self.effective_residuals(), self.order.n_params())
    }
}

/// Coefficients of `(1 - B)^d (1 - B^s)^D`, constant term first.
pub fn diff_polynomial(d: usize, seasonal_d: usize, period: usize) -> Vec<f64> {
    let mut poly = vec![1.0];
    let mut mul = |lag: usize| {
        let mut out = vec![0.0; poly.len() + lag];
        for (i, c) in poly.iter().enumerate() {
            out[i] += c;
            out[i + lag] -= c;
        }
        poly = out;
    };
    for _ in 0..d {
        mul(1);
    }
    for _ in 0..seasonal_d {
        mul(period);
    }
    poly
}

/// Applies `(1 - B)^d (1 - B^s)^D`; the output is `d + D s` shorter.
pub fn difference(x: &[f64], d: usize, seasonal_d: usize, period: usize) -> Result<Vec<f64>> {
    if seasonal_d > 0 && period < 2 {
        return Err(PmmError::InvalidOrder(format!(
            "seasonal differencing needs a period >= 2, got {period}"
        )));
    }
    let lag = d + seasonal_d * period;
    if x.len() <= lag {
        return Err(PmmError::InputTooShort {
            needed: lag + 1,
            got: x.len(),
        });
    }
    let poly = diff_polynomial(d, seasonal_d, period);
    Ok((lag..x.len())
        .map(|t| poly.iter().enumerate().map(|(j, c)| c * x[t - j]).sum())
        .collect())
}

/// Inverts [`difference`]: given the original values `history` preceding the
/// differenced values `diffs`, returns the undifferenced continuation.
pub fn integrate_forecast(
    history: &[f64],
    diffs: &[f64],
    d: usize,
    seasonal_d: usize,
    period: usize,
) -> Result<Vec<f64>> {
    if seasonal_d > 0 && period < 2 {
        return Err(PmmError::InvalidOrder(format!(
            "seasonal integration needs a period >= 2, got {period}"
        )));
    }
    let poly = diff_polynomial(d, seasonal_d, period);
    let lag = poly.len() - 1;
    if history.len() < lag {
        return Err(PmmError::InputTooShort {
            needed: lag,
            got: history.len(),
        });
    }
    let mut buf: Vec<f64> = history[history.len() - lag..].to_vec();
    buf.reserve(diffs.len());
    for &w in diffs {
        let t = buf.len();
        let v = w - (1..=lag).map(|j| poly[j] * buf[t - j]).sum::<f64>();
        buf.push(v);
    }
    Ok(buf.split_off(lag))
}

/// Lag regression `x_t` on `(x_{t-1}, ..., x_{t-p})` for `t > p`.
pub fn ar_design_matrix(x: &[f64], p: usize, include_mean: bool) -> Result<DesignProblem> {
    if p == 0 {
        return Err(PmmError::InvalidOrder("AR design needs p >= 1".into()));
    }
    if x.len() <= p {
        return Err(PmmError::InputTooShort {
            needed: p + 1,
            got: x.len(),
        });
    }
    let rows = x.len() - p;
    let k = p + usize::from(include_mean);
    let off = usize::from(include_mean);
    let mut names = Vec::with_capacity(k);
    if include_mean {
        names.push("(Intercept)".to_string());
    }
    names.extend((1..=p).map(|j| format!("ar{j}")));
    let design = DMatrix::from_fn(rows, k, |r, c| {
        if include_mean && c == 0 {
            1.0
        } else {
            x[r + p - (c + 1 - off)]
        }
    });
    let y = DVector::from_iterator(rows, x[p..].iter().copied());
    DesignProblem::new(design, y, names)
}

/// Lag coefficients of `(1 - sum c_j B^j)(1 - sum C_k B^{s k})` written as
/// `1 - sum a_l B^l`; element `l - 1` holds `a_l`.
pub fn expand_polynomial(nonseasonal: &[f64], seasonal: &[f64], period: usize) -> Result<Vec<f64>> {
    if seasonal.is_empty() {
        return Ok(nonseasonal.to_vec());
    }
    if period < 2 {
        return Err(PmmError::InvalidOrder(format!(
            "seasonal polynomial needs a period >= 2, got {period}"
        )));
    }
    let deg = nonseasonal.len() + period * seasonal.len();
    let mut out = vec![0.0; deg];
    for (j, c) in nonseasonal.iter().enumerate() {
        out[j] += c;
    }
    for (k, sc) in seasonal.iter().enumerate() {
        let base = period * (k + 1);
        out[base - 1] += sc;
        for (j, c) in nonseasonal.iter().enumerate() {
            out[base + j] -= c * sc;
        }
    }
    Ok(out)
}

/// Conditional residuals `e_t = (w_t - mu) - sum a_j (w_{t-j} - mu) - sum b_k e_{t-k}`
/// with zero presample values. `mu` is the mean when `order.include_mean`,
/// zero otherwise.
pub fn css_residuals(w: &[f64], params: &TsParams, order: &ModelOrder) -> Result<Vec<f64>> {
    params.check(order)?;
    Ok(residual_recursion(w, params, order))
}

fn residual_recursion(w: &[f64], params: &TsParams, order: &ModelOrder) -> Vec<f64> {
    let a = params.ar_lags(order.period);
    let b = params.ma_lags(order.period);
    let mu = if order.include_mean { params.mean } else { 0.0 };
    let centered: Vec<f64> = w.iter().map(|v| v - mu).collect();
    let mut e = Vec::with_capacity(w.len());
    for t in 0..w.len() {
        let mut v = centered[t];
        for (j, aj) in a.iter().enumerate() {
            if let Some(prev) = t.checked_sub(j + 1) {
                v -= aj * centered[prev];
            }
        }
        for (k, bk) in b.iter().enumerate() {
            if let Some(prev) = t.checked_sub(k + 1) {
                v -= bk * e[prev];
            }
        }
        e.push(v);
    }
    e
}

/// Sum of squared residuals after the conditioning window.
pub fn css_objective(w: &[f64], params: &TsParams, order: &ModelOrder) -> f64 {
    residual_recursion(w, params, order)[order.ar_degree()..]
        .iter()
        .map(|e| e * e)
        .sum()
}

/// True when every root of `1 - sum a_j z^j` lies outside the unit circle.
pub fn is_stationary(ar_lags: &[f64]) -> bool {
    max_companion_modulus(ar_lags) < 1.0
}

/// True when every root of `1 + sum b_k z^k` lies outside the unit circle.
pub fn is_invertible(ma_lags: &[f64]) -> bool {
    let neg: Vec<f64> = ma_lags.iter().map(|c| -c).collect();
    max_companion_modulus(&neg) < 1.0
}

fn max_companion_modulus(lags: &[f64]) -> f64 {
    let deg = lags.iter().rposition(|c| *c != 0.0).map_or(0, |i| i + 1);
    if deg == 0 {
        return 0.0;
    }
    let companion = DMatrix::from_fn(deg, deg, |r, c| {
        if r == 0 {
            lags[c]
        } else if c + 1 == r {
            1.0
        } else {
            0.0
        }
    });
    companion
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub(crate) fn region_warnings(params: &TsParams, order: &ModelOrder) -> Vec<String> {
    let mut w = Vec::new();
    if !is_stationary(&params.ar_lags(order.period)) {
        w.push("AR polynomial is not stationary".to_string());
    }
    if !is_invertible(&params.ma_lags(order.period)) {
        w.push("MA polynomial is not invertible".to_string());
    }
    w
}

pub(crate) fn check_series(x: &[f64], order: &ModelOrder) -> Result<ModelOrder> {
    let order = order.validated()?;
    if x.len() < order.min_length() {
        return Err(PmmError::InputTooShort {
            needed: order.min_length(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(PmmError::InvalidArgument("non-finite value in series".into()));
    }
    Ok(order)
}

/// Conditional-sum-of-squares fit. Pure AR orders are solved by least squares
/// on the lag design; everything else by BFGS from a zero start with the
/// sample mean.
pub fn fit_css(x: &[f64], order: &ModelOrder) -> Result<TsFit> {
    let order = check_series(x, order)?;
    let w = difference(x, order.d, order.seasonal_d, order.period)?;
    let mut warnings = Vec::new();
    let (params, converged, iterations) = if order.is_pure_ar() {
        let problem = ar_design_matrix(&w, order.p, order.include_mean)?;
        let ols = fit_ols(&problem)?;
        (
            ar_params_from_regression(&ols.coefficients, &order, &w, &mut warnings),
            true,
            0,
        )
    } else if order.p + order.q + order.seasonal_p + order.seasonal_q == 0 {
        let mut params = TsParams::zeros(&order);
        if order.include_mean {
            params.mean = w.iter().sum::<f64>() / w.len() as f64;
        }
        (params, true, 0)
    } else {
        let mut start = TsParams::zeros(&order);
        if order.include_mean {
            start.mean = w.iter().sum::<f64>() / w.len() as f64;
        }
        let objective = |v: &[f64]| css_objective(&w, &TsParams::unpack(v, &order), &order);
        let m = minimize(objective, &start.pack(&order), BfgsOptions::default());
        if !m.converged {
            warnings.push("CSS optimizer did not converge".to_string());
        }
        (TsParams::unpack(&m.x, &order), m.converged, m.iterations)
    };
    warnings.extend(region_warnings(&params, &order));
    let residuals = residual_recursion(&w, &params, &order);
    let conditioning = order.ar_degree();
    let moments = central_moments(&residuals[conditioning..])?;
    let objective = residuals[conditioning..].iter().map(|e| e * e).sum();
    Ok(TsFit {
        method: TsMethod::Css,
        order,
        params,
        residuals,
        original_series: x.to_vec(),
        conditioning,
        moments,
        g_coefficient: 1.0,
        objective,
        converged,
        iterations,
        warnings,
    })
}

/// Converts lag-regression coefficients `(intercept?, phi)` into model
/// parameters with the process mean `intercept / (1 - sum phi)`.
pub(crate) fn ar_params_from_regression(
    coefficients: &[f64],
    order: &ModelOrder,
    w: &[f64],
    warnings: &mut Vec<String>,
) -> TsParams {
    let mut params = TsParams::zeros(order);
    if order.include_mean {
        params.phi = coefficients[1..].to_vec();
        let denom = 1.0 - params.phi.iter().sum::<f64>();
        params.mean = if denom.abs() > 1e-8 {
            coefficients[0] / denom
        } else {
            warnings.push("AR coefficients sum to one; mean set to the sample mean".into());
            w.iter().sum::<f64>() / w.len() as f64
        };
    } else {
        params.phi = coefficients.to_vec();
    }
    params
}

/// Drives the ARMA recursion with `innovations`, drops the first `burnin`
/// values and integrates the result `d` and `D` times from zero.
///
/// The AR part should be stationary for the burn-in to be meaningful; this
/// is not enforced.
pub fn simulate_arima(
    order: &ModelOrder,
    params: &TsParams,
    innovations: &[f64],
    burnin: usize,
) -> Result<Vec<f64>> {
    params.check(order)?;
    if order.is_seasonal() && order.period < 2 {
        return Err(PmmError::InvalidOrder("seasonal period must be >= 2".into()));
    }
    if innovations.len() <= burnin {
        return Err(PmmError::InputTooShort {
            needed: burnin + 1,
            got: innovations.len(),
        });
    }
    let arma = arma_filter(
        &params.ar_lags(order.period),
        &params.ma_lags(order.period),
        params.mean,
        innovations,
    );
    let w = &arma[burnin..];
    let lag = order.diff_degree();
    if lag == 0 {
        return Ok(w.to_vec());
    }
    integrate_forecast(&vec![0.0; lag], w, order.d, order.seasonal_d, order.period)
}

/// `y_t - mu = sum a_j (y_{t-j} - mu) + e_t + sum b_k e_{t-k}` from zero presample.
pub(crate) fn arma_filter(a: &[f64], b: &[f64], mu: f64, e: &[f64]) -> Vec<f64> {
    let mut dev: Vec<f64> = Vec::with_capacity(e.len());
    for t in 0..e.len() {
        let mut v = e[t];
        for (j, aj) in a.iter().enumerate() {
            if let Some(prev) = t.checked_sub(j + 1) {
                v += aj * dev[prev];
            }
        }
        for (k, bk) in b.iter().enumerate() {
            if let Some(prev) = t.checked_sub(k + 1) {
                v += bk * e[prev];
            }
        }
        dev.push(v);
    }
    dev.into_iter().map(|v| v + mu).collect()
}

/// Gauss-Newton covariance `g * m2 * (J'J)^{-1}` of the packed parameters,
/// with `J` the finite-difference Jacobian of the conditional residuals.
pub fn ts_covariance(fit: &TsFit) -> Result<DMatrix<f64>> {
    let order = fit.order;
    let w = difference(&fit.original_series, order.d, order.seasonal_d, order.period)?;
    let theta = fit.params.pack(&order);
    let k = theta.len();
    if k == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let start = fit.conditioning;
    let rows = w.len() - start;
    let mut jac = DMatrix::zeros(rows, k);
    let mut probe = theta.clone();
    for i in 0..k {
        let h = 1e-6 * theta[i].abs().max(1.0);
        probe[i] = theta[i] + h;
        let up = residual_recursion(&w, &TsParams::unpack(&probe, &order), &order);
        probe[i] = theta[i] - h;
        let down = residual_recursion(&w, &TsParams::unpack(&probe, &order), &order);
        probe[i] = theta[i];
        for r in 0..rows {
            jac[(r, i)] = (up[start + r] - down[start + r]) / (2.0 * h);
        }
    }
    let jtj = jac.transpose() * &jac;
    let inv = jtj.try_inverse().ok_or(PmmError::SingularDesign)?;
    Ok(inv * (fit.g_coefficient * fit.moments.m2))
}
