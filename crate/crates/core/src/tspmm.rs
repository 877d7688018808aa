//! PMM2 and symmetric PMM3 estimation for (seasonal) ARIMA models and point
//! forecasting.
//!
//! Pure autoregressions go through the regression estimators on the lag
//! design. Models with MA terms minimize a PMM potential in the conditional
//! residuals with cumulants frozen at their CSS values:
//!
//! * PMM2: `sum e^2/2 + c (e^3/3 - m2 e)`, `c = -m3 / (m4 - m2^2)`
//! * PMM3: `sum b1 e^2/2 + b3 e^4/4`, `(b1, b3)` the symmetric PMM3 weights

use nalgebra::{DMatrix, DVector};

use crate::cumulants::{
    central_moments, g2_coefficient, g3_coefficient, pmm2_weight, pmm3_weights,
};
use crate::error::{PmmError, Result};
use crate::linmodel::{fit_pmm2, fit_pmm3, RegressionFit, RegressionMethod};
use crate::optim::Minimum;
use crate::tscore::{
    ar_design_matrix, ar_params_from_regression, check_series, difference, fit_css,
    integrate_forecast, region_warnings, css_residuals, ModelOrder, TsFit, TsMethod, TsParams,
};

fn differenced(x: &[f64], order: &ModelOrder) -> Result<Vec<f64>> {
    difference(x, order.d, order.seasonal_d, order.period)
}

/// Wraps a lag-regression fit of the differenced series as a [`TsFit`].
fn from_lag_regression(
    x: &[f64],
    order: ModelOrder,
    fit: RegressionFit,
    method: TsMethod,
) -> Result<TsFit> {
    let w = differenced(x, &order)?;
    let mut warnings = fit.warnings;
    let params = ar_params_from_regression(&fit.coefficients, &order, &w, &mut warnings);
    warnings.extend(region_warnings(&params, &order));
    let residuals = css_residuals(&w, &params, &order)?;
    let conditioning = order.ar_degree();
    let moments = central_moments(&residuals[conditioning..])?;
    let objective = match method {
        TsMethod::Pmm2 if !moments.is_degenerate() => {
            let c = pmm2_weight(moments.m2, moments.m3, moments.m4).unwrap_or(0.0);
            pmm2_potential(&residuals[conditioning..], c, moments.m2)
        }
        _ => residuals[conditioning..].iter().map(|e| e * e).sum(),
    };
    Ok(TsFit {
        method,
        order,
        params,
        residuals,
        original_series: x.to_vec(),
        conditioning,
        moments,
        g_coefficient: fit.g_coefficient,
        objective,
        converged: fit.converged,
        iterations: fit.iterations,
        warnings,
    })
}

/// PMM2 for AR(p) through the fixed-point regression estimator.
pub fn fit_ar_pmm2(x: &[f64], p: usize, include_mean: bool) -> Result<TsFit> {
    if p == 0 {
        return Err(PmmError::InvalidOrder("AR order must be >= 1".into()));
    }
    if x.len() <= p + 5 {
        return Err(PmmError::InputTooShort {
            needed: p + 6,
            got: x.len(),
        });
    }
    let order = ModelOrder::new(p, 0, 0).with_mean(include_mean);
    let problem = ar_design_matrix(x, p, include_mean)?;
    let fit = fit_pmm2(&problem)?;
    from_lag_regression(x, order, fit, TsMethod::Pmm2)
}

/// `sum e^2/2 + c (e^3/3 - m2 e)`.
pub fn pmm2_potential(residuals: &[f64], c: f64, m2: f64) -> f64 {
    residuals
        .iter()
        .map(|e| {
            let e2 = e * e;
            0.5 * e2 + c * (e2 * e / 3.0 - m2 * e)
        })
        .sum()
}

/// `sum b1 e^2/2 + b3 e^4/4`.
pub fn pmm3_potential(residuals: &[f64], b1: f64, b3: f64) -> f64 {
    residuals
        .iter()
        .map(|e| {
            let e2 = e * e;
            0.5 * b1 * e2 + 0.25 * b3 * e2 * e2
        })
        .sum()
}

/// Conditional residuals after the conditioning window at packed `v`.
fn window_residuals(w: &[f64], order: &ModelOrder, cond: usize, v: &[f64]) -> Vec<f64> {
    let mut r = css_residuals(w, &TsParams::unpack(v, order), order)
        .expect("parameter lengths follow the order");
    r.drain(..cond);
    r
}

/// Damped Gauss-Newton iteration on a frozen-cumulant potential.
///
/// The direction `-(slope J'J)^{-1} J' psi(e)` is the time-series form of
/// the regression fixed-point step; it is halved until the potential
/// decreases, so the result never has a larger potential than `start`.
/// Stops when the accepted step is below `1e-6` in the infinity norm.
fn frozen_newton<S, P>(
    w: &[f64],
    order: &ModelOrder,
    cond: usize,
    start: &[f64],
    score: S,
    potential: P,
    slope: f64,
) -> Minimum
where
    S: Fn(f64) -> f64,
    P: Fn(&[f64]) -> f64,
{
    const TOL: f64 = 1e-6;
    const MAX_ITER: usize = 200;
    let k = start.len();
    let mut x = start.to_vec();
    let mut e = window_residuals(w, order, cond, &x);
    let mut q = potential(&e);
    let mut converged = k == 0;
    let mut iterations = 0;
    let mut probe = x.clone();
    while !converged && iterations < MAX_ITER && q.is_finite() {
        iterations += 1;
        let mut jac = DMatrix::zeros(e.len(), k);
        for i in 0..k {
            let h = 1e-6 * x[i].abs().max(1.0);
            probe[i] = x[i] + h;
            let up = window_residuals(w, order, cond, &probe);
            probe[i] = x[i] - h;
            let down = window_residuals(w, order, cond, &probe);
            probe[i] = x[i];
            for r in 0..e.len() {
                jac[(r, i)] = (up[r] - down[r]) / (2.0 * h);
            }
        }
        let psi = DVector::from_iterator(e.len(), e.iter().map(|&v| score(v)));
        let grad = jac.transpose() * psi;
        let Some(chol) = (jac.transpose() * &jac).cholesky() else {
            break;
        };
        let step = -chol.solve(&grad) / slope;
        let slope_dir = grad.dot(&step);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            let e_trial = window_residuals(w, order, cond, &trial);
            let q_trial = potential(&e_trial);
            if q_trial.is_finite() && q_trial <= q + 1e-4 * t * slope_dir {
                x = trial;
                e = e_trial;
                q = q_trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        let moved = t * step.amax();
        if !accepted {
            converged = step.amax() < TOL.sqrt();
            break;
        }
        converged = moved < TOL;
        probe.copy_from_slice(&x);
    }
    Minimum {
        x,
        value: q,
        iterations,
        converged,
    }
}

fn css_fallback(mut css: TsFit, reason: String) -> TsFit {
    css.warnings.push(format!("returned the CSS fit: {reason}"));
    css
}

/// Finishes a potential-minimization fit from the optimizer output.
fn finish_potential_fit(
    css: &TsFit,
    w: &[f64],
    method: TsMethod,
    packed: &[f64],
    objective: f64,
    converged: bool,
    iterations: usize,
    g_coefficient: f64,
    mut warnings: Vec<String>,
) -> Result<TsFit> {
    let order = css.order;
    let params = TsParams::unpack(packed, &order);
    warnings.extend(region_warnings(&params, &order));
    if !converged {
        warnings.push(format!("{} optimizer did not converge", method.as_str()));
    }
    let residuals = css_residuals(w, &params, &order)?;
    let moments = central_moments(&residuals[css.conditioning..])?;
    Ok(TsFit {
        method,
        order,
        params,
        residuals,
        original_series: css.original_series.clone(),
        conditioning: css.conditioning,
        moments,
        g_coefficient,
        objective,
        converged,
        iterations,
        warnings,
    })
}

/// Two-stage PMM2: CSS for starting values and frozen `(m2, m3, m4)`, then
/// damped Gauss-Newton on the PMM2 potential.
pub fn fit_ts_pmm2(x: &[f64], order: &ModelOrder) -> Result<TsFit> {
    let css = fit_css(x, order)?;
    let mom = css.moments;
    if mom.is_degenerate() {
        return Ok(css_fallback(css, "CSS residuals have zero variance".into()));
    }
    let weight = g2_coefficient(mom.gamma3, mom.gamma4)
        .and_then(|g2| pmm2_weight(mom.m2, mom.m3, mom.m4).map(|c| (g2, c)));
    let (g2, c) = match weight {
        Ok(v) => v,
        Err(e) => return Ok(css_fallback(css, e.to_string())),
    };
    let order = css.order;
    let w = differenced(x, &order)?;
    let cond = css.conditioning;
    let m2 = mom.m2;
    let m = frozen_newton(
        &w,
        &order,
        cond,
        &css.params.pack(&order),
        |e| e + c * (e * e - m2),
        |r| pmm2_potential(r, c, m2),
        1.0,
    );
    finish_potential_fit(
        &css,
        &w,
        TsMethod::Pmm2,
        &m.x,
        m.value,
        m.converged,
        m.iterations,
        g2,
        css.warnings.clone(),
    )
}

/// Symmetric PMM3. Pure AR orders use the regression PMM3 estimator on the
/// lag design of the differenced series; other orders minimize the PMM3
/// potential with `(m2, m4, m6)` frozen at the CSS residuals.
pub fn fit_ts_pmm3(x: &[f64], order: &ModelOrder) -> Result<TsFit> {
    let order = check_series(x, order)?;
    if order.is_pure_ar() {
        let w = differenced(x, &order)?;
        let problem = ar_design_matrix(&w, order.p, order.include_mean)?;
        let fit = fit_pmm3(&problem)?;
        let method = match fit.method {
            RegressionMethod::Pmm3 => TsMethod::Pmm3,
            _ => TsMethod::Css,
        };
        return from_lag_regression(x, order, fit, method);
    }

    let css = fit_css(x, &order)?;
    let mom = css.moments;
    if mom.is_degenerate() {
        return Ok(css_fallback(css, "CSS residuals have zero variance".into()));
    }
    let weights = g3_coefficient(mom.gamma4, mom.gamma6)
        .and_then(|g3| pmm3_weights(mom.m2, mom.m4, mom.m6).map(|b| (g3, b)));
    let (g3, b) = match weights {
        Ok(v) => v,
        Err(e) => return Ok(css_fallback(css, e.to_string())),
    };
    let mut warnings = css.warnings.clone();
    if b.b1 < 0.0 {
        warnings.push(
            "PMM3 potential is nonconvex (b1 < 0); local minimizer from the CSS start".into(),
        );
    }
    let w = differenced(x, &order)?;
    let cond = css.conditioning;
    let m = frozen_newton(
        &w,
        &order,
        cond,
        &css.params.pack(&order),
        |e| b.score(e),
        |r| pmm3_potential(r, b.b1, b.b3),
        b.slope,
    );
    finish_potential_fit(
        &css,
        &w,
        TsMethod::Pmm3,
        &m.x,
        m.value,
        m.converged,
        m.iterations,
        g3,
        warnings,
    )
}

/// Fits `order` with `method`, routing undifferenced pure AR models with
/// PMM2 through the fixed-point lag regression.
pub fn fit_ts(x: &[f64], order: &ModelOrder, method: TsMethod) -> Result<TsFit> {
    match method {
        TsMethod::Css => fit_css(x, order),
        TsMethod::Pmm2 => {
            let order = check_series(x, order)?;
            if order.is_pure_ar() && order.diff_degree() == 0 {
                fit_ar_pmm2(x, order.p, order.include_mean)
            } else {
                fit_ts_pmm2(x, &order)
            }
        }
        TsMethod::Pmm3 => fit_ts_pmm3(x, order),
    }
}

/// Recursive point forecasts with future innovations set to zero, mapped
/// back through the differencing.
pub fn forecast(fit: &TsFit, horizon: usize) -> Result<Vec<f64>> {
    if horizon < 1 {
        return Err(PmmError::InvalidArgument("forecast horizon must be >= 1".into()));
    }
    if !fit.converged {
        return Err(PmmError::InvalidArgument(
            "forecasting requires a converged fit".into(),
        ));
    }
    let order = fit.order;
    let w = differenced(&fit.original_series, &order)?;
    let n = w.len();
    let a = fit.params.ar_lags(order.period);
    let b = fit.params.ma_lags(order.period);
    let mu = if order.include_mean { fit.params.mean } else { 0.0 };
    let mut dev: Vec<f64> = w.iter().map(|v| v - mu).collect();
    for t in n..n + horizon {
        let ar: f64 = a
            .iter()
            .enumerate()
            .filter_map(|(j, aj)| t.checked_sub(j + 1).map(|s| aj * dev[s]))
            .sum();
        let ma: f64 = b
            .iter()
            .enumerate()
            .filter_map(|(k, bk)| {
                t.checked_sub(k + 1)
                    .filter(|s| *s < n)
                    .map(|s| bk * fit.residuals[s])
            })
            .sum();
        dev.push(ar + ma);
    }
    let wf: Vec<f64> = dev[n..].iter().map(|v| v + mu).collect();
    if order.diff_degree() == 0 {
        Ok(wf)
    } else {
        integrate_forecast(
            &fit.original_series,
            &wf,
            order.d,
            order.seasonal_d,
            order.period,
        )
    }
}
