//! Residual bootstrap for regressions and block residual bootstrap for
//! ARIMA-family fits.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{PmmError, Result};
use crate::linmodel::{fit_regression, DesignProblem, RegressionMethod};
use crate::rng::substream;
use crate::tscore::{arma_filter, difference, integrate_forecast, ModelOrder, TsMethod};
use crate::tspmm::fit_ts;

/// Below this many replicates the bootstrap runs but warns.
pub const MIN_RECOMMENDED_REPLICATES: usize = 50;

/// Residuals below this multiple of `max|y|` are treated as an exact fit.
pub const PERFECT_FIT_TOLERANCE: f64 = 1e-12;

/// Largest tolerated fraction of failed refits.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BootstrapKind {
    Residual,
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
    /// Keep the full replicate matrix in the result.
    pub keep_replicates: bool,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            replicates: 500,
            level: 0.95,
            seed: 1,
            keep_replicates: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRow {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    /// `None` when the standard error is zero.
    pub t_value: Option<f64>,
    pub p_value: Option<f64>,
    pub conf_low: f64,
    pub conf_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub kind: BootstrapKind,
    pub rows: Vec<BootstrapRow>,
    /// Successful replicates in replicate order, one coefficient vector each.
    pub replicates: Option<Vec<Vec<f64>>>,
    pub requested: usize,
    pub failed: usize,
    pub block_length: Option<usize>,
    pub level: f64,
    pub seed: u64,
    pub warnings: Vec<String>,
}

/// Integer cube root, rounded down.
pub fn default_block_length(n: usize) -> usize {
    let mut r = (n as f64).cbrt().round() as usize;
    while r.pow(3) > n {
        r -= 1;
    }
    while (r + 1).pow(3) <= n {
        r += 1;
    }
    r
}

/// Sorted-order indices `(lo, hi)` bracketing the central `level` share of
/// `b` replicates. The interval holds `round(level * b)` values, split as
/// evenly as possible between the tails.
pub fn percentile_indices(b: usize, level: f64) -> (usize, usize) {
    let m = ((level * b as f64).round() as usize).clamp(1, b);
    let lo = (b - m) / 2;
    (lo, lo + m - 1)
}

fn validate(opts: &BootstrapOptions) -> Result<()> {
    if opts.replicates < 2 {
        return Err(PmmError::InvalidArgument(
            "at least two bootstrap replicates are required".into(),
        ));
    }
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(PmmError::InvalidArgument(format!(
            "confidence level {} outside (0, 1)",
            opts.level
        )));
    }
    Ok(())
}

fn centered(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - mean).collect()
}

fn summarize(
    kind: BootstrapKind,
    names: Vec<String>,
    estimates: &[f64],
    outcomes: Vec<Result<Vec<f64>>>,
    opts: &BootstrapOptions,
    block_length: Option<usize>,
    mut warnings: Vec<String>,
) -> Result<BootstrapResult> {
    let total = outcomes.len();
    let draws: Vec<Vec<f64>> = outcomes.into_iter().filter_map(|r| r.ok()).collect();
    let failed = total - draws.len();
    if failed as f64 > MAX_FAILURE_FRACTION * total as f64 || draws.len() < 2 {
        return Err(PmmError::TooManyFailures { failed, total });
    }
    if total < MIN_RECOMMENDED_REPLICATES {
        warnings.push(format!(
            "only {total} bootstrap replicates; at least {MIN_RECOMMENDED_REPLICATES} are recommended"
        ));
    }
    if failed > 0 {
        warnings.push(format!("{failed} of {total} bootstrap refits failed and were dropped"));
    }
    let b = draws.len();
    let (lo, hi) = percentile_indices(b, opts.level);
    let normal = Normal::standard();
    let rows = names
        .into_iter()
        .zip(estimates)
        .enumerate()
        .map(|(j, (name, &estimate))| {
            let mut col: Vec<f64> = draws.iter().map(|d| d[j]).collect();
            let mean = col.iter().sum::<f64>() / b as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
            let constant = col.iter().all(|v| *v == col[0]);
            let std_error = if constant { 0.0 } else { var.sqrt() };
            col.sort_by(f64::total_cmp);
            let (t_value, p_value) = if std_error > 0.0 {
                let t = estimate / std_error;
                (Some(t), Some(2.0 * normal.sf(t.abs())))
            } else {
                (None, None)
            };
            BootstrapRow {
                name,
                estimate,
                std_error,
                t_value,
                p_value,
                conf_low: col[lo],
                conf_high: col[hi],
            }
        })
        .collect();
    Ok(BootstrapResult {
        kind,
        rows,
        replicates: opts.keep_replicates.then_some(draws),
        requested: total,
        failed,
        block_length,
        level: opts.level,
        seed: opts.seed,
        warnings,
    })
}

/// Resamples centered residuals with replacement and refits `y* = X b + e*`.
pub fn residual_bootstrap(
    problem: &DesignProblem,
    method: RegressionMethod,
    opts: &BootstrapOptions,
) -> Result<BootstrapResult> {
    validate(opts)?;
    let base = fit_regression(problem, method)?;
    let beta = DVector::from_column_slice(&base.coefficients);
    let fitted = problem.x() * &beta;
    let mut resid = centered(&base.residuals);
    let y_scale = problem.y().amax().max(1.0);
    if resid.iter().all(|r| r.abs() <= PERFECT_FIT_TOLERANCE * y_scale) {
        resid.iter_mut().for_each(|r| *r = 0.0);
    }
    let n = resid.len();
    let outcomes: Vec<Result<Vec<f64>>> = (0..opts.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(opts.seed, 0, r);
            let y = DVector::from_fn(n, |i, _| fitted[i] + resid[rng.random_range(0..n)]);
            let fit = fit_regression(&problem.with_response(y)?, method)?;
            Ok(fit.coefficients)
        })
        .collect();
    summarize(
        BootstrapKind::Residual,
        base.column_names.clone(),
        &base.coefficients,
        outcomes,
        opts,
        None,
        base.warnings,
    )
}

/// Concatenates uniformly drawn non-overlapping blocks of `residuals` (the
/// trailing partial block included) and truncates to `target_len`. Returns
/// the series and the chosen block indices.
pub fn resample_blocks<R: Rng + ?Sized>(
    residuals: &[f64],
    block_length: usize,
    target_len: usize,
    rng: &mut R,
) -> (Vec<f64>, Vec<usize>) {
    let blocks: Vec<&[f64]> = residuals.chunks(block_length).collect();
    let mut out = Vec::with_capacity(target_len + block_length);
    let mut chosen = Vec::new();
    while out.len() < target_len {
        let k = rng.random_range(0..blocks.len());
        chosen.push(k);
        out.extend_from_slice(blocks[k]);
    }
    out.truncate(target_len);
    (out, chosen)
}

/// Block residual bootstrap: rebuilds series from resampled innovations,
/// integrates them from the observed starting values and refits.
pub fn block_bootstrap_ts(
    x: &[f64],
    order: &ModelOrder,
    method: TsMethod,
    block_length: Option<usize>,
    opts: &BootstrapOptions,
) -> Result<BootstrapResult> {
    validate(opts)?;
    let n = x.len();
    let len = block_length.unwrap_or_else(|| default_block_length(n));
    if len < 2 {
        return Err(PmmError::InvalidArgument(format!(
            "block length {len} must be at least 2"
        )));
    }
    if n / len < 5 {
        return Err(PmmError::InvalidArgument(format!(
            "series of length {n} holds fewer than five blocks of length {len}"
        )));
    }
    let base = fit_ts(x, order, method)?;
    let order = base.order;
    let w_len = difference(x, order.d, order.seasonal_d, order.period)?.len();
    let resid = centered(base.effective_residuals());
    let a = base.params.ar_lags(order.period);
    let b = base.params.ma_lags(order.period);
    let mu = if order.include_mean { base.params.mean } else { 0.0 };
    let history = &x[..order.diff_degree()];

    let outcomes: Vec<Result<Vec<f64>>> = (0..opts.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(opts.seed, 1, r);
            let (e, _) = resample_blocks(&resid, len, w_len, &mut rng);
            let w = arma_filter(&a, &b, mu, &e);
            let series = if history.is_empty() {
                w
            } else {
                let mut s = history.to_vec();
                s.extend(integrate_forecast(
                    history,
                    &w,
                    order.d,
                    order.seasonal_d,
                    order.period,
                )?);
                s
            };
            Ok(fit_ts(&series, &order, method)?.coefficients())
        })
        .collect();
    summarize(
        BootstrapKind::Block,
        order.param_names(),
        &base.coefficients(),
        outcomes,
        opts,
        Some(len),
        base.warnings.clone(),
    )
}
