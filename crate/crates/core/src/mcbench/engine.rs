use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::innovations::{innovation_theory, sample_innovations, InnovationSpec};
use crate::error::{PmmError, Result};
use crate::linmodel::{
    covariance_unchecked, fit_regression, normal_quantile, DesignProblem, RegressionMethod,
};
use crate::rng::substream;
use crate::tscore::{simulate_arima, ts_covariance, ModelOrder, TsFit, TsMethod, TsParams};
use crate::tspmm::fit_ts;

/// Smallest accepted number of replicates per specification.
pub const MIN_SIMULATIONS: usize = 50;

/// Warm-up length discarded before the retained series.
pub const BURN_IN: usize = 100;

/// Nominal level of the coverage intervals.
pub const COVERAGE_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ar,
    Ma,
    Arma,
    Arima,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum McMethod {
    Ols,
    Css,
    Pmm2,
    Pmm3,
    /// Alias of `Css`; exact likelihood is not implemented.
    Ml,
}

impl McMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Ols => "ols",
            Self::Css => "css",
            Self::Pmm2 => "pmm2",
            Self::Pmm3 => "pmm3",
            Self::Ml => "ml",
        }
    }

    fn is_baseline(&self) -> bool {
        matches!(self, Self::Ols | Self::Css | Self::Ml)
    }
}

impl fmt::Display for McMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for McMethod {
    type Err = PmmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ols" => Ok(Self::Ols),
            "css" => Ok(Self::Css),
            "pmm2" => Ok(Self::Pmm2),
            "pmm3" => Ok(Self::Pmm3),
            "ml" => Ok(Self::Ml),
            other => Err(PmmError::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

/// One simulation design.
///
/// For regressions `theta` is the coefficient vector, intercept first; the
/// remaining columns are standard normal regressors redrawn every replicate.
/// For time series `theta` holds the packed ARMA coefficients without the
/// mean; when the order includes a mean its true value is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSpec {
    pub label: String,
    pub model: ModelKind,
    #[serde(default)]
    pub order: Option<ModelOrder>,
    pub theta: Vec<f64>,
    pub innovations: InnovationSpec,
    pub n: usize,
}

impl McSpec {
    pub fn regression(label: &str, beta: Vec<f64>, innovations: InnovationSpec, n: usize) -> Self {
        Self {
            label: label.to_string(),
            model: ModelKind::Regression,
            order: None,
            theta: beta,
            innovations,
            n,
        }
    }

    pub fn time_series(
        label: &str,
        order: ModelOrder,
        theta: Vec<f64>,
        innovations: InnovationSpec,
        n: usize,
    ) -> Self {
        let no_diff = order.diff_degree() == 0;
        let model = match (order.ar_degree() > 0, order.ma_degree() > 0) {
            _ if !no_diff => ModelKind::Arima,
            (true, false) => ModelKind::Ar,
            (false, true) => ModelKind::Ma,
            _ => ModelKind::Arma,
        };
        Self {
            label: label.to_string(),
            model,
            order: Some(order),
            theta,
            innovations,
            n,
        }
    }

    pub fn baseline(&self) -> McMethod {
        if self.model == ModelKind::Regression {
            McMethod::Ols
        } else {
            McMethod::Css
        }
    }

    /// Validated order (time series) and the full true parameter vector.
    fn prepare(&self) -> Result<(Option<ModelOrder>, Vec<f64>)> {
        self.innovations.validate()?;
        if self.theta.iter().any(|v| !v.is_finite()) {
            return Err(PmmError::InvalidArgument("non-finite true parameters".into()));
        }
        if self.model == ModelKind::Regression {
            if self.order.is_some() {
                return Err(PmmError::InvalidArgument(
                    "regression specifications take no ARIMA order".into(),
                ));
            }
            if self.theta.is_empty() || self.n < self.theta.len() + 6 {
                return Err(PmmError::InvalidArgument(format!(
                    "regression '{}' needs at least one coefficient and n >= k + 6",
                    self.label
                )));
            }
            return Ok((None, self.theta.clone()));
        }
        let order = self
            .order
            .ok_or_else(|| PmmError::InvalidOrder(format!("'{}' has no order", self.label)))?
            .validated()?;
        let stationary = order.diff_degree() == 0;
        let shape_ok = match self.model {
            ModelKind::Ar => stationary && order.ma_degree() == 0 && order.ar_degree() > 0,
            ModelKind::Ma => stationary && order.ar_degree() == 0 && order.ma_degree() > 0,
            ModelKind::Arma => stationary,
            ModelKind::Arima | ModelKind::Regression => true,
        };
        if !shape_ok {
            return Err(PmmError::InvalidOrder(format!(
                "order of '{}' does not match model kind {:?}",
                self.label, self.model
            )));
        }
        let mut truth = self.theta.clone();
        if order.include_mean {
            truth.push(0.0);
        }
        if truth.len() != order.n_params() {
            return Err(PmmError::LengthMismatch {
                expected: order.n_params() - usize::from(order.include_mean),
                got: self.theta.len(),
            });
        }
        TsParams::unpack(&truth, &order).check(&order)?;
        if self.n < order.min_length() {
            return Err(PmmError::InputTooShort {
                needed: order.min_length(),
                got: self.n,
            });
        }
        Ok((Some(order), truth))
    }

    /// Index of the parameter used for single-number summaries: the first
    /// slope for regressions, the first ARMA coefficient otherwise.
    pub fn leading_parameter(&self) -> usize {
        usize::from(self.model == ModelKind::Regression && self.theta.len() > 1)
    }

    fn parameter_names(&self, order: Option<&ModelOrder>) -> Vec<String> {
        match order {
            Some(o) => o.param_names(),
            None => std::iter::once("(Intercept)".to_string())
                .chain((1..self.theta.len()).map(|j| format!("x{j}")))
                .collect(),
        }
    }
}

/// Estimates of one method on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub label: String,
    pub replicate: usize,
    pub method: McMethod,
    pub estimates: Vec<f64>,
    pub covered: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub method: McMethod,
    pub parameter: String,
    pub true_value: f64,
    pub mean: f64,
    pub bias: f64,
    /// Population variance over replicates.
    pub variance: f64,
    pub mse: f64,
    pub coverage: f64,
    /// `mse / mse` of the baseline for the same parameter.
    pub gain: f64,
    /// g2 for PMM2, g3 for PMM3, 1 for the baseline; `None` when undefined.
    pub g_theory: Option<f64>,
    pub n_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McOutput {
    pub records: Vec<ReplicateRecord>,
    pub summary: Vec<SummaryRow>,
    pub warnings: Vec<String>,
}

impl McOutput {
    pub fn row(&self, label: &str, method: McMethod, parameter: usize) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .filter(|r| r.label == label && r.method == method)
            .nth(parameter)
    }
}

/// Baseline first, duplicates removed, `ml` folded into `css`.
fn method_list(spec: &McSpec, methods: &[McMethod], warnings: &mut Vec<String>) -> Result<Vec<McMethod>> {
    let regression = spec.model == ModelKind::Regression;
    let mut out = vec![spec.baseline()];
    for &m in methods {
        let m = match m {
            McMethod::Ml => {
                let msg = "method 'ml' is an alias of 'css'".to_string();
                if !warnings.contains(&msg) {
                    warnings.push(msg);
                }
                McMethod::Css
            }
            McMethod::Ols if !regression => {
                return Err(PmmError::InvalidArgument(format!(
                    "method 'ols' does not apply to time-series spec '{}'",
                    spec.label
                )))
            }
            McMethod::Css if regression => {
                return Err(PmmError::InvalidArgument(format!(
                    "method 'css' does not apply to regression spec '{}'",
                    spec.label
                )))
            }
            m => m,
        };
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

struct Draw {
    estimates: Vec<f64>,
    covered: Vec<bool>,
}

fn covered(estimates: &[f64], cov: Option<DMatrix<f64>>, truth: &[f64], z: f64) -> Vec<bool> {
    estimates
        .iter()
        .zip(truth)
        .enumerate()
        .map(|(j, (b, t))| match &cov {
            Some(c) => {
                let half = z * c[(j, j)].max(0.0).sqrt();
                (b - t).abs() <= half
            }
            None => false,
        })
        .collect()
}

fn regression_replicate<R: Rng>(
    spec: &McSpec,
    methods: &[McMethod],
    rng: &mut R,
    z: f64,
) -> Result<Vec<Draw>> {
    let n = spec.n;
    let k = spec.theta.len();
    let x = DMatrix::from_fn(n, k, |_, j| {
        if j == 0 {
            1.0
        } else {
            rng.sample::<f64, _>(StandardNormal)
        }
    });
    let eps = sample_innovations(&spec.innovations, n, rng)?;
    let y = &x * DVector::from_column_slice(&spec.theta) + DVector::from_vec(eps);
    let names = spec.parameter_names(None);
    let problem = DesignProblem::new(x, y, names)?;
    methods
        .iter()
        .map(|m| {
            let method = match m {
                McMethod::Pmm2 => RegressionMethod::Pmm2,
                McMethod::Pmm3 => RegressionMethod::Pmm3,
                _ => RegressionMethod::Ols,
            };
            let fit = fit_regression(&problem, method)?;
            let cov = covariance_unchecked(&fit, &problem).ok();
            Ok(Draw {
                covered: covered(&fit.coefficients, cov, &spec.theta, z),
                estimates: fit.coefficients,
            })
        })
        .collect()
}

fn fit_ts_method(series: &[f64], order: &ModelOrder, method: McMethod) -> Result<TsFit> {
    match method {
        McMethod::Pmm2 => fit_ts(series, order, TsMethod::Pmm2),
        McMethod::Pmm3 => fit_ts(series, order, TsMethod::Pmm3),
        _ => fit_ts(series, order, TsMethod::Css),
    }
}

fn ts_replicate<R: Rng>(
    spec: &McSpec,
    order: &ModelOrder,
    truth: &[f64],
    methods: &[McMethod],
    rng: &mut R,
    z: f64,
) -> Result<Vec<Draw>> {
    let eps = sample_innovations(&spec.innovations, spec.n + BURN_IN, rng)?;
    let params = TsParams::unpack(truth, order);
    let series = simulate_arima(order, &params, &eps, BURN_IN)?;
    methods
        .iter()
        .map(|&m| {
            let fit = fit_ts_method(&series, order, m)?;
            let estimates = fit.coefficients();
            let cov = ts_covariance(&fit).ok();
            Ok(Draw {
                covered: covered(&estimates, cov, truth, z),
                estimates,
            })
        })
        .collect()
}

/// Runs every replicate of one specification. Returns the kept draws (one
/// entry per successful replicate, indexed like `methods`) and the number of
/// dropped replicates.
fn simulate_spec(
    spec: &McSpec,
    key: u64,
    methods: &[McMethod],
    n_sim: usize,
    seed: u64,
) -> Result<(Vec<(usize, Vec<Draw>)>, usize)> {
    let (order, truth) = spec.prepare()?;
    let z = normal_quantile(COVERAGE_LEVEL)?;
    let outcomes: Vec<Result<Vec<Draw>>> = (0..n_sim as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, key, r);
            match &order {
                None => regression_replicate(spec, methods, &mut rng, z),
                Some(o) => ts_replicate(spec, o, &truth, methods, &mut rng, z),
            }
        })
        .collect();
    let mut kept = Vec::with_capacity(n_sim);
    let mut dropped = 0;
    for (r, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(d) => kept.push((r, d)),
            Err(_) => dropped += 1,
        }
    }
    if dropped as f64 > 0.1 * n_sim as f64 {
        return Err(PmmError::TooManyFailures {
            failed: dropped,
            total: n_sim,
        });
    }
    Ok((kept, dropped))
}

fn g_theory(spec: &McSpec, method: McMethod) -> Option<f64> {
    if method.is_baseline() {
        return Some(1.0);
    }
    let profile = innovation_theory(&spec.innovations).ok()?;
    match method {
        McMethod::Pmm2 => Some(profile.g2),
        McMethod::Pmm3 => profile.g3,
        _ => Some(1.0),
    }
}

fn summarize_spec(
    spec: &McSpec,
    methods: &[McMethod],
    truth: &[f64],
    names: &[String],
    kept: &[(usize, Vec<Draw>)],
) -> Vec<SummaryRow> {
    let used = kept.len();
    let r = used as f64;
    let mut rows = Vec::new();
    let mut baseline_mse = vec![0.0; truth.len()];
    for (mi, &method) in methods.iter().enumerate() {
        let g = g_theory(spec, method);
        for (j, name) in names.iter().enumerate() {
            let t = truth[j];
            let mean = kept.iter().map(|(_, d)| d[mi].estimates[j]).sum::<f64>() / r;
            let variance = kept
                .iter()
                .map(|(_, d)| (d[mi].estimates[j] - mean).powi(2))
                .sum::<f64>()
                / r;
            let mse = kept
                .iter()
                .map(|(_, d)| (d[mi].estimates[j] - t).powi(2))
                .sum::<f64>()
                / r;
            let coverage =
                kept.iter().filter(|(_, d)| d[mi].covered[j]).count() as f64 / r;
            if mi == 0 {
                baseline_mse[j] = mse;
            }
            let gain = if mi == 0 || baseline_mse[j] == 0.0 {
                1.0
            } else {
                mse / baseline_mse[j]
            };
            rows.push(SummaryRow {
                label: spec.label.clone(),
                method,
                parameter: name.clone(),
                true_value: t,
                mean,
                bias: mean - t,
                variance,
                mse,
                coverage,
                gain,
                g_theory: g,
                n_used: used,
            });
        }
    }
    rows
}

/// Simulates `n_sim` data sets per specification and fits every method plus
/// the baseline (OLS for regressions, CSS for time series).
///
/// A replicate is dropped when any of its fits fails; more than 10% dropped
/// replicates fail the whole run. Results depend only on the inputs, not on
/// the thread schedule.
pub fn run_monte_carlo(
    specs: &[McSpec],
    methods: &[McMethod],
    n_sim: usize,
    seed: u64,
) -> Result<McOutput> {
    if n_sim < MIN_SIMULATIONS {
        return Err(PmmError::InvalidArgument(format!(
            "n_sim = {n_sim} is below the minimum of {MIN_SIMULATIONS}"
        )));
    }
    let mut warnings = Vec::new();
    let mut records = Vec::new();
    let mut summary = Vec::new();
    for (si, spec) in specs.iter().enumerate() {
        let list = method_list(spec, methods, &mut warnings)?;
        let (order, truth) = spec.prepare()?;
        let names = spec.parameter_names(order.as_ref());
        let (kept, dropped) = simulate_spec(spec, si as u64 + 16, &list, n_sim, seed)?;
        if dropped > 0 {
            warnings.push(format!(
                "'{}': {dropped} of {n_sim} replicates dropped after fit failures",
                spec.label
            ));
        }
        summary.extend(summarize_spec(spec, &list, &truth, &names, &kept));
        for (r, draws) in kept {
            for (m, d) in list.iter().zip(draws) {
                records.push(ReplicateRecord {
                    label: spec.label.clone(),
                    replicate: r,
                    method: *m,
                    estimates: d.estimates,
                    covered: d.covered,
                });
            }
        }
    }
    Ok(McOutput {
        records,
        summary,
        warnings,
    })
}

/// MSE ratio of `method` against the baseline for the leading parameter of
/// a single specification, without keeping replicate records.
pub(crate) fn leading_gain(
    spec: &McSpec,
    key: u64,
    method: McMethod,
    n_sim: usize,
    seed: u64,
) -> Result<f64> {
    let mut warnings = Vec::new();
    let list = method_list(spec, &[method], &mut warnings)?;
    let (order, truth) = spec.prepare()?;
    let names = spec.parameter_names(order.as_ref());
    let (kept, _) = simulate_spec(spec, key, &list, n_sim, seed)?;
    let rows = summarize_spec(spec, &list, &truth, &names, &kept);
    let j = spec.leading_parameter();
    let mi = list.iter().position(|m| *m == method).unwrap_or(0);
    Ok(rows[mi * names.len() + j].gain)
}
