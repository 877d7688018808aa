//! Cumulant-driven choice between the OLS/CSS baseline, PMM2 and PMM3.
//!
//! Rule order, first match wins:
//!
//! 1. `|gamma3| < symmetric_threshold` and `gamma4 < 0` selects PMM3;
//! 2. `|gamma3| >= skew_threshold` and `g2 < g2_ceiling` selects PMM2;
//! 3. otherwise the baseline.
//!
//! The PMM3 branch only covers the platykurtic regime even though `g3` can be
//! below one for leptokurtic symmetric errors, which makes the rule
//! conservative for Laplace-like residuals.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cumulants::{central_moments, g3_coefficient, MomentSet};
use crate::error::{PmmError, Result};
use crate::linmodel::{fit_ols, fit_pmm2, fit_pmm3, DesignProblem, RegressionFit};
use crate::tscore::{fit_css, ModelOrder, TsFit, TsMethod};
use crate::tspmm::fit_ts;

pub const MIN_DISPATCH_SAMPLE: usize = 8;

/// Largest AR order tried when no order is supplied for a series.
pub const MAX_SCAN_ORDER: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DispatchMethod {
    #[serde(rename = "OLS_CSS")]
    OlsCss,
    #[serde(rename = "PMM2")]
    Pmm2,
    #[serde(rename = "PMM3")]
    Pmm3,
}

impl fmt::Display for DispatchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::OlsCss => "OLS_CSS",
            Self::Pmm2 => "PMM2",
            Self::Pmm3 => "PMM3",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispatchConfig {
    pub skew_threshold: f64,
    pub g2_ceiling: f64,
    pub symmetric_threshold: f64,
}

impl Default for DispatchConfig {
    fn default() -> Self {
        Self {
            skew_threshold: 0.3,
            g2_ceiling: 0.95,
            symmetric_threshold: 0.1,
        }
    }
}

impl DispatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.symmetric_threshold > 0.0 && self.symmetric_threshold < self.skew_threshold) {
            return Err(PmmError::InvalidArgument(format!(
                "need 0 < symmetric_threshold ({}) < skew_threshold ({})",
                self.symmetric_threshold, self.skew_threshold
            )));
        }
        if !(self.g2_ceiling > 0.0 && self.g2_ceiling <= 1.0) {
            return Err(PmmError::InvalidArgument(format!(
                "g2_ceiling {} outside (0, 1]",
                self.g2_ceiling
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchDecision {
    pub method: DispatchMethod,
    pub n: usize,
    pub gamma3: f64,
    pub gamma4: f64,
    pub gamma6: f64,
    /// Clamped into `[0, 1]` when the sample cumulants violate the inequality.
    pub g2: f64,
    pub g3: Option<f64>,
    pub rationale: String,
    pub thresholds: DispatchConfig,
}

impl DispatchDecision {
    /// Three-line verbose summary: cumulants, efficiency coefficients and the
    /// rationale.
    pub fn transcript(&self) -> String {
        let g3 = self
            .g3
            .map_or_else(|| "n/a".to_string(), |g| format!("{g:.3}"));
        format!(
            "n = {} | gamma3 = {:+.3} | gamma4 = {:+.3}\n  g2(PMM2) = {:.3}  |  g3(PMM3) = {}\n  >>> {}",
            self.n, self.gamma3, self.gamma4, self.g2, g3, self.rationale
        )
    }
}

fn clamped_g2(gamma3: f64, gamma4: f64) -> f64 {
    let denom = gamma4 + 2.0;
    if denom > 0.0 {
        (1.0 - gamma3 * gamma3 / denom).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Applies the rule to precomputed moments.
pub fn decide(moments: &MomentSet, config: &DispatchConfig) -> Result<DispatchDecision> {
    config.validate()?;
    let (gamma3, gamma4, gamma6) = moments.standardized().ok_or_else(|| {
        PmmError::DegenerateMoments("residuals have zero variance".into())
    })?;
    let g2 = clamped_g2(gamma3, gamma4);
    let g3 = g3_coefficient(gamma4, gamma6).ok();
    let abs3 = gamma3.abs();

    let (method, rationale) = if abs3 < config.symmetric_threshold && gamma4 < 0.0 {
        let gain = g3.map_or_else(
            || "g3 unavailable".to_string(),
            |g| format!("{:.1}% variance reduction", 100.0 * (1.0 - g)),
        );
        (
            DispatchMethod::Pmm3,
            format!(
                "|gamma3| = {abs3:.3} < {} and gamma4 = {gamma4:.3} < 0: symmetric platykurtic residuals, PMM3 worthwhile ({gain}). Use PMM3.",
                config.symmetric_threshold
            ),
        )
    } else if abs3 >= config.skew_threshold && g2 < config.g2_ceiling {
        (
            DispatchMethod::Pmm2,
            format!(
                "|gamma3| = {abs3:.3} > {} and g2 = {g2:.3} < {}: moderate asymmetry, PMM2 worthwhile ({:.1}% variance reduction). Use PMM2.",
                config.skew_threshold,
                config.g2_ceiling,
                100.0 * (1.0 - g2)
            ),
        )
    } else if abs3 >= config.skew_threshold {
        (
            DispatchMethod::OlsCss,
            format!(
                "|gamma3| = {abs3:.3} but g2 = {g2:.3} >= {}: asymmetry too weak relative to kurtosis. Use OLS.",
                config.g2_ceiling
            ),
        )
    } else {
        (
            DispatchMethod::OlsCss,
            format!(
                "gamma3 = {gamma3:.3}, gamma4 = {gamma4:.3}: near-Gaussian residuals. No PMM advantage expected. Use OLS."
            ),
        )
    };
    Ok(DispatchDecision {
        method,
        n: moments.n,
        gamma3,
        gamma4,
        gamma6,
        g2,
        g3,
        rationale,
        thresholds: *config,
    })
}

pub fn select_method(residuals: &[f64], config: &DispatchConfig) -> Result<DispatchDecision> {
    if residuals.len() < MIN_DISPATCH_SAMPLE {
        return Err(PmmError::InputTooShort {
            needed: MIN_DISPATCH_SAMPLE,
            got: residuals.len(),
        });
    }
    decide(&central_moments(residuals)?, config)
}

/// What to dispatch on.
#[derive(Debug, Clone, Copy)]
pub enum DispatchInput<'a> {
    Regression(&'a DesignProblem),
    /// With `order = None` the AR order in `1..=MAX_SCAN_ORDER` with the
    /// smallest CSS AIC is used.
    TimeSeries {
        series: &'a [f64],
        order: Option<ModelOrder>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FitOutcome {
    Regression(RegressionFit),
    TimeSeries(TsFit),
}

impl FitOutcome {
    pub fn coefficients(&self) -> Vec<f64> {
        match self {
            Self::Regression(f) => f.coefficients.clone(),
            Self::TimeSeries(f) => f.coefficients(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchOutcome {
    pub decision: DispatchDecision,
    pub fit: FitOutcome,
}

/// Smallest-AIC CSS autoregression of order `1..=MAX_SCAN_ORDER`.
pub fn scan_ar_order(series: &[f64]) -> Result<TsFit> {
    let mut best: Option<(f64, TsFit)> = None;
    let mut last_err = None;
    for p in 1..=MAX_SCAN_ORDER {
        match fit_css(series, &ModelOrder::new(p, 0, 0)) {
            Ok(fit) => {
                let aic = fit.information_criteria().aic;
                if best.as_ref().is_none_or(|(b, _)| aic < *b) {
                    best = Some((aic, fit));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match (best, last_err) {
        (Some((_, fit)), _) => Ok(fit),
        (None, Some(e)) => Err(e),
        (None, None) => unreachable!("at least one order is tried"),
    }
}

/// Fits the baseline, applies the rule to its residuals and refits with the
/// selected method.
pub fn dispatch_fit(input: DispatchInput<'_>, config: &DispatchConfig) -> Result<DispatchOutcome> {
    config.validate()?;
    match input {
        DispatchInput::Regression(problem) => {
            let ols = fit_ols(problem)?;
            let decision = select_method(&ols.residuals, config)?;
            let fit = match decision.method {
                DispatchMethod::OlsCss => ols,
                DispatchMethod::Pmm2 => fit_pmm2(problem)?,
                DispatchMethod::Pmm3 => fit_pmm3(problem)?,
            };
            Ok(DispatchOutcome {
                decision,
                fit: FitOutcome::Regression(fit),
            })
        }
        DispatchInput::TimeSeries { series, order } => {
            let css = match order {
                Some(o) => fit_css(series, &o)?,
                None => scan_ar_order(series)?,
            };
            let decision = select_method(css.effective_residuals(), config)?;
            let fit = match decision.method {
                DispatchMethod::OlsCss => css,
                DispatchMethod::Pmm2 => fit_ts(series, &css.order, TsMethod::Pmm2)?,
                DispatchMethod::Pmm3 => fit_ts(series, &css.order, TsMethod::Pmm3)?,
            };
            Ok(DispatchOutcome {
                decision,
                fit: FitOutcome::TimeSeries(fit),
            })
        }
    }
}
