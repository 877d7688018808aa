//! Sample moments, standardized cumulants and the closed-form PMM efficiency
//! coefficients and score weights.
//!
//! Conventions: `m2` is the variance, `m3`, `m4`, `m6` are central moments.
//! The standardized cumulants are
//!
//! * `gamma3 = m3 / m2^{3/2}` (skewness)
//! * `gamma4 = m4 / m2^2 - 3` (excess kurtosis)
//! * `gamma6 = m6 / m2^3 - 15 gamma4 - 10 gamma3^2 - 15`

use serde::{Deserialize, Serialize};

use crate::error::{PmmError, Result};

/// Smallest sample accepted by [`central_moments`].
pub const MIN_MOMENT_SAMPLE: usize = 4;

/// Denominators used when estimating central moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MomentConvention {
    /// `n - 1` for the variance, `n` for the higher moments.
    #[default]
    Mixed,
    /// `n` everywhere (pure plug-in moments).
    Population,
}

/// Sample central moments of a vector and the standardized cumulants built
/// from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub n: usize,
    pub mean: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub m6: f64,
    /// NaN when the input is constant; see [`MomentSet::is_degenerate`].
    pub gamma3: f64,
    pub gamma4: f64,
    pub gamma6: f64,
}

impl MomentSet {
    /// True when the variance is zero and the standardized cumulants are undefined.
    pub fn is_degenerate(&self) -> bool {
        !(self.m2 > 0.0)
    }

    /// `(gamma3, gamma4, gamma6)` or `None` for a degenerate sample.
    pub fn standardized(&self) -> Option<(f64, f64, f64)> {
        if self.is_degenerate() {
            None
        } else {
            Some((self.gamma3, self.gamma4, self.gamma6))
        }
    }

    pub fn g2(&self) -> Result<f64> {
        let (g3, g4, _) = self.standardized().ok_or_else(|| {
            PmmError::DegenerateMoments("zero variance, skewness undefined".into())
        })?;
        g2_coefficient(g3, g4)
    }

    pub fn g3(&self) -> Result<f64> {
        let (_, g4, g6) = self.standardized().ok_or_else(|| {
            PmmError::DegenerateMoments("zero variance, kurtosis undefined".into())
        })?;
        g3_coefficient(g4, g6)
    }
}

/// Central moments with the default [`MomentConvention::Mixed`] denominators.
pub fn central_moments(x: &[f64]) -> Result<MomentSet> {
    central_moments_with(x, MomentConvention::Mixed)
}

pub fn central_moments_with(x: &[f64], convention: MomentConvention) -> Result<MomentSet> {
    let n = x.len();
    if n < MIN_MOMENT_SAMPLE {
        return Err(PmmError::InputTooShort {
            needed: MIN_MOMENT_SAMPLE,
            got: n,
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(PmmError::InvalidArgument("non-finite value in sample".into()));
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let (mut s2, mut s3, mut s4, mut s6) = (0.0, 0.0, 0.0, 0.0);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        s2 += d2;
        s3 += d2 * d;
        s4 += d2 * d2;
        s6 += d2 * d2 * d2;
    }
    let m2 = match convention {
        MomentConvention::Mixed => s2 / (nf - 1.0),
        MomentConvention::Population => s2 / nf,
    };
    let (m3, m4, m6) = (s3 / nf, s4 / nf, s6 / nf);

    // A constant vector can leave rounding noise of order eps * |mean|.
    let scale = mean.abs().max(f64::MIN_POSITIVE);
    let degenerate = m2 <= (f64::EPSILON * scale).powi(2) * 16.0;
    if degenerate {
        return Ok(MomentSet {
            n,
            mean,
            m2: 0.0,
            m3: 0.0,
            m4: 0.0,
            m6: 0.0,
            gamma3: f64::NAN,
            gamma4: f64::NAN,
            gamma6: f64::NAN,
        });
    }
    let gamma3 = m3 / m2.powf(1.5);
    let gamma4 = m4 / (m2 * m2) - 3.0;
    let gamma6 = m6 / (m2 * m2 * m2) - 15.0 * gamma4 - 10.0 * gamma3 * gamma3 - 15.0;
    Ok(MomentSet {
        n,
        mean,
        m2,
        m3,
        m4,
        m6,
        gamma3,
        gamma4,
        gamma6,
    })
}

/// PMM2 efficiency coefficient `1 - gamma3^2 / (gamma4 + 2)`.
///
/// Never clamps: inputs that violate the cumulant inequality
/// `gamma3^2 <= gamma4 + 2` are reported as errors.
pub fn g2_coefficient(gamma3: f64, gamma4: f64) -> Result<f64> {
    if !gamma3.is_finite() || !gamma4.is_finite() {
        return Err(PmmError::InadmissibleCumulants(format!(
            "non-finite cumulants gamma3={gamma3}, gamma4={gamma4}"
        )));
    }
    let denom = gamma4 + 2.0;
    if denom <= 0.0 {
        return Err(PmmError::InadmissibleCumulants(format!(
            "gamma4 + 2 = {denom} is not positive"
        )));
    }
    let ratio = gamma3 * gamma3 / denom;
    if ratio > 1.0 {
        return Err(PmmError::InadmissibleCumulants(format!(
            "gamma3^2 = {} exceeds gamma4 + 2 = {denom}",
            gamma3 * gamma3
        )));
    }
    Ok(1.0 - ratio)
}

/// Symmetric PMM3 efficiency coefficient `1 - gamma4^2 / (6 + 9 gamma4 + gamma6)`.
pub fn g3_coefficient(gamma4: f64, gamma6: f64) -> Result<f64> {
    if !gamma4.is_finite() || !gamma6.is_finite() {
        return Err(PmmError::InadmissibleCumulants(format!(
            "non-finite cumulants gamma4={gamma4}, gamma6={gamma6}"
        )));
    }
    if gamma4 < -2.0 {
        return Err(PmmError::InadmissibleCumulants(format!(
            "gamma4 = {gamma4} is below -2"
        )));
    }
    let denom = 6.0 + 9.0 * gamma4 + gamma6;
    if denom <= 0.0 || gamma4 * gamma4 > denom {
        return Err(PmmError::InadmissibleCumulants(format!(
            "6 + 9 gamma4 + gamma6 = {denom} violates the bound gamma4^2 = {}",
            gamma4 * gamma4
        )));
    }
    Ok(1.0 - gamma4 * gamma4 / denom)
}

/// Weight `c` of the quadratic correction in the PMM2 score
/// `psi(e) = e + c (e^2 - m2)`.
///
/// `c = -m3 / (m4 - m2^2)` minimizes `Var(psi)`, giving `Var(psi) = m2 * g2`.
pub fn pmm2_weight(m2: f64, m3: f64, m4: f64) -> Result<f64> {
    let spread = m4 - m2 * m2;
    if !(spread > 0.0) || !spread.is_finite() {
        return Err(PmmError::DegenerateDistribution(spread));
    }
    Ok(-m3 / spread)
}

/// Coefficients of the symmetric PMM3 score `psi(e) = b1 e + b3 e^3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pmm3Weights {
    pub b1: f64,
    pub b3: f64,
    /// `E[psi'] = b1 + 3 b3 m2`, positive for a valid solution.
    pub slope: f64,
}

impl Pmm3Weights {
    pub fn score(&self, e: f64) -> f64 {
        e * (self.b1 + self.b3 * e * e)
    }

    /// Asymptotic variance of the estimating equation, `1 / slope`.
    pub fn implied_variance(&self) -> f64 {
        1.0 / self.slope
    }
}

/// Solves `[[m2, m4], [m4, m6]] b = (1, 3 m2)` for the PMM3 weights.
pub fn pmm3_weights(m2: f64, m4: f64, m6: f64) -> Result<Pmm3Weights> {
    let det = m2 * m6 - m4 * m4;
    if !(m2 > 0.0) || !det.is_finite() || det <= 1e-14 * (m2 * m6).abs() {
        return Err(PmmError::DegenerateMoments(format!(
            "moment matrix [[{m2}, {m4}], [{m4}, {m6}]] is not positive definite"
        )));
    }
    let h3 = 3.0 * m2;
    let b1 = (m6 - m4 * h3) / det;
    let b3 = (m2 * h3 - m4) / det;
    let slope = b1 + h3 * b3;
    if !(slope > 0.0) {
        return Err(PmmError::DegenerateMoments(format!(
            "PMM3 score slope {slope} is not positive"
        )));
    }
    Ok(Pmm3Weights { b1, b3, slope })
}

/// Standardized cumulants of a distribution with the efficiency coefficients
/// they imply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulantProfile {
    pub gamma3: f64,
    pub gamma4: f64,
    pub gamma6: Option<f64>,
    pub g2: f64,
    pub g3: Option<f64>,
}

impl CumulantProfile {
    /// `g3` is only filled in for symmetric profiles with an admissible `gamma6`.
    pub fn new(gamma3: f64, gamma4: f64, gamma6: Option<f64>) -> Result<Self> {
        let g2 = g2_coefficient(gamma3, gamma4)?;
        let g3 = gamma6
            .filter(|_| gamma3 == 0.0)
            .and_then(|g6| g3_coefficient(gamma4, g6).ok());
        Ok(Self {
            gamma3,
            gamma4,
            gamma6,
            g2,
            g3,
        })
    }
}
