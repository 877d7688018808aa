use rand::Rng;
use rand_distr::{Beta, ChiSquared, Distribution, Gamma, LogNormal, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::cumulants::CumulantProfile;
use crate::error::{PmmError, Result};

/// Innovation distribution with its natural parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Gaussian { sd: f64 },
    Gamma { shape: f64, rate: f64 },
    Lognormal { meanlog: f64, sdlog: f64 },
    #[serde(rename = "chisq")]
    ChiSq { df: f64 },
    Uniform { lower: f64, upper: f64 },
    Beta { alpha: f64, beta: f64 },
    Laplace { scale: f64 },
    /// Symmetric triangular on `[lower, upper]`.
    Triangular { lower: f64, upper: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnovationSpec {
    #[serde(flatten)]
    pub family: Family,
    /// Subtract the exact mean from every draw.
    #[serde(default = "default_true")]
    pub standardized: bool,
}

fn default_true() -> bool {
    true
}

impl InnovationSpec {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            standardized: true,
        }
    }

    pub fn gaussian() -> Self {
        Self::new(Family::Gaussian { sd: 1.0 })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self.family {
            Family::Gaussian { sd } => sd > 0.0,
            Family::Gamma { shape, rate } => shape > 0.0 && rate > 0.0,
            Family::Lognormal { meanlog, sdlog } => meanlog.is_finite() && sdlog > 0.0,
            Family::ChiSq { df } => df > 0.0,
            Family::Uniform { lower, upper } | Family::Triangular { lower, upper } => {
                lower.is_finite() && upper.is_finite() && lower < upper
            }
            Family::Beta { alpha, beta } => alpha > 0.0 && beta > 0.0,
            Family::Laplace { scale } => scale > 0.0,
        };
        let finite = self.family_params().iter().all(|v| v.is_finite());
        if ok && finite {
            Ok(())
        } else {
            Err(PmmError::InvalidArgument(format!(
                "invalid innovation parameters {:?}",
                self.family
            )))
        }
    }

    fn family_params(&self) -> Vec<f64> {
        match self.family {
            Family::Gaussian { sd } => vec![sd],
            Family::Gamma { shape, rate } => vec![shape, rate],
            Family::Lognormal { meanlog, sdlog } => vec![meanlog, sdlog],
            Family::ChiSq { df } => vec![df],
            Family::Uniform { lower, upper } | Family::Triangular { lower, upper } => {
                vec![lower, upper]
            }
            Family::Beta { alpha, beta } => vec![alpha, beta],
            Family::Laplace { scale } => vec![scale],
        }
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(
            self.family,
            Family::Gaussian { .. }
                | Family::Uniform { .. }
                | Family::Laplace { .. }
                | Family::Triangular { .. }
        )
    }

    /// Exact mean of the unstandardized family.
    pub fn mean(&self) -> f64 {
        exact_moments(&self.family).0
    }
}

/// Raw moments `E X^r`, `r = 1..=6`.
fn raw_moments(family: &Family) -> Option<[f64; 6]> {
    let mut out = [0.0; 6];
    match *family {
        Family::Gamma { shape, rate } => {
            let mut acc = 1.0;
            for (r, slot) in out.iter_mut().enumerate() {
                acc *= (shape + r as f64) / rate;
                *slot = acc;
            }
        }
        Family::ChiSq { df } => return raw_moments(&Family::Gamma { shape: df / 2.0, rate: 0.5 }),
        Family::Lognormal { meanlog, sdlog } => {
            for (r, slot) in out.iter_mut().enumerate() {
                let r = (r + 1) as f64;
                *slot = (r * meanlog + 0.5 * r * r * sdlog * sdlog).exp();
            }
        }
        Family::Beta { alpha, beta } => {
            let mut acc = 1.0;
            for (r, slot) in out.iter_mut().enumerate() {
                let r = r as f64;
                acc *= (alpha + r) / (alpha + beta + r);
                *slot = acc;
            }
        }
        _ => return None,
    }
    Some(out)
}

/// Mean and central moments `mu_2..=mu_6`.
fn exact_moments(family: &Family) -> (f64, [f64; 5]) {
    match *family {
        Family::Gaussian { sd } => {
            let v = sd * sd;
            (0.0, [v, 0.0, 3.0 * v * v, 0.0, 15.0 * v * v * v])
        }
        Family::Laplace { scale } => {
            let b2 = scale * scale;
            (0.0, [2.0 * b2, 0.0, 24.0 * b2 * b2, 0.0, 720.0 * b2 * b2 * b2])
        }
        Family::Uniform { lower, upper } => {
            // E (X - c)^{2k} = h^{2k} / (2k + 1)
            let h = 0.5 * (upper - lower);
            let c = 0.5 * (upper + lower);
            let h2 = h * h;
            (c, [h2 / 3.0, 0.0, h2 * h2 / 5.0, 0.0, h2 * h2 * h2 / 7.0])
        }
        Family::Triangular { lower, upper } => {
            // E (X - c)^{2k} = 2 h^{2k} / ((2k + 1)(2k + 2))
            let h = 0.5 * (upper - lower);
            let c = 0.5 * (upper + lower);
            let h2 = h * h;
            (
                c,
                [h2 / 6.0, 0.0, h2 * h2 / 15.0, 0.0, h2 * h2 * h2 / 28.0],
            )
        }
        _ => {
            let raw = raw_moments(family).expect("raw moments cover the remaining families");
            let m = raw[0];
            let ex = |r: usize| if r == 0 { 1.0 } else { raw[r - 1] };
            let mut central = [0.0; 5];
            for (slot, k) in central.iter_mut().zip(2..=6usize) {
                let mut binom = 1.0;
                let mut sum = 0.0;
                for j in 0..=k {
                    sum += binom * ex(j) * (-m).powi((k - j) as i32);
                    binom = binom * (k - j) as f64 / (j + 1) as f64;
                }
                *slot = sum;
            }
            (m, central)
        }
    }
}

/// Exact `gamma3`, `gamma4`, `gamma6` of a family and the efficiency
/// coefficients they imply. `g3` is reported for symmetric families only.
pub fn innovation_theory(spec: &InnovationSpec) -> Result<CumulantProfile> {
    spec.validate()?;
    let (_, [mu2, mu3, mu4, _, mu6]) = exact_moments(&spec.family);
    let gamma3 = if spec.is_symmetric() { 0.0 } else { mu3 / mu2.powf(1.5) };
    let gamma4 = mu4 / (mu2 * mu2) - 3.0;
    let gamma6 = mu6 / mu2.powi(3) - 15.0 * gamma4 - 10.0 * gamma3 * gamma3 - 15.0;
    CumulantProfile::new(gamma3, gamma4, Some(gamma6))
}

fn bad(e: impl std::fmt::Display) -> PmmError {
    PmmError::InvalidArgument(e.to_string())
}

pub fn sample_innovations<R: Rng + ?Sized>(
    spec: &InnovationSpec,
    n: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut draws: Vec<f64> = match spec.family {
        Family::Gaussian { sd } => {
            let d = Normal::new(0.0, sd).map_err(bad)?;
            d.sample_iter(&mut *rng).take(n).collect()
        }
        Family::Gamma { shape, rate } => {
            let d = Gamma::new(shape, 1.0 / rate).map_err(bad)?;
            d.sample_iter(&mut *rng).take(n).collect()
        }
        Family::Lognormal { meanlog, sdlog } => {
            let d = LogNormal::new(meanlog, sdlog).map_err(bad)?;
            d.sample_iter(&mut *rng).take(n).collect()
        }
        Family::ChiSq { df } => {
            let d = ChiSquared::new(df).map_err(bad)?;
            d.sample_iter(&mut *rng).take(n).collect()
        }
        Family::Uniform { lower, upper } => {
            let d = Uniform::new(lower, upper).map_err(bad)?;
            d.sample_iter(&mut *rng).take(n).collect()
        }
        Family::Beta { alpha, beta } => {
            let d = Beta::new(alpha, beta).map_err(bad)?;
            d.sample_iter(&mut *rng).take(n).collect()
        }
        Family::Laplace { scale } => {
            // Difference of two iid exponentials.
            (0..n)
                .map(|_| {
                    let u: f64 = 1.0 - rng.random::<f64>();
                    let v: f64 = 1.0 - rng.random::<f64>();
                    scale * (u.ln() - v.ln())
                })
                .collect()
        }
        Family::Triangular { lower, upper } => {
            // Mean of two iid uniforms.
            let d = Uniform::new(lower, upper).map_err(bad)?;
            (0..n)
                .map(|_| 0.5 * (d.sample(&mut *rng) + d.sample(&mut *rng)))
                .collect()
        }
    };
    if spec.standardized {
        let mean = spec.mean();
        draws.iter_mut().for_each(|v| *v -= mean);
    }
    Ok(draws)
}

/// Mean-zero gamma innovations with skewness `gamma3`; Gaussian at zero.
pub fn skewed_family(gamma3: f64) -> Result<InnovationSpec> {
    if !(gamma3.is_finite() && gamma3 >= 0.0) {
        return Err(PmmError::InvalidArgument(format!(
            "skewness {gamma3} must be finite and non-negative"
        )));
    }
    if gamma3 == 0.0 {
        return Ok(InnovationSpec::gaussian());
    }
    let shape = 4.0 / (gamma3 * gamma3);
    Ok(InnovationSpec::new(Family::Gamma {
        shape,
        rate: shape.sqrt(),
    }))
}
