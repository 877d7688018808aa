#![allow(dead_code)]

pub mod props;

use pmm_core::cumulants::central_moments;
use statrs::distribution::{ContinuousCDF, Normal};

/// Standard normal scores `Phi^{-1}((i - 1/2) / n)`.
pub fn normal_scores(n: usize) -> Vec<f64> {
    let d = Normal::standard();
    (0..n)
        .map(|i| d.inverse_cdf((i as f64 + 0.5) / n as f64))
        .collect()
}

fn transform(z: &[f64], a: f64, b: f64) -> Vec<f64> {
    z.iter().map(|&v| v + a * (v * v - 1.0) + b * v * v * v).collect()
}

fn sample_shape(x: &[f64]) -> (f64, f64) {
    let m = central_moments(x).unwrap();
    (m.gamma3, m.gamma4)
}

/// Deterministic vector of length `n` whose sample skewness and excess
/// kurtosis (library convention) equal the targets to 1e-10, built as
/// `z + a (z^2 - 1) + b z^3` over normal scores. Entries are interleaved so
/// the vector has no monotone trend.
pub fn residuals_with_shape(n: usize, gamma3: f64, gamma4: f64) -> Vec<f64> {
    let z = normal_scores(n);
    let (mut a, mut b) = (gamma3 / 6.0, (gamma4 / 24.0).max(0.0));
    let resid = |a: f64, b: f64| {
        let (g3, g4) = sample_shape(&transform(&z, a, b));
        (g3 - gamma3, g4 - gamma4)
    };
    for _ in 0..200 {
        let (f1, f2) = resid(a, b);
        if f1.abs().max(f2.abs()) < 1e-12 {
            break;
        }
        let h = 1e-7;
        let (a1, a2) = resid(a + h, b);
        let (b1, b2) = resid(a, b + h);
        let (j11, j21) = ((a1 - f1) / h, (a2 - f2) / h);
        let (j12, j22) = ((b1 - f1) / h, (b2 - f2) / h);
        let det = j11 * j22 - j12 * j21;
        let da = (f1 * j22 - f2 * j12) / det;
        let db = (j11 * f2 - j21 * f1) / det;
        let norm = f1.abs().max(f2.abs());
        let mut t = 1.0;
        loop {
            let (g1, g2) = resid(a - t * da, b - t * db);
            if g1.abs().max(g2.abs()) < norm || t < 1e-6 {
                break;
            }
            t *= 0.5;
        }
        a -= t * da;
        b -= t * db;
    }
    let y = transform(&z, a, b);
    let (g3, g4) = sample_shape(&y);
    assert!(
        (g3 - gamma3).abs() < 1e-10 && (g4 - gamma4).abs() < 1e-10,
        "shape target ({gamma3}, {gamma4}) not reached: ({g3}, {g4})"
    );
    let (evens, odds): (Vec<_>, Vec<_>) = y.iter().enumerate().partition(|(i, _)| i % 2 == 0);
    evens
        .into_iter()
        .map(|(_, v)| *v)
        .chain(odds.into_iter().rev().map(|(_, v)| *v))
        .collect()
}
