//! Property checks shared by the proptest suites and the acceptance runner.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::Rng;
use rand_distr::StandardNormal;

use pmm_core::cumulants::{central_moments, pmm2_weight};
use pmm_core::dispatch::{select_method, DispatchConfig, DispatchMethod};
use pmm_core::inference::{residual_bootstrap, BootstrapOptions};
use pmm_core::linmodel::{fit_ols, fit_pmm2, DesignProblem, IterationControl, RegressionMethod};
use pmm_core::mcbench::{
    run_monte_carlo, sample_innovations, Family, InnovationSpec, McMethod, McSpec,
};
use pmm_core::rng::substream;
use pmm_core::tscore::{
    css_residuals, difference, fit_css, integrate_forecast, simulate_arima, ModelOrder, TsParams,
};
use pmm_core::tspmm::{fit_ts_pmm2, pmm2_potential};

pub type Check = Result<(), TestCaseError>;

pub fn gamma_errors() -> InnovationSpec {
    InnovationSpec::new(Family::Gamma {
        shape: 2.0,
        rate: 1.0,
    })
}

/// Intercept plus `k - 1` standard normal columns, gamma(2, 1) errors.
pub fn skewed_problem(n: usize, k: usize, seed: u64) -> DesignProblem {
    let mut rng = substream(seed, 7, 0);
    let x = DMatrix::from_fn(n, k, |_, j| {
        if j == 0 {
            1.0
        } else {
            rng.sample::<f64, _>(StandardNormal)
        }
    });
    let e = sample_innovations(&gamma_errors(), n, &mut rng).unwrap();
    let beta = DVector::from_fn(k, |j, _| 1.0 + j as f64);
    let y = &x * beta + DVector::from_vec(e);
    let names = (0..k).map(|j| format!("b{j}")).collect();
    DesignProblem::new(x, y, names).unwrap()
}

/// At a converged PMM2 fit the score is bounded by the step rule.
pub fn fixed_point_bound(n: usize, k: usize, seed: u64) -> Check {
    let problem = skewed_problem(n, k, seed);
    let fit = fit_pmm2(&problem).unwrap();
    prop_assume!(fit.converged);
    let e = DVector::from_vec(fit.residuals.clone());
    let m = central_moments(e.as_slice()).unwrap();
    let c = pmm2_weight(m.m2, m.m3, m.m4).unwrap_or(0.0);
    let psi = e.map(|v| v + c * (v * v - m.m2));
    let score = problem.x().transpose() * psi;
    let xtx = problem.x().transpose() * problem.x();
    let xtx_norm = xtx
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let bound = n as f64 * IterationControl::default().tol * xtx_norm;
    prop_assert!(score.amax() < bound, "score {} >= bound {}", score.amax(), bound);
    Ok(())
}

/// Design and residual pattern in sign quadruples, so the OLS residuals
/// have zero third moment.
pub fn ols_equivalence(values: &[(i32, i32)], beta0: i32, beta1: i32) -> Check {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(x, r) in values {
        for (sx, sr) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
            let xv = f64::from(sx * x);
            xs.push(xv);
            ys.push(f64::from(beta0) + f64::from(beta1) * xv + f64::from(sr * r));
        }
    }
    let problem =
        DesignProblem::from_columns(&[xs], &["x".to_string()], ys, true).unwrap();
    let ols = fit_ols(&problem).unwrap();
    let pmm = fit_pmm2(&problem).unwrap();
    prop_assert_eq!(pmm.iterations, 1);
    for (a, b) in ols.coefficients.iter().zip(&pmm.coefficients) {
        prop_assert!((a - b).abs() < 1e-12, "{} vs {}", a, b);
    }
    Ok(())
}

pub fn simulated_series(order: &ModelOrder, params: &TsParams, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, 8, 0);
    let e = sample_innovations(&gamma_errors(), n + 50, &mut rng).unwrap();
    simulate_arima(order, params, &e, 50).unwrap()
}

/// Potential at the PMM2 solution never exceeds the potential at the CSS
/// start, with cumulants frozen at the CSS residuals.
pub fn objective_dominance(theta: f64, phi: f64, n: usize, seed: u64) -> Check {
    let order = ModelOrder::new(usize::from(phi != 0.0), 0, 1);
    let params = TsParams {
        phi: if phi != 0.0 { vec![phi] } else { vec![] },
        theta: vec![theta],
        ..TsParams::zeros(&order)
    };
    let x = simulated_series(&order, &params, n, seed);
    let css = fit_css(&x, &order).unwrap();
    let pmm = fit_ts_pmm2(&x, &order).unwrap();
    let m = css.moments;
    let c = pmm2_weight(m.m2, m.m3, m.m4).unwrap_or(0.0);
    let cond = css.conditioning;
    let q = |p: &TsParams| {
        let r = css_residuals(&x, p, &order).unwrap();
        pmm2_potential(&r[cond..], c, m.m2)
    };
    let (q_pmm, q_css) = (q(&pmm.params), q(&css.params));
    prop_assert!(q_pmm <= q_css, "Q(PMM2) = {} > Q(CSS) = {}", q_pmm, q_css);
    Ok(())
}

/// `integrate_forecast(x[..L], difference(x))` returns `x[L..]`.
pub fn difference_round_trip(x: &[f64], d: usize, seasonal_d: usize, period: usize) -> Check {
    let lag = d + seasonal_d * period;
    prop_assume!(x.len() > lag);
    let w = difference(x, d, seasonal_d, period).unwrap();
    let back = integrate_forecast(&x[..lag], &w, d, seasonal_d, period).unwrap();
    prop_assert_eq!(back.len(), x.len() - lag);
    let scale = x.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    for (a, b) in back.iter().zip(&x[lag..]) {
        prop_assert!((a - b).abs() <= 1e-12 * scale, "{} vs {}", a, b);
    }
    Ok(())
}

/// Independent loop over the ARMA difference equation.
pub fn hand_residuals(w: &[f64], phi: &[f64], theta: &[f64], mu: f64) -> Vec<f64> {
    let mut e = vec![0.0; w.len()];
    for t in 0..w.len() {
        let mut ar = 0.0;
        for j in 1..=phi.len() {
            if t >= j {
                ar += phi[j - 1] * (w[t - j] - mu);
            }
        }
        let mut ma = 0.0;
        for k in 1..=theta.len() {
            if t >= k {
                ma += theta[k - 1] * e[t - k];
            }
        }
        e[t] = (w[t] - mu) - ar - ma;
    }
    e
}

pub fn css_recursion(w: &[f64], phi: &[f64], theta: &[f64], mean: f64) -> Check {
    let order = ModelOrder::new(phi.len(), 0, theta.len()).with_mean(true);
    let params = TsParams {
        phi: phi.to_vec(),
        theta: theta.to_vec(),
        mean,
        ..TsParams::zeros(&order)
    };
    let got = css_residuals(w, &params, &order).unwrap();
    let want = hand_residuals(w, phi, theta, mean);
    for (a, b) in got.iter().zip(&want) {
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()), "{} vs {}", a, b);
    }
    Ok(())
}

pub fn mse_identity(seed: u64) -> Check {
    let specs = [
        McSpec::regression("reg", vec![1.0, 2.5], gamma_errors(), 30),
        McSpec::time_series(
            "ar1",
            ModelOrder::new(1, 0, 0).with_mean(false),
            vec![0.6],
            gamma_errors(),
            40,
        ),
    ];
    let out = run_monte_carlo(&specs[..1], &[McMethod::Pmm2, McMethod::Pmm3], 50, seed).unwrap();
    let out2 = run_monte_carlo(&specs[1..], &[McMethod::Pmm2], 50, seed).unwrap();
    for row in out.summary.iter().chain(&out2.summary) {
        let rhs = row.bias * row.bias + row.variance;
        prop_assert!(
            (row.mse - rhs).abs() <= 1e-10 * row.mse.max(f64::MIN_POSITIVE),
            "{}: mse {} vs {}",
            row.parameter,
            row.mse,
            rhs
        );
        prop_assert!((0.0..=1.0).contains(&row.coverage));
    }
    Ok(())
}

pub fn bootstrap_contract(seed: u64, b: usize, level: f64) -> Check {
    let problem = skewed_problem(25, 2, seed);
    let opts = BootstrapOptions {
        replicates: b,
        level,
        seed,
        keep_replicates: true,
    };
    let first = residual_bootstrap(&problem, RegressionMethod::Pmm2, &opts).unwrap();
    let second = residual_bootstrap(&problem, RegressionMethod::Pmm2, &opts).unwrap();
    prop_assert_eq!(&first, &second);
    let reps = first.replicates.as_ref().unwrap();
    let kept = reps.len() as f64;
    for (j, row) in first.rows.iter().enumerate() {
        let inside = reps
            .iter()
            .filter(|r| r[j] >= row.conf_low && r[j] <= row.conf_high)
            .count() as f64;
        prop_assert!(
            (inside / kept - level).abs() <= 1.0 / kept,
            "{} of {} inside for level {}",
            inside,
            kept,
            level
        );
    }
    Ok(())
}

/// Exactly one rule applies, it is the one reported, and negating the
/// residuals keeps the method while flipping the skewness.
pub fn dispatch_contract(residuals: &[f64]) -> Check {
    let cfg = DispatchConfig::default();
    let Ok(d) = select_method(residuals, &cfg) else {
        return Err(TestCaseError::reject("degenerate residuals"));
    };
    let pmm3 = d.gamma3.abs() < cfg.symmetric_threshold && d.gamma4 < 0.0;
    let pmm2 = d.gamma3.abs() >= cfg.skew_threshold && d.g2 < cfg.g2_ceiling;
    let fired = [pmm3, pmm2 && !pmm3, !pmm2 && !pmm3];
    prop_assert_eq!(fired.iter().filter(|f| **f).count(), 1);
    let expected = if pmm3 {
        DispatchMethod::Pmm3
    } else if pmm2 {
        DispatchMethod::Pmm2
    } else {
        DispatchMethod::OlsCss
    };
    prop_assert_eq!(d.method, expected);
    let neg: Vec<f64> = residuals.iter().map(|v| -v).collect();
    let dn = select_method(&neg, &cfg).unwrap();
    prop_assert_eq!(dn.method, d.method);
    prop_assert!((dn.gamma3 + d.gamma3).abs() <= 1e-12 * (1.0 + d.gamma3.abs()));
    Ok(())
}

/// Residual vectors from a mix of families, scaled and shifted.
pub fn residual_vectors() -> impl Strategy<Value = Vec<f64>> {
    (8usize..120, 0u8..5, any::<u64>(), 0.1f64..10.0, -5.0f64..5.0).prop_map(
        |(n, fam, seed, scale, shift)| {
            let family = match fam {
                0 => Family::Gaussian { sd: 1.0 },
                1 => Family::Gamma {
                    shape: 2.0,
                    rate: 1.0,
                },
                2 => Family::Uniform {
                    lower: -1.0,
                    upper: 1.0,
                },
                3 => Family::Laplace { scale: 1.0 },
                _ => Family::Lognormal {
                    meanlog: 0.0,
                    sdlog: 0.55,
                },
            };
            let mut rng = substream(seed, 9, 0);
            sample_innovations(&InnovationSpec::new(family), n, &mut rng)
                .unwrap()
                .into_iter()
                .map(|v| scale * v + shift)
                .collect()
        },
    )
}

/// `(x, d, D, s)` with `d + D <= 2` and `s` in `{0, 2, 4, 12}`.
pub fn round_trip_inputs() -> impl Strategy<Value = (Vec<f64>, usize, usize, usize)> {
    (0usize..=2, 0usize..=2, prop::sample::select(vec![0usize, 2, 4, 12]))
        .prop_filter("d + D <= 2, seasonal needs a period", |(d, sd, s)| {
            d + sd <= 2 && (*sd == 0 || *s >= 2)
        })
        .prop_flat_map(|(d, sd, s)| {
            let lag = d + sd * s;
            (
                prop::collection::vec(-100.0f64..100.0, lag + 1..lag + 40),
                Just(d),
                Just(sd),
                Just(s),
            )
        })
}

pub fn arma_inputs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
    (
        prop::collection::vec(-10.0f64..10.0, 1..25),
        prop::collection::vec(-0.9f64..0.9, 0..3),
        prop::collection::vec(-0.9f64..0.9, 0..3),
        -3.0f64..3.0,
    )
}

pub fn quadruple_inputs() -> impl Strategy<Value = (Vec<(i32, i32)>, i32, i32)> {
    (
        prop::collection::vec((1i32..20, 1i32..10), 2..8),
        -50i32..50,
        -10i32..10,
    )
        .prop_filter("design needs two distinct x magnitudes", |(v, _, _)| {
            v.iter().any(|(x, _)| *x != v[0].0)
        })
}
