mod common;

use proptest::prelude::*;

use common::props;
use pmm_core::cumulants::{pmm2_weight, pmm3_weights};
use pmm_core::mcbench::{run_monte_carlo, Family, InnovationSpec, McMethod, McSpec};
use pmm_core::tscore::{css_residuals, fit_css, ModelOrder, TsMethod, TsParams};
use pmm_core::tspmm::{
    fit_ar_pmm2, fit_ts, fit_ts_pmm2, fit_ts_pmm3, forecast, pmm2_potential, pmm3_potential,
};

fn ma1_order() -> ModelOrder {
    ModelOrder::new(0, 0, 1).with_mean(false)
}

fn ma1(theta: f64) -> TsParams {
    TsParams {
        theta: vec![theta],
        ..TsParams::zeros(&ma1_order())
    }
}

fn argmin_theta<F: Fn(f64) -> f64>(q: F, center: f64) -> f64 {
    (-2_000..=2_000)
        .map(|i| center + i as f64 * 1e-4)
        .filter(|t| t.abs() < 0.99)
        .min_by(|a, b| q(*a).total_cmp(&q(*b)))
        .unwrap()
}

#[test]
fn ma1_pmm2_matches_potential_grid() {
    let order = ma1_order();
    let x = props::simulated_series(&order, &ma1(0.4), 300, 1);
    let css = fit_css(&x, &order).unwrap();
    let fit = fit_ts_pmm2(&x, &order).unwrap();
    assert!(fit.converged);
    let m = css.moments;
    let c = pmm2_weight(m.m2, m.m3, m.m4).unwrap();
    let q = |t: f64| pmm2_potential(&css_residuals(&x, &ma1(t), &order).unwrap(), c, m.m2);
    let grid = argmin_theta(q, fit.params.theta[0]);
    assert!((fit.params.theta[0] - grid).abs() < 1e-3, "{} vs {grid}", fit.params.theta[0]);
}

#[test]
fn ma1_pmm3_matches_potential_grid() {
    let order = ma1_order();
    let mut rng = pmm_core::rng::substream(2, 9, 0);
    let e = pmm_core::mcbench::sample_innovations(
        &InnovationSpec::new(Family::Uniform { lower: -1.0, upper: 1.0 }),
        400,
        &mut rng,
    )
    .unwrap();
    let x = pmm_core::tscore::simulate_arima(&order, &ma1(0.4), &e, 100).unwrap();
    let css = fit_css(&x, &order).unwrap();
    let fit = fit_ts_pmm3(&x, &order).unwrap();
    assert_eq!(fit.method, TsMethod::Pmm3);
    let m = css.moments;
    let b = pmm3_weights(m.m2, m.m4, m.m6).unwrap();
    let q = |t: f64| pmm3_potential(&css_residuals(&x, &ma1(t), &order).unwrap(), b.b1, b.b3);
    let grid = argmin_theta(q, fit.params.theta[0]);
    assert!((fit.params.theta[0] - grid).abs() < 1e-3, "{} vs {grid}", fit.params.theta[0]);
}

#[test]
fn zero_skew_potential_is_half_sum_of_squares() {
    let e = [0.5, -1.0, 2.0, -1.5];
    let ss: f64 = e.iter().map(|v| v * v).sum();
    assert!((pmm2_potential(&e, 0.0, 3.0) - 0.5 * ss).abs() < 1e-15);
    assert!((pmm3_potential(&e, 1.0, 0.0) - 0.5 * ss).abs() < 1e-15);
}

#[test]
fn ar1_pmm2_near_truth() {
    let order = ModelOrder::new(1, 0, 0).with_mean(false);
    let params = TsParams {
        phi: vec![0.5],
        ..TsParams::zeros(&order)
    };
    let x = props::simulated_series(&order, &params, 200, 3);
    let fit = fit_ar_pmm2(&x, 1, false).unwrap();
    assert!((fit.params.phi[0] - 0.5).abs() < 0.12, "{}", fit.params.phi[0]);
    assert!(fit.g_coefficient < 1.0);
    let routed = fit_ts(&x, &order, TsMethod::Pmm2).unwrap();
    assert_eq!(routed.params, fit.params);
}

#[test]
fn mean_shift_equivariance() {
    let order = ModelOrder::new(1, 0, 1);
    let params = TsParams {
        phi: vec![0.5],
        theta: vec![0.3],
        ..TsParams::zeros(&order)
    };
    let x = props::simulated_series(&order, &params, 250, 4);
    let shifted: Vec<f64> = x.iter().map(|v| v + 25.0).collect();
    for method in [TsMethod::Pmm2, TsMethod::Pmm3] {
        let a = fit_ts(&x, &order, method).unwrap();
        let b = fit_ts(&shifted, &order, method).unwrap();
        assert!((a.params.phi[0] - b.params.phi[0]).abs() < 1e-6, "{method:?}");
        assert!((a.params.theta[0] - b.params.theta[0]).abs() < 1e-6, "{method:?}");
        assert!((b.params.mean - a.params.mean - 25.0).abs() < 1e-6, "{method:?}");
    }
}

#[test]
fn forecasts_continue_the_series() {
    // A random walk forecasts its last value.
    let walk = [1.0, 2.5, 2.0, 3.5, 3.0, 4.0, 5.5, 5.0, 6.0, 7.5, 7.0, 8.0];
    let fit = fit_ts(&walk, &ModelOrder::new(0, 1, 0), TsMethod::Css).unwrap();
    assert_eq!(forecast(&fit, 3).unwrap(), vec![8.0; 3]);
    // AR(1) forecasts decay geometrically to the mean.
    let order = ModelOrder::new(1, 0, 0);
    let params = TsParams {
        phi: vec![0.6],
        mean: 4.0,
        ..TsParams::zeros(&order)
    };
    let x = props::simulated_series(&order, &params, 200, 5);
    let fit = fit_ts(&x, &order, TsMethod::Pmm2).unwrap();
    let f = forecast(&fit, 4).unwrap();
    let (phi, mu) = (fit.params.phi[0], fit.params.mean);
    let mut prev = *x.last().unwrap();
    for v in f {
        let want = mu + phi * (prev - mu);
        assert!((v - want).abs() < 1e-10);
        prev = v;
    }
    assert!(forecast(&fit, 0).is_err());
}

#[test]
fn ar1_pmm2_variance_ratio() {
    let innov = InnovationSpec::new(Family::Gamma { shape: 2.0, rate: 1.0 });
    let spec = McSpec::time_series(
        "ar1",
        ModelOrder::new(1, 0, 0).with_mean(false),
        vec![0.5],
        innov,
        200,
    );
    let out = run_monte_carlo(&[spec], &[McMethod::Pmm2], 500, 11).unwrap();
    let row = out.row("ar1", McMethod::Pmm2, 0).unwrap();
    let gain = row.gain;
    assert!((gain - 0.6).abs() < 0.15, "variance ratio {gain}");
}

#[test]
fn ar1_pmm3_uniform_variance_ratio() {
    let innov = InnovationSpec::new(Family::Uniform { lower: -1.0, upper: 1.0 });
    let spec = McSpec::time_series(
        "ar1u",
        ModelOrder::new(1, 0, 0).with_mean(false),
        vec![0.5],
        innov,
        500,
    );
    let out = run_monte_carlo(&[spec], &[McMethod::Pmm3], 300, 12).unwrap();
    let gain = out.row("ar1u", McMethod::Pmm3, 0).unwrap().gain;
    assert!(gain < 1.0 && (gain - 0.34).abs() < 0.15, "variance ratio {gain}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn potential_dominance(theta in -0.7f64..0.7, ar in any::<bool>(), seed in any::<u64>()) {
        props::objective_dominance(theta, if ar { 0.4 } else { 0.0 }, 150, seed)?;
    }
}
