mod common;

use proptest::prelude::*;

use common::{props, residuals_with_shape};
use pmm_core::cumulants::MomentSet;
use pmm_core::dispatch::{
    decide, dispatch_fit, select_method, DispatchConfig, DispatchInput, DispatchMethod,
    FitOutcome,
};
use pmm_core::linmodel::{DesignProblem, RegressionMethod};
use pmm_core::mcbench::{sample_innovations, Family, InnovationSpec};
use pmm_core::rng::substream;
use pmm_core::tscore::{simulate_arima, ModelOrder, TsMethod, TsParams};
use pmm_core::PmmError;

fn moments(gamma3: f64, gamma4: f64) -> MomentSet {
    let gamma6 = 0.0;
    MomentSet {
        n: 200,
        mean: 0.0,
        m2: 1.0,
        m3: gamma3,
        m4: gamma4 + 3.0,
        m6: gamma6 + 15.0 * gamma4 + 10.0 * gamma3 * gamma3 + 15.0,
        gamma3,
        gamma4,
        gamma6,
    }
}

#[test]
fn rule_boundaries() {
    let cfg = DispatchConfig::default();
    let method = |g3, g4| decide(&moments(g3, g4), &cfg).unwrap().method;
    assert_eq!(method(0.0, 0.0), DispatchMethod::OlsCss);
    assert_eq!(method(0.05, -1.0), DispatchMethod::Pmm3);
    assert_eq!(method(0.1, -1.0), DispatchMethod::OlsCss);
    assert_eq!(method(0.05, 0.5), DispatchMethod::OlsCss);
    assert_eq!(method(1.0, 1.0), DispatchMethod::Pmm2);
    assert_eq!(method(0.29, -1.0), DispatchMethod::OlsCss);
    // |gamma3| = 0.3 with heavy tails: g2 = 1 - 0.09 / 12 > 0.95.
    assert_eq!(method(0.3, 10.0), DispatchMethod::OlsCss);
    assert_eq!(method(-1.0, 1.0), DispatchMethod::Pmm2);
}

#[test]
fn skewness_monotonicity() {
    let cfg = DispatchConfig::default();
    for g4 in [-1.0, 0.0, 1.0, 3.0, 8.0] {
        let mut seen_pmm2 = false;
        for i in 0..=60 {
            let g3 = 0.1 + i as f64 * 0.05;
            let d = decide(&moments(g3, g4), &cfg).unwrap();
            if seen_pmm2 {
                assert_eq!(d.method, DispatchMethod::Pmm2, "g3 {g3} g4 {g4}");
            }
            seen_pmm2 |= d.method == DispatchMethod::Pmm2;
        }
    }
}

#[test]
fn transcript_examples() {
    let cfg = DispatchConfig::default();
    let cases = [
        (1.0, 1.5, DispatchMethod::Pmm2, "Use PMM2."),
        (0.0, 0.0, DispatchMethod::OlsCss, "Use OLS."),
        (0.02, -1.1, DispatchMethod::Pmm3, "Use PMM3."),
        (0.218, 1.299, DispatchMethod::OlsCss, "Use OLS."),
    ];
    for (g3, g4, method, tail) in cases {
        let r = residuals_with_shape(200, g3, g4);
        let d = select_method(&r, &cfg).unwrap();
        assert_eq!(d.method, method);
        let t = d.transcript();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], format!("n = 200 | gamma3 = {g3:+.3} | gamma4 = {g4:+.3}"));
        assert!(lines[1].starts_with(&format!("  g2(PMM2) = {:.3}", d.g2)));
        assert!(lines[2].starts_with("  >>> ") && lines[2].ends_with(tail), "{t}");
    }
}

#[test]
fn skewed_sample_reports_g2() {
    let r = residuals_with_shape(200, 1.0, 1.5);
    let d = select_method(&r, &DispatchConfig::default()).unwrap();
    assert!((d.g2 - (1.0 - 1.0 / 3.5)).abs() < 1e-9);
    assert!(d.transcript().contains("g2(PMM2) = 0.714"));
}

#[test]
fn bad_inputs() {
    let cfg = DispatchConfig::default();
    assert!(matches!(select_method(&[1.0; 5], &cfg), Err(PmmError::InputTooShort { .. })));
    assert!(select_method(&[2.0; 20], &cfg).is_err());
    let bad = DispatchConfig {
        skew_threshold: -1.0,
        ..cfg
    };
    assert!(decide(&moments(1.0, 1.0), &bad).is_err());
}

fn ar1_series(family: Family, seed: u64) -> Vec<f64> {
    let order = ModelOrder::new(1, 0, 0).with_mean(false);
    let params = TsParams {
        phi: vec![0.5],
        ..TsParams::zeros(&order)
    };
    let mut rng = substream(seed, 9, 0);
    let e = sample_innovations(&InnovationSpec::new(family), 400, &mut rng).unwrap();
    simulate_arima(&order, &params, &e, 100).unwrap()
}

#[test]
fn dispatch_fit_time_series() {
    let cfg = DispatchConfig::default();
    let x = ar1_series(Family::Gamma { shape: 2.0, rate: 1.0 }, 1);
    let out = dispatch_fit(DispatchInput::TimeSeries { series: &x, order: None }, &cfg).unwrap();
    assert_eq!(out.decision.method, DispatchMethod::Pmm2);
    assert!(out.decision.transcript().ends_with("Use PMM2."));
    let FitOutcome::TimeSeries(fit) = &out.fit else { panic!("expected a time series fit") };
    assert_eq!(fit.method, TsMethod::Pmm2);
    assert!((fit.params.phi[0] - 0.5).abs() < 0.12);

}

/// Gaussian AR(1) samples never go to PMM2; they go to OLS/CSS unless the
/// sample happens to be symmetric and platykurtic, which the rule routes to
/// PMM3.
#[test]
fn dispatch_fit_gaussian_series() {
    let cfg = DispatchConfig::default();
    let order = Some(ModelOrder::new(1, 0, 0));
    let mut baseline = 0;
    for seed in 1..=20 {
        let x = ar1_series(Family::Gaussian { sd: 1.0 }, seed);
        let out = dispatch_fit(DispatchInput::TimeSeries { series: &x, order }, &cfg).unwrap();
        let d = &out.decision;
        let FitOutcome::TimeSeries(fit) = &out.fit else { panic!("expected a time series fit") };
        if d.gamma3.abs() < cfg.symmetric_threshold && d.gamma4 < 0.0 {
            assert_eq!(d.method, DispatchMethod::Pmm3);
        } else {
            assert_eq!(d.method, DispatchMethod::OlsCss, "seed {seed}: {}", d.transcript());
            assert_eq!(fit.method, TsMethod::Css);
            baseline += 1;
        }
    }
    assert!(baseline >= 5, "only {baseline} of 20 Gaussian samples chose the baseline");
}

#[test]
fn dispatch_fit_uniform_regression() {
    let mut rng = substream(3, 9, 0);
    let e = sample_innovations(
        &InnovationSpec::new(Family::Uniform { lower: -1.0, upper: 1.0 }),
        300,
        &mut rng,
    )
    .unwrap();
    let x: Vec<f64> = (0..300).map(|i| (i % 17) as f64).collect();
    let y: Vec<f64> = x.iter().zip(&e).map(|(x, e)| 2.0 - x + e).collect();
    let problem = DesignProblem::from_columns(&[x], &["x".into()], y, true).unwrap();
    let out = dispatch_fit(DispatchInput::Regression(&problem), &DispatchConfig::default()).unwrap();
    assert_eq!(out.decision.method, DispatchMethod::Pmm3);
    let FitOutcome::Regression(fit) = &out.fit else { panic!("expected a regression fit") };
    assert_eq!(fit.method, RegressionMethod::Pmm3);
    assert!((out.fit.coefficients()[1] + 1.0).abs() < 0.05);
}

proptest! {
    #[test]
    fn exactly_one_rule(r in props::residual_vectors()) {
        props::dispatch_contract(&r)?;
    }
}
