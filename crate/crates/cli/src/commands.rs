use std::path::Path;

use pmm_core::dispatch::{
    dispatch_fit, scan_ar_order, select_method, DispatchConfig, DispatchDecision,
    DispatchInput, DispatchMethod, FitOutcome,
};
use pmm_core::inference::{block_bootstrap_ts, residual_bootstrap, BootstrapOptions};
use pmm_core::linmodel::{
    asymptotic_covariance, fit_ols, fit_regression, information_criteria, DesignProblem,
    RegressionFit, RegressionMethod,
};
use pmm_core::mcbench::{
    advantage_grid, run_monte_carlo, sample_innovations, write_grid_csv, write_summary_csv,
    Family, InnovationSpec, McSpec, BURN_IN,
};
use pmm_core::rng::substream;
use pmm_core::tscore::{
    fit_css, simulate_arima, ts_covariance, ModelOrder, TsFit, TsMethod, TsParams,
};
use pmm_core::tspmm::{fit_ts, forecast};

use crate::error::{fit_error, CliError, CliResult};
use crate::input::Table;
use crate::report::{
    emit_json, emit_text, BootstrapReport, Coefficient, DispatchBlock, DispatchReport,
    FitReport, InputInfo, SCHEMA_VERSION,
};
use crate::{
    BootstrapArgs, DataArgs, DispatchArgs, FitArgs, GridArgs, McArgs, Method, ModelArgs,
    SimulateArgs,
};

/// Key for the CLI's own simulation streams.
const SIMULATE_KEY: u64 = 40;

struct Data {
    info: InputInfo,
    y: Vec<f64>,
    design: Option<DesignProblem>,
}

fn load(args: &DataArgs) -> CliResult<Data> {
    let table = Table::read(&args.input)?;
    let y = table.column(&args.column)?;
    let names = args.design.clone().unwrap_or_default();
    let design = if names.is_empty() {
        None
    } else {
        let cols = names
            .iter()
            .map(|n| table.column(n))
            .collect::<CliResult<Vec<_>>>()?;
        Some(DesignProblem::from_columns(&cols, &names, y.clone(), true).map_err(fit_error)?)
    };
    Ok(Data {
        info: InputInfo {
            path: args.input.display().to_string(),
            column: args.column.clone(),
            design: names,
            n: y.len(),
        },
        y,
        design,
    })
}

impl ModelArgs {
    pub fn order(&self) -> CliResult<Option<ModelOrder>> {
        let Some([p, d, q]) = self.order else {
            if self.seasonal.is_some() {
                return Err(CliError::Args("--seasonal requires --order".into()));
            }
            return Ok(None);
        };
        let order = match self.seasonal {
            Some([sp, sd, sq, s]) => ModelOrder::seasonal(p, d, q, sp, sd, sq, s)?,
            None => ModelOrder::new(p, d, q),
        };
        Ok(Some(order))
    }
}

fn regression_method(m: Method) -> CliResult<RegressionMethod> {
    match m {
        Method::Ols => Ok(RegressionMethod::Ols),
        Method::Pmm2 => Ok(RegressionMethod::Pmm2),
        Method::Pmm3 => Ok(RegressionMethod::Pmm3),
        Method::Css => Err(CliError::Args(
            "method 'css' applies to time series; use 'ols' with --design".into(),
        )),
        Method::Auto => unreachable!("auto is resolved by dispatch"),
    }
}

fn ts_method(m: Method) -> CliResult<TsMethod> {
    match m {
        Method::Css => Ok(TsMethod::Css),
        Method::Pmm2 => Ok(TsMethod::Pmm2),
        Method::Pmm3 => Ok(TsMethod::Pmm3),
        Method::Ols => Err(CliError::Args(
            "method 'ols' applies to regressions; use 'css' for time series".into(),
        )),
        Method::Auto => unreachable!("auto is resolved by dispatch"),
    }
}

/// Square roots of a covariance diagonal; empty when the covariance failed.
fn std_errors(diag: Option<Vec<f64>>) -> Vec<Option<f64>> {
    diag.map(|d| d.into_iter().map(|v| (v >= 0.0).then(|| v.sqrt())).collect())
        .unwrap_or_default()
}

fn coefficients(names: &[String], values: &[f64], se: Vec<Option<f64>>) -> Vec<Coefficient> {
    names
        .iter()
        .zip(values)
        .enumerate()
        .map(|(i, (name, &estimate))| Coefficient {
            name: name.clone(),
            estimate,
            std_error: se.get(i).copied().flatten(),
        })
        .collect()
}

fn regression_report(
    fit: RegressionFit,
    problem: &DesignProblem,
    info: InputInfo,
    dispatch: Option<DispatchDecision>,
) -> FitReport {
    let diag = asymptotic_covariance(&fit, problem)
        .ok()
        .map(|c| c.diagonal().iter().copied().collect());
    FitReport {
        schema_version: SCHEMA_VERSION,
        command: "fit",
        model: "regression",
        method: fit.method.as_str().to_string(),
        input: info,
        order: None,
        coefficients: coefficients(&fit.column_names, &fit.coefficients, std_errors(diag)),
        cumulants: fit.moments,
        g_coefficient: fit.g_coefficient,
        information_criteria: information_criteria(&fit),
        converged: fit.converged,
        iterations: fit.iterations,
        warnings: fit.warnings,
        dispatch: dispatch.map(DispatchBlock::from),
        forecasts: None,
    }
}

fn ts_report(
    fit: TsFit,
    info: InputInfo,
    dispatch: Option<DispatchDecision>,
    horizon: Option<usize>,
) -> CliResult<FitReport> {
    let forecasts = horizon
        .map(|h| forecast(&fit, h).map_err(|e| CliError::Fit(format!("forecast failed: {e}"))))
        .transpose()?;
    let diag = ts_covariance(&fit)
        .ok()
        .map(|c| c.diagonal().iter().copied().collect());
    Ok(FitReport {
        schema_version: SCHEMA_VERSION,
        command: "fit",
        model: "time_series",
        method: fit.method.as_str().to_string(),
        input: info,
        order: Some(fit.order),
        coefficients: coefficients(&fit.order.param_names(), &fit.coefficients(), std_errors(diag)),
        cumulants: Some(fit.moments),
        g_coefficient: fit.g_coefficient,
        information_criteria: fit.information_criteria(),
        converged: fit.converged,
        iterations: fit.iterations,
        warnings: fit.warnings,
        dispatch: dispatch.map(DispatchBlock::from),
        forecasts,
    })
}

fn ts_order(series: &[f64], order: Option<ModelOrder>) -> CliResult<ModelOrder> {
    match order {
        Some(o) => Ok(o),
        None => Ok(scan_ar_order(series).map_err(fit_error)?.order),
    }
}

pub fn fit(args: &FitArgs) -> CliResult<()> {
    let data = load(&args.data)?;
    let order = args.model.order()?;
    let report = match (&data.design, args.method) {
        (Some(_), _) if order.is_some() || args.horizon.is_some() => {
            return Err(CliError::Args(
                "--order, --seasonal and --horizon apply to time series, not --design".into(),
            ))
        }
        (Some(problem), Method::Auto) => {
            let out = dispatch_fit(DispatchInput::Regression(problem), &DispatchConfig::default())
                .map_err(fit_error)?;
            eprintln!("{}", out.decision.transcript());
            let FitOutcome::Regression(fit) = out.fit else {
                unreachable!("regression input yields a regression fit")
            };
            regression_report(fit, problem, data.info, Some(out.decision))
        }
        (Some(problem), m) => {
            let fit = fit_regression(problem, regression_method(m)?).map_err(fit_error)?;
            regression_report(fit, problem, data.info, None)
        }
        (None, Method::Auto) => {
            let input = DispatchInput::TimeSeries {
                series: &data.y,
                order,
            };
            let out = dispatch_fit(input, &DispatchConfig::default()).map_err(fit_error)?;
            eprintln!("{}", out.decision.transcript());
            let FitOutcome::TimeSeries(fit) = out.fit else {
                unreachable!("series input yields a time-series fit")
            };
            ts_report(fit, data.info, Some(out.decision), args.horizon)?
        }
        (None, m) => {
            let method = ts_method(m)?;
            let order = ts_order(&data.y, order)?;
            let fit = fit_ts(&data.y, &order, method).map_err(fit_error)?;
            ts_report(fit, data.info, None, args.horizon)?
        }
    };
    emit_json(&report, args.output.as_deref())
}

pub fn dispatch(args: &DispatchArgs) -> CliResult<()> {
    let config = DispatchConfig {
        skew_threshold: args.skew_threshold,
        g2_ceiling: args.g2_ceiling,
        symmetric_threshold: args.symmetric_threshold,
    };
    config.validate()?;
    let data = load(&args.data)?;
    let residuals = match &data.design {
        Some(problem) => fit_ols(problem).map_err(fit_error)?.residuals,
        None if args.model.order.is_some() || args.fit_series => {
            let order = ts_order(&data.y, args.model.order()?)?;
            fit_css(&data.y, &order).map_err(fit_error)?.effective_residuals().to_vec()
        }
        None => data.y.clone(),
    };
    let decision = select_method(&residuals, &config).map_err(fit_error)?;
    println!("{}", decision.transcript());
    if let Some(path) = &args.output {
        let report = DispatchReport {
            schema_version: SCHEMA_VERSION,
            command: "dispatch",
            input: data.info,
            decision: decision.into(),
        };
        emit_json(&report, Some(path))?;
    }
    Ok(())
}

pub fn bootstrap(args: &BootstrapArgs) -> CliResult<()> {
    let data = load(&args.data)?;
    let opts = BootstrapOptions {
        replicates: args.b,
        level: args.level,
        seed: args.seed,
        keep_replicates: false,
    };
    let order = args.model.order()?;
    let report = match &data.design {
        Some(problem) => {
            if order.is_some() || args.block_length.is_some() {
                return Err(CliError::Args(
                    "--order and --block-length apply to time series, not --design".into(),
                ));
            }
            let method = match args.method {
                Method::Auto => {
                    let resid = fit_ols(problem).map_err(fit_error)?.residuals;
                    match select_method(&resid, &DispatchConfig::default())
                        .map_err(fit_error)?
                        .method
                    {
                        DispatchMethod::OlsCss => RegressionMethod::Ols,
                        DispatchMethod::Pmm2 => RegressionMethod::Pmm2,
                        DispatchMethod::Pmm3 => RegressionMethod::Pmm3,
                    }
                }
                m => regression_method(m)?,
            };
            let result = residual_bootstrap(problem, method, &opts)?;
            BootstrapReport {
                schema_version: SCHEMA_VERSION,
                command: "bootstrap",
                model: "regression",
                method: method.as_str().to_string(),
                input: data.info,
                order: None,
                result,
            }
        }
        None => {
            let order = ts_order(&data.y, order)?;
            let method = match args.method {
                Method::Auto => {
                    let css = fit_css(&data.y, &order).map_err(fit_error)?;
                    match select_method(css.effective_residuals(), &DispatchConfig::default())
                        .map_err(fit_error)?
                        .method
                    {
                        DispatchMethod::OlsCss => TsMethod::Css,
                        DispatchMethod::Pmm2 => TsMethod::Pmm2,
                        DispatchMethod::Pmm3 => TsMethod::Pmm3,
                    }
                }
                m => ts_method(m)?,
            };
            let result = block_bootstrap_ts(&data.y, &order, method, args.block_length, &opts)?;
            BootstrapReport {
                schema_version: SCHEMA_VERSION,
                command: "bootstrap",
                model: "time_series",
                method: method.as_str().to_string(),
                input: data.info,
                order: Some(order),
                result,
            }
        }
    };
    for w in &report.result.warnings {
        eprintln!("warning: {w}");
    }
    emit_json(&report, args.output.as_deref())
}

fn series_csv(header: &str, values: &[f64]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| CliError::Args(format!("csv output failed: {e}"));
    w.write_record([header]).map_err(fail)?;
    for v in values {
        w.write_record([v.to_string()]).map_err(fail)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Args(format!("csv output failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let order = args
        .model
        .order()?
        .ok_or_else(|| CliError::Args("simulate requires --order".into()))?;
    let params = TsParams {
        phi: args.ar.clone().unwrap_or_default(),
        theta: args.ma.clone().unwrap_or_default(),
        seasonal_phi: args.sar.clone().unwrap_or_default(),
        seasonal_theta: args.sma.clone().unwrap_or_default(),
        mean: args.mean,
    };
    params.check(&order)?;
    let (innovations, burnin) = match (&args.innovations, args.family) {
        (Some(path), None) => {
            let e = Table::read(path)?.column(&args.innovation_column)?;
            (e, args.burnin.unwrap_or(0))
        }
        (None, family) => {
            let n = args
                .n
                .ok_or_else(|| CliError::Args("--n is required without --innovations".into()))?;
            let burnin = args.burnin.unwrap_or(BURN_IN);
            let spec = family.unwrap_or_else(InnovationSpec::gaussian);
            let mut rng = substream(args.seed, SIMULATE_KEY, 0);
            (sample_innovations(&spec, n + burnin, &mut rng)?, burnin)
        }
        (Some(_), Some(_)) => {
            return Err(CliError::Args(
                "--innovations and --family are mutually exclusive".into(),
            ))
        }
    };
    let series = simulate_arima(&order, &params, &innovations, burnin).map_err(|e| match e {
        pmm_core::PmmError::InputTooShort { .. } => CliError::Data(e.to_string()),
        other => other.into(),
    })?;
    emit_text(&series_csv(&args.name, &series)?, args.output.as_deref())
}

fn default_specs() -> Vec<McSpec> {
    let beta = vec![1.0, 2.0];
    vec![
        McSpec::regression(
            "gamma",
            beta.clone(),
            InnovationSpec::new(Family::Gamma { shape: 2.0, rate: 1.0 }),
            200,
        ),
        McSpec::regression("gaussian", beta.clone(), InnovationSpec::gaussian(), 200),
        McSpec::regression(
            "uniform",
            beta,
            InnovationSpec::new(Family::Uniform { lower: -1.0, upper: 1.0 }),
            200,
        ),
    ]
}

fn read_specs(path: &Path) -> CliResult<Vec<McSpec>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: invalid specification list: {e}", path.display())))
}

pub fn mc(args: &McArgs) -> CliResult<()> {
    let specs = match &args.specs {
        Some(path) => read_specs(path)?,
        None => default_specs(),
    };
    let out = run_monte_carlo(&specs, &args.methods, args.n_sim, args.seed)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    let mut buf = Vec::new();
    write_summary_csv(&out.summary, &mut buf)?;
    emit_text(&String::from_utf8(buf).expect("csv output is UTF-8"), args.output.as_deref())
}

pub fn grid(args: &GridArgs) -> CliResult<()> {
    let order = args.model.order()?.unwrap_or_else(|| ModelOrder::new(1, 1, 0));
    let template = McSpec::time_series(
        "grid",
        order,
        args.theta.clone(),
        InnovationSpec::gaussian(),
        args.grid_n[0],
    );
    let cells = advantage_grid(&args.grid_gamma3, &args.grid_n, args.n_sim, &template, args.seed)?;
    let mut buf = Vec::new();
    write_grid_csv(&cells, &mut buf)?;
    emit_text(&String::from_utf8(buf).expect("csv output is UTF-8"), args.output.as_deref())
}
