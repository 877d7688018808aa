use std::fs;
use std::io::Write;
use std::path::Path;

use pmm_core::cumulants::MomentSet;
use pmm_core::dispatch::DispatchDecision;
use pmm_core::inference::BootstrapResult;
use pmm_core::linmodel::InformationCriteria;
use pmm_core::tscore::ModelOrder;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Version of `docs/report.schema.json`.
pub const SCHEMA_VERSION: &str = "1.0.0";

#[derive(Debug, Serialize)]
pub struct InputInfo {
    pub path: String,
    pub column: String,
    pub design: Vec<String>,
    pub n: usize,
}

#[derive(Debug, Serialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct DispatchBlock {
    #[serde(flatten)]
    pub decision: DispatchDecision,
    pub transcript: String,
}

impl From<DispatchDecision> for DispatchBlock {
    fn from(decision: DispatchDecision) -> Self {
        let transcript = decision.transcript();
        Self {
            decision,
            transcript,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    /// "regression" or "time_series".
    pub model: &'static str,
    pub method: String,
    pub input: InputInfo,
    pub order: Option<ModelOrder>,
    pub coefficients: Vec<Coefficient>,
    pub cumulants: Option<MomentSet>,
    pub g_coefficient: f64,
    pub information_criteria: InformationCriteria,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<String>,
    pub dispatch: Option<DispatchBlock>,
    pub forecasts: Option<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct DispatchReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub input: InputInfo,
    pub decision: DispatchBlock,
}

#[derive(Debug, Serialize)]
pub struct BootstrapReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub model: &'static str,
    pub method: String,
    pub input: InputInfo,
    pub order: Option<ModelOrder>,
    #[serde(flatten)]
    pub result: BootstrapResult,
}

/// Pretty JSON to `output`, or to stdout when absent.
pub fn emit_json<T: Serialize>(value: &T, output: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Fit(format!("cannot serialize report: {e}")))?;
    emit_text(&(text + "\n"), output)
}

pub fn emit_text(text: &str, output: Option<&Path>) -> CliResult<()> {
    match output {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Args(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Args(format!("cannot write to stdout: {e}"))),
    }
}
