//! Innovation catalog with exact cumulants, the Monte Carlo comparison
//! engine and the PMM2 advantage grid.

mod engine;
mod grid;
mod innovations;

use std::io::Write;

pub use engine::{
    run_monte_carlo, McMethod, McOutput, McSpec, ModelKind, ReplicateRecord, SummaryRow,
    BURN_IN, COVERAGE_LEVEL, MIN_SIMULATIONS,
};
pub use grid::{advantage_grid, GridCell};
pub use innovations::{
    innovation_theory, sample_innovations, skewed_family, Family, InnovationSpec,
};

use crate::error::{PmmError, Result};

fn io_err(e: csv::Error) -> PmmError {
    PmmError::InvalidArgument(format!("csv output failed: {e}"))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// One row per (specification, method, parameter).
pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "label", "method", "parameter", "true_value", "mean", "bias", "variance", "mse",
        "coverage", "gain", "g_theory", "n_used",
    ])
    .map_err(io_err)?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            r.method.to_string(),
            r.parameter.clone(),
            r.true_value.to_string(),
            r.mean.to_string(),
            r.bias.to_string(),
            r.variance.to_string(),
            r.mse.to_string(),
            r.coverage.to_string(),
            r.gain.to_string(),
            opt(r.g_theory),
            r.n_used.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| PmmError::InvalidArgument(e.to_string()))
}

/// Long format `gamma3,n,g2_hat,g2_theory`.
pub fn write_grid_csv<W: Write>(cells: &[GridCell], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["gamma3", "n", "g2_hat", "g2_theory"])
        .map_err(io_err)?;
    for c in cells {
        w.write_record([
            c.gamma3.to_string(),
            c.n.to_string(),
            c.g2_hat.to_string(),
            c.g2_theory.to_string(),
        ])
        .map_err(io_err)?;
    }
    w.flush().map_err(|e| PmmError::InvalidArgument(e.to_string()))
}
