//! Polynomial maximization (PMM2 / symmetric PMM3) estimators for linear
//! regression and ARIMA-family models, with cumulant-driven method dispatch,
//! bootstrap inference and a Monte Carlo comparison engine.

pub mod cumulants;
pub mod dispatch;
pub mod error;
pub mod inference;
pub mod linmodel;
pub mod mcbench;
pub mod optim;
pub mod rng;
pub mod tscore;
pub mod tspmm;

pub use error::{PmmError, Result};
