//! The two CoVaR estimators and their confidence intervals.
//!
//! The batching estimator splits a plain Monte Carlo sample into k batches,
//! reads one conditional observation out of each batch, and takes an order
//! statistic across batches. The importance-weighted estimator conditions
//! exactly on the VaR level by solving for the crossing points of the final
//! risk factor and reweighting with the factor density, which removes the
//! batching bias and restores the canonical square-root rate.
//!
//! Both entry points return an [`EstimateReport`] carrying the point
//! estimate, a confidence interval and named diagnostics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod batching;
mod importance;

pub use batching::{batching_ci, batching_estimate, var_order_stat, BatchConfig};
pub use importance::{
    band_conditional_cdf, conditional_root_weights, is_conditional_cdf, is_estimate, is_scenario,
    root_weights_csv, sectioning_ci, weighted_quantile, IsConfig, RootWeights,
};

/// Point estimate with a confidence interval and run diagnostics.
///
/// `diagnostics` is an ordered map so that serialised reports are
/// byte-stable across runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimateReport {
    /// The CoVaR point estimate.
    pub point: f64,
    /// Lower confidence bound.
    pub ci_low: f64,
    /// Upper confidence bound.
    pub ci_high: f64,
    /// Nominal confidence level of the interval, in (0, 1).
    pub level: f64,
    /// Named scalar diagnostics (estimated VaR, crossed fraction, sizes).
    pub diagnostics: BTreeMap<String, f64>,
}

/// Rejects probability-like parameters outside the open unit interval.
pub(crate) fn check_prob(value: f64, name: &str) -> Result<()> {
    if value.is_finite() && 0.0 < value && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must lie strictly between 0 and 1, got {value}"
        )))
    }
}
