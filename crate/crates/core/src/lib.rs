//! Monte-Carlo estimation of CoVaR.
//!
//! CoVaR is the beta-quantile of one portfolio's loss conditional on a second
//! portfolio's loss sitting exactly at its alpha-VaR. Conditioning on a
//! probability-zero event rules out naive empirics, so this crate implements
//! two estimators with confidence intervals:
//!
//! * a batching estimator ([`estimators::batching_estimate`]) that works for
//!   any jointly simulatable loss pair and converges like `n^(-1/3)`, and
//! * an importance-sampling-inspired estimator ([`estimators::is_estimate`])
//!   for delta-gamma portfolio models that restores the `n^(-1/2)` rate by
//!   reweighting scenarios to the conditioning event.
//!
//! Supporting modules provide the delta-gamma model reduction
//! ([`dgmodel`]), closed-form references and the quantile-regression
//! baseline ([`analytic`]), deterministic numerics ([`numerics`]) and a
//! reproducible experiment harness ([`harness`]).

pub mod analytic;
pub mod dgmodel;
mod error;
pub mod estimators;
pub mod harness;
pub mod numerics;

pub use error::{Error, Result};
