//! Closed-form CoVaR references and the quantile-regression baseline.
//!
//! Two benchmark portfolio pairs admit exact CoVaR formulas: a bivariate
//! normal pair and a variant whose conditioning loss enters the target
//! portfolio through a deterministic quadratic. Every statistical claim in
//! the crate is anchored against these oracles, and the matching samplers
//! feed the estimators the exact distributions the formulas describe.
//!
//! The module also houses the quantile-regression estimator ([`qre_covar`]),
//! the natural baseline: fit a conditional quantile line of Y on X and read
//! it off at the VaR of X. It is consistent only under linear dependence,
//! which the quadratic pair deliberately violates.

use serde::{Deserialize, Serialize};

use crate::dgmodel::LossSample;
use crate::error::{Error, Result};
use crate::numerics::{inv_norm_cdf, RngStream};

mod qre;

pub use qre::{qre_covar, qre_fit};

/// Bivariate normal loss pair with correlation `rho`.
///
/// `X ~ N(mu_x, sigma_x^2)` and `Y = mu_y + sigma_y (rho Zx + sqrt(1 - rho^2) Z)`
/// where `Zx = (X - mu_x) / sigma_x` and Z is an independent standard normal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearPortfolioSpec {
    pub mu_x: f64,
    pub mu_y: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub rho: f64,
}

impl LinearPortfolioSpec {
    /// Rejects non-finite locations, non-positive scales and |rho| > 1.
    pub fn validate(&self) -> Result<()> {
        check_finite("mu_x", self.mu_x)?;
        check_finite("mu_y", self.mu_y)?;
        check_scale("sigma_x", self.sigma_x)?;
        check_scale("sigma_y", self.sigma_y)?;
        check_rho(self.rho)
    }
}

impl Default for LinearPortfolioSpec {
    /// The linear benchmark pair at rho = 0.95, the parameter set of the
    /// worked examples.
    fn default() -> Self {
        LinearPortfolioSpec {
            mu_x: -0.005,
            mu_y: -0.00286,
            sigma_x: 0.08,
            sigma_y: 0.06111,
            rho: 0.95,
        }
    }
}

/// Loss pair where X is normal and enters Y through a quadratic exposure.
///
/// `Y = delta X + 1/2 gamma X^2 + xi` with Gaussian noise
/// `xi = sigma_y (rho Zx + sqrt(1 - rho^2) Z)` sharing X's driver `Zx`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonlinearPortfolioSpec {
    pub mu_x: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub rho: f64,
    pub delta: f64,
    pub gamma: f64,
}

impl NonlinearPortfolioSpec {
    /// Rejects non-finite fields, non-positive scales and |rho| > 1.
    pub fn validate(&self) -> Result<()> {
        check_finite("mu_x", self.mu_x)?;
        check_scale("sigma_x", self.sigma_x)?;
        check_scale("sigma_y", self.sigma_y)?;
        check_finite("delta", self.delta)?;
        check_finite("gamma", self.gamma)?;
        check_rho(self.rho)
    }
}

impl Default for NonlinearPortfolioSpec {
    /// The quadratic benchmark pair at rho = 0.95, the parameter set of
    /// the worked examples.
    fn default() -> Self {
        NonlinearPortfolioSpec {
            mu_x: -0.03,
            sigma_x: 0.2,
            sigma_y: 0.3,
            rho: 0.95,
            delta: 0.2,
            gamma: 0.8,
        }
    }
}

fn check_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite, got {value}"
        )))
    }
}

fn check_scale(name: &str, value: f64) -> Result<()> {
    if value.is_nan() || value <= 0.0 || value == f64::INFINITY {
        Err(Error::InvalidParameter(format!(
            "{name} must be a positive finite scale, got {value}"
        )))
    } else {
        Ok(())
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "rho must lie in [-1, 1], got {rho}"
        )))
    }
}

/// Quantile of the Gaussian noise leg shared by both closed forms.
fn noise_quantile(sigma_y: f64, rho: f64, q_alpha: f64, q_beta: f64) -> f64 {
    sigma_y * (rho * q_alpha + (1.0 - rho * rho).sqrt() * q_beta)
}

/// Exact CoVaR of the linear pair at levels `alpha` and `beta`.
///
/// Conditioning a bivariate normal on `X = VaR_alpha(X)` leaves a normal
/// law with mean shifted by `rho` standard quantiles and scale damped by
/// `sqrt(1 - rho^2)`, so the conditional beta-quantile is
/// `mu_y + sigma_y [rho q_alpha + sqrt(1 - rho^2) q_beta]`.
///
/// # Errors
///
/// Invalid spec fields or levels outside (0, 1).
pub fn linear_covar(spec: &LinearPortfolioSpec, alpha: f64, beta: f64) -> Result<f64> {
    spec.validate()?;
    let q_alpha = inv_norm_cdf(alpha)?;
    let q_beta = inv_norm_cdf(beta)?;
    Ok(spec.mu_y + noise_quantile(spec.sigma_y, spec.rho, q_alpha, q_beta))
}

/// Exact CoVaR of the quadratic pair, returned with the conditioning VaR.
///
/// X is Gaussian so `var_x = mu_x + q_alpha sigma_x` is exact; substituting
/// it into the quadratic exposure and adding the noise quantile gives
/// `covar = delta var_x + 1/2 gamma var_x^2 + sigma_y [rho q_alpha + sqrt(1 - rho^2) q_beta]`.
///
/// # Errors
///
/// Invalid spec fields or levels outside (0, 1).
pub fn nonlinear_covar(
    spec: &NonlinearPortfolioSpec,
    alpha: f64,
    beta: f64,
) -> Result<(f64, f64)> {
    spec.validate()?;
    let q_alpha = inv_norm_cdf(alpha)?;
    let q_beta = inv_norm_cdf(beta)?;
    let var_x = spec.mu_x + q_alpha * spec.sigma_x;
    let covar = spec.delta * var_x
        + 0.5 * spec.gamma * var_x * var_x
        + noise_quantile(spec.sigma_y, spec.rho, q_alpha, q_beta);
    Ok((covar, var_x))
}

/// Correlation maximising the linear CoVaR at fixed levels,
/// `sqrt(q_alpha^2 / (q_alpha^2 + q_beta^2))`.
///
/// # Errors
///
/// At `alpha = beta = 0.5` both quantiles vanish and the ratio is
/// undefined; any level outside (0, 1) is rejected as usual.
pub fn rho_star(alpha: f64, beta: f64) -> Result<f64> {
    let q_alpha = inv_norm_cdf(alpha)?;
    let q_beta = inv_norm_cdf(beta)?;
    let denom = q_alpha * q_alpha + q_beta * q_beta;
    if denom == 0.0 {
        return Err(Error::InvalidParameter(
            "rho* is undefined at alpha = beta = 0.5: both normal quantiles vanish".into(),
        ));
    }
    Ok((q_alpha * q_alpha / denom).sqrt())
}

/// Draws `n` pairs from the linear model, two normal variates per pair.
///
/// The noise variate is consumed even at |rho| = 1 so that the stream
/// position depends only on how many pairs were drawn, never on the
/// parameter values.
///
/// # Errors
///
/// Invalid spec fields or `n = 0`.
pub fn sample_linear(
    spec: &LinearPortfolioSpec,
    stream: &mut RngStream,
    n: usize,
) -> Result<LossSample> {
    spec.validate()?;
    check_count(n)?;
    let noise_scale = (1.0 - spec.rho * spec.rho).sqrt();
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let zx = stream.std_normal();
        let z = stream.std_normal();
        xs.push(spec.mu_x + spec.sigma_x * zx);
        ys.push(spec.mu_y + spec.sigma_y * (spec.rho * zx + noise_scale * z));
    }
    LossSample::new(xs, ys)
}

/// Draws `n` pairs from the quadratic model, two normal variates per pair.
///
/// # Errors
///
/// Invalid spec fields or `n = 0`.
pub fn sample_nonlinear(
    spec: &NonlinearPortfolioSpec,
    stream: &mut RngStream,
    n: usize,
) -> Result<LossSample> {
    spec.validate()?;
    check_count(n)?;
    let noise_scale = (1.0 - spec.rho * spec.rho).sqrt();
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let zx = stream.std_normal();
        let z = stream.std_normal();
        let x = spec.mu_x + spec.sigma_x * zx;
        let xi = spec.sigma_y * (spec.rho * zx + noise_scale * z);
        xs.push(x);
        ys.push(spec.delta * x + 0.5 * spec.gamma * x * x + xi);
    }
    LossSample::new(xs, ys)
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidParameter(
            "sample size must be at least 1".into(),
        ))
    } else {
        Ok(())
    }
}
