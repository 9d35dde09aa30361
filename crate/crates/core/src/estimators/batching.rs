//! Batching estimator: order statistics across within-batch conditional
//! picks, plus the distribution-free confidence interval.

use crate::dgmodel::LossSample;
use crate::error::{Error, Result};
use crate::estimators::check_prob;
use crate::numerics::inv_norm_cdf;

/// Batch layout for the batching estimator.
///
/// [`BatchConfig::new`] enforces the production invariants `k >= 2` and
/// `m >= 2`; the fields stay public so diagnostics can exercise degenerate
/// layouts (a single batch reduces the estimator to the naive conditional
/// pick).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchConfig {
    /// Number of batches.
    pub k: usize,
    /// Observations per batch.
    pub m: usize,
}

impl BatchConfig {
    /// Validates a batch layout for production use.
    ///
    /// # Errors
    ///
    /// Rejects `k < 2` or `m < 2`: a lone batch yields no across-batch order
    /// statistic and a lone observation per batch yields no within-batch one.
    pub fn new(k: usize, m: usize) -> Result<Self> {
        if k < 2 || m < 2 {
            return Err(Error::InvalidParameter(format!(
                "batch layout needs k >= 2 and m >= 2, got k = {k}, m = {m}"
            )));
        }
        Ok(BatchConfig { k, m })
    }

    /// Total observations consumed by this layout.
    pub fn total(&self) -> usize {
        self.k * self.m
    }
}

/// The `ceil(alpha * n)`-th smallest element, the usual VaR order statistic.
///
/// # Errors
///
/// Rejects an empty slice and `alpha` outside (0, 1).
pub fn var_order_stat(xs: &[f64], alpha: f64) -> Result<f64> {
    check_prob(alpha, "alpha")?;
    if xs.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot take an order statistic of an empty sample".into(),
        ));
    }
    let n = xs.len();
    let rank = ((alpha * n as f64).ceil() as usize).clamp(1, n);
    let mut work = xs.to_vec();
    let (_, value, _) = work.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(*value)
}

/// Batching estimate of CoVaR together with the per-batch conditional picks.
///
/// Each batch is sorted by X (stable, so ties keep sample order), the Y
/// paired with the batch's `ceil(alpha * m)`-th X is recorded, and the point
/// estimate is the `ceil(beta * k)`-th smallest of those k picks. The raw
/// picks come back in batch order so the caller can build an interval with
/// [`batching_ci`].
///
/// # Errors
///
/// Rejects samples shorter than `k * m`. Longer samples are truncated with a
/// logged warning, keeping the leading `k * m` observations.
pub fn batching_estimate(
    sample: &LossSample,
    cfg: &BatchConfig,
    alpha: f64,
    beta: f64,
) -> Result<(f64, Vec<f64>)> {
    check_prob(alpha, "alpha")?;
    check_prob(beta, "beta")?;
    if cfg.k == 0 || cfg.m == 0 {
        return Err(Error::InvalidParameter(format!(
            "batch layout needs k >= 1 and m >= 1, got k = {}, m = {}",
            cfg.k, cfg.m
        )));
    }
    let needed = cfg.total();
    if sample.len() < needed {
        return Err(Error::InvalidParameter(format!(
            "sample has {} observations but the {} x {} layout needs {needed}",
            sample.len(),
            cfg.k,
            cfg.m
        )));
    }
    if sample.len() > needed {
        log::warn!(
            "batching layout {} x {} uses {needed} of {} observations; discarding the tail",
            cfg.k,
            cfg.m,
            sample.len()
        );
    }

    let xs = sample.x();
    let ys = sample.y();
    let rank = ((alpha * cfg.m as f64).ceil() as usize).clamp(1, cfg.m);
    let mut batch: Vec<(f64, f64)> = Vec::with_capacity(cfg.m);
    let mut yhats = Vec::with_capacity(cfg.k);
    for i in 0..cfg.k {
        let lo = i * cfg.m;
        batch.clear();
        batch.extend((lo..lo + cfg.m).map(|j| (xs[j], ys[j])));
        batch.sort_by(|a, b| a.0.total_cmp(&b.0));
        yhats.push(batch[rank - 1].1);
    }
    let point = var_order_stat(&yhats, beta)?;
    Ok((point, yhats))
}

/// Distribution-free confidence interval from the per-batch picks.
///
/// The bounds are the order statistics at ranks `floor(K1)` and `ceil(K2)`
/// where `K1,2 = k * beta -/+ z * sqrt(beta * (1 - beta) * k)` and z is the
/// standard normal quantile at `1 - gamma_level / 2`. The construction needs
/// no distributional assumption on the picks beyond exchangeability.
///
/// # Errors
///
/// When a rank falls outside `1..=k` no valid interval exists at this batch
/// count; the error names the smallest k that works. Fewer than two picks or
/// parameters outside (0, 1) are rejected outright.
pub fn batching_ci(yhats: &[f64], beta: f64, gamma_level: f64) -> Result<(f64, f64)> {
    check_prob(beta, "beta")?;
    check_prob(gamma_level, "gamma_level")?;
    let k = yhats.len();
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "confidence interval needs at least 2 batch picks, got {k}"
        )));
    }
    let z = inv_norm_cdf(1.0 - gamma_level / 2.0)?;
    let spread_unit = z * (beta * (1.0 - beta)).sqrt();
    let kf = k as f64;
    let spread = spread_unit * kf.sqrt();
    let lo_rank = (kf * beta - spread).floor();
    let hi_rank = (kf * beta + spread).ceil();
    if lo_rank < 1.0 || hi_rank > kf {
        return Err(Error::InfeasibleCi {
            k,
            beta,
            level: 1.0 - gamma_level,
            min_k: smallest_feasible_k(beta, spread_unit),
        });
    }

    let mut sorted = yhats.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((sorted[lo_rank as usize - 1], sorted[hi_rank as usize - 1]))
}

/// Smallest batch count whose interval ranks stay inside `1..=k`.
///
/// Feasibility is monotone in k: since k is an integer, `ceil(K2) <= k` is
/// equivalent to `K2 <= k` and `floor(K1) >= 1` to `K1 >= 1`, and with
/// t = sqrt(k) both read "upward parabola in t exceeds zero". Solving each
/// for t gives a closed-form candidate; a short scan on the exact predicate
/// absorbs the floating-point boundary.
fn smallest_feasible_k(beta: f64, spread_unit: f64) -> usize {
    let s = spread_unit;
    let t_hi = s / (1.0 - beta);
    let t_lo = (s + (s * s + 4.0 * beta).sqrt()) / (2.0 * beta);
    let candidate = (t_hi.max(t_lo).powi(2)).ceil();
    let start = if candidate.is_finite() {
        (candidate as usize).saturating_sub(2).max(2)
    } else {
        return usize::MAX;
    };
    let feasible = |k: usize| {
        let kf = k as f64;
        let spread = s * kf.sqrt();
        (kf * beta - spread).floor() >= 1.0 && (kf * beta + spread).ceil() <= kf
    };
    (start..start.saturating_add(1024))
        .find(|&k| feasible(k))
        .unwrap_or(start)
}
