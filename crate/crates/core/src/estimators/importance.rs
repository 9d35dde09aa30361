//! Importance-weighted estimator: exact conditioning on the VaR level.
//!
//! Given all risk factors but the last, the conditioning event "X equals the
//! level x" pins the last factor to the roots of a quadratic. Each scenario
//! therefore contributes at most two loss values, weighted by the factor
//! density over the gradient magnitude at the crossing. The weighted
//! quantile of those contributions estimates CoVaR without the ε-band bias
//! of kernel or batching approaches.

use std::collections::BTreeMap;

use crate::dgmodel::{
    loss_from_z_unchecked, sample_losses, LossSample, SimplifiedDeltaGamma, TailSpec,
};
use crate::error::{Error, Result};
use crate::estimators::{check_prob, EstimateReport};
use crate::numerics::{norm_pdf, t_quantile, RngStream};

use super::batching::var_order_stat;

/// Two-stage sample split for the importance-weighted estimator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IsConfig {
    /// Stage-1 observations used to estimate the conditioning VaR.
    pub n1: usize,
    /// Stage-2 conditioning scenarios.
    pub n2: usize,
    /// Sectioning batches for the confidence interval.
    pub b: usize,
}

impl IsConfig {
    /// Validates a two-stage split.
    ///
    /// # Errors
    ///
    /// Both stages need at least one observation and `b` must be at least 2
    /// and divide `n2`, so the sections have equal size.
    pub fn new(n1: usize, n2: usize, b: usize) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "both stages need samples, got n1 = {n1}, n2 = {n2}"
            )));
        }
        if b < 2 || !n2.is_multiple_of(b) {
            return Err(Error::InvalidParameter(format!(
                "sectioning needs b >= 2 dividing n2, got b = {b}, n2 = {n2}"
            )));
        }
        Ok(IsConfig { n1, n2, b })
    }

    /// Total observations consumed by this split.
    pub fn total(&self) -> usize {
        self.n1 + self.n2
    }
}

/// Crossing solution of one conditioning scenario.
///
/// When `crossed` is false the level sits at or below the scenario's
/// conditional minimum: the root fields are NaN, `lambda` is 0, both weights
/// are 0 and the loss fields hold the +infinity sentinel. Consumers must
/// branch on `crossed` before touching the roots.
#[derive(Clone, Copy, Debug)]
pub struct RootWeights {
    /// Whether the level is attainable from this scenario.
    pub crossed: bool,
    /// Smaller root of the crossing quadratic.
    pub r1: f64,
    /// Larger root.
    pub r2: f64,
    /// Gradient magnitude shared by both crossings.
    pub lambda: f64,
    /// Density weight at `r1`.
    pub q1: f64,
    /// Density weight at `r2`.
    pub q2: f64,
    /// Y loss at `r1`.
    pub y1: f64,
    /// Y loss at `r2`.
    pub y2: f64,
}

/// Solves `xi1 + b z + a z^2 = x` for the last factor and weights the roots.
///
/// The conditional minimum is `g* = xi1 - b^2 / (4a)`. Below or at that
/// level nothing crosses; `x = g*` exactly is a probability-zero event and
/// counts as not crossing. Otherwise the two roots carry weights
/// `norm_pdf(r) / lambda` with `lambda = sqrt(b^2 + 4a(x - xi1))`, the
/// magnitude of the quadratic's derivative at either root. Loss fields stay
/// at the sentinel; [`is_scenario`] fills them.
///
/// # Errors
///
/// Needs `a > 0` (the construction pivots on positive curvature of the last
/// coordinate) and finite `xi1`, `b`, `x`.
pub fn conditional_root_weights(xi1: f64, b: f64, a: f64, x: f64) -> Result<RootWeights> {
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::CurvatureNotPositive { gamma: a });
    }
    if !xi1.is_finite() || !b.is_finite() || !x.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "crossing solve needs finite inputs, got xi1 = {xi1}, b = {b}, x = {x}"
        )));
    }
    // disc = lambda^2, and disc <= 0 is exactly x <= g*.
    let disc = b * b + 4.0 * a * (x - xi1);
    if disc.is_nan() || disc <= 0.0 {
        return Ok(RootWeights {
            crossed: false,
            r1: f64::NAN,
            r2: f64::NAN,
            lambda: 0.0,
            q1: 0.0,
            q2: 0.0,
            y1: f64::INFINITY,
            y2: f64::INFINITY,
        });
    }
    let lambda = disc.sqrt();
    // Cancellation-free quadratic: u keeps the large-magnitude numerator,
    // the companion root comes from the root product (xi1 - x) / a.
    let u = -0.5 * (b + lambda.copysign(b));
    let ru = u / a;
    let rc = (xi1 - x) / u;
    let (r1, r2) = if ru <= rc { (ru, rc) } else { (rc, ru) };
    Ok(RootWeights {
        crossed: true,
        r1,
        r2,
        lambda,
        q1: norm_pdf(r1) / lambda,
        q2: norm_pdf(r2) / lambda,
        y1: f64::INFINITY,
        y2: f64::INFINITY,
    })
}

/// Draws one conditioning scenario and solves it at level `v_alpha_hat`.
///
/// The stream yields the first d-1 normal coordinates, then the tail scale
/// W. Conditioning replaces the last coordinate by the crossing roots, so
/// the scenario's effective linear and quadratic terms are `delta1[d-1]/W`
/// and `gamma1[d-1]/W^2`, and on a crossing the Y losses are evaluated with
/// the last coordinate substituted by the roots.
///
/// # Errors
///
/// Propagates the curvature error when `gamma1[d-1] <= 0` and rejects an
/// invalid tail or non-finite level.
pub fn is_scenario(
    model: &SimplifiedDeltaGamma,
    tail: TailSpec,
    v_alpha_hat: f64,
    stream: &mut RngStream,
) -> Result<RootWeights> {
    tail.validate()?;
    if !v_alpha_hat.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "conditioning level must be finite, got {v_alpha_hat}"
        )));
    }
    let mut z = vec![0.0; model.dim()];
    scenario_core(model, tail, v_alpha_hat, stream, &mut z)
}

/// Scenario body with a caller-owned factor buffer; `z` must be zeroed in
/// the last slot so the partial losses exclude the conditioned coordinate.
fn scenario_core(
    model: &SimplifiedDeltaGamma,
    tail: TailSpec,
    v_alpha_hat: f64,
    stream: &mut RngStream,
    z: &mut [f64],
) -> Result<RootWeights> {
    let d = model.dim();
    for slot in z[..d - 1].iter_mut() {
        *slot = stream.std_normal();
    }
    z[d - 1] = 0.0;
    let w = tail.draw_scale(stream)?;

    let (xi1, y_base) = loss_from_z_unchecked(model, z, w);
    let b_eff = model.delta1()[d - 1] / w;
    let a_eff = model.top_gamma1() / (w * w);
    let mut rw = conditional_root_weights(xi1, b_eff, a_eff, v_alpha_hat)?;
    if rw.crossed {
        let dy = model.delta2()[d - 1];
        let gy = model.gamma2()[d - 1];
        let t1 = rw.r1 / w;
        let t2 = rw.r2 / w;
        rw.y1 = y_base + dy * t1 + gy * t1 * t1;
        rw.y2 = y_base + dy * t2 + gy * t2 * t2;
    }
    Ok(rw)
}

/// Quantile of a discrete distribution given by values and weights.
///
/// Weights are normalised to total mass 1, the pairs are ranked by value,
/// and the result is the first value whose cumulative mass exceeds `beta`.
/// The final cumulative mass is pinned to 1 so rounding in the running sum
/// can never leave the walk short of the top value. `+inf` values are legal
/// carriers of zero or positive mass (non-crossing sentinels).
///
/// # Errors
///
/// All-zero weights have no quantile; a `beta` reached only inside infinite
/// values reports how much mass the finite ones carry. NaN values, negative
/// or non-finite weights, and mismatched lengths are rejected.
pub fn weighted_quantile(values: &[f64], weights: &[f64], beta: f64) -> Result<f64> {
    check_prob(beta, "beta")?;
    if values.is_empty() || values.len() != weights.len() {
        return Err(Error::InvalidParameter(format!(
            "need equally many values and weights, got {} and {}",
            values.len(),
            weights.len()
        )));
    }
    let mut total = 0.0;
    for (&v, &w) in values.iter().zip(weights) {
        if v.is_nan() {
            return Err(Error::InvalidParameter(
                "quantile values must not be NaN".into(),
            ));
        }
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "weights must be finite and non-negative, got {w}"
            )));
        }
        total += w;
    }
    if !total.is_finite() {
        return Err(Error::InvalidParameter(
            "total weight mass overflowed".into(),
        ));
    }
    if total <= 0.0 {
        return Err(Error::DegenerateWeights {
            detail: "weights sum to zero, no value carries mass".into(),
        });
    }

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let last = order.len() - 1;
    let mut cum = 0.0;
    for (pos, &i) in order.iter().enumerate() {
        cum += weights[i] / total;
        if pos == last {
            cum = 1.0;
        }
        if cum > beta {
            let v = values[i];
            if v == f64::INFINITY {
                let finite: f64 = values
                    .iter()
                    .zip(weights)
                    .filter(|(v, _)| v.is_finite())
                    .map(|(_, &w)| w)
                    .sum();
                return Err(Error::InfiniteQuantile {
                    beta,
                    crossed_mass: finite / total,
                });
            }
            return Ok(v);
        }
    }
    unreachable!("final cumulative mass is pinned to 1 > beta");
}

/// Confidence interval around `point` from per-section re-estimates.
///
/// The sections re-run the estimator on disjoint scenario blocks sharing the
/// same stage-1 VaR; their spread around the full-sample point scaled by the
/// Student-t quantile with b-1 degrees of freedom gives the interval
/// `point ± t * S / sqrt(b)`.
///
/// # Errors
///
/// Needs at least two finite sections and `gamma_level` in (0, 1).
pub fn sectioning_ci(section_points: &[f64], point: f64, gamma_level: f64) -> Result<(f64, f64)> {
    check_prob(gamma_level, "gamma_level")?;
    let b = section_points.len();
    if b < 2 {
        return Err(Error::InvalidParameter(format!(
            "sectioning needs at least 2 sections, got {b}"
        )));
    }
    if !point.is_finite() || section_points.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidParameter(
            "section estimates must be finite".into(),
        ));
    }
    let bf = b as f64;
    let ss: f64 = section_points
        .iter()
        .map(|p| (p - point) * (p - point))
        .sum();
    let s = (ss / (bf - 1.0)).sqrt();
    let t = t_quantile(1.0 - gamma_level / 2.0, (b - 1) as u32)?;
    let half = t * s / bf.sqrt();
    Ok((point - half, point + half))
}

/// Two-stage importance-weighted CoVaR estimate with a sectioning interval.
///
/// Stage 1 estimates the conditioning VaR from `cfg.n1` plain samples; stage
/// 2 solves `cfg.n2` conditioning scenarios at that level; stage 3 takes the
/// weighted quantile of the 2 n2 crossing losses. The interval sections the
/// stage-2 scenarios into `cfg.b` consecutive blocks that all reuse the
/// stage-1 VaR. Stage 1 consumes substream 0 of `stream` and scenario i of
/// stage 2 consumes substream i of substream 1, so reports are reproducible
/// bit for bit from `(model, tail, cfg, seed)`.
///
/// Diagnostics report the estimated VaR (`v_alpha_hat`), the fraction of
/// scenarios that crossed it (`crossed_fraction`) and the sizes `n1`, `n2`,
/// `b`.
///
/// # Errors
///
/// A level never crossed by any scenario is reported as degenerate (the
/// stage-1 estimate probably sits below the scenario minima; grow `n1`).
/// Invalid splits, tails or probability parameters are rejected.
pub fn is_estimate(
    model: &SimplifiedDeltaGamma,
    tail: TailSpec,
    cfg: &IsConfig,
    alpha: f64,
    beta: f64,
    level: f64,
    stream: &RngStream,
) -> Result<EstimateReport> {
    check_prob(alpha, "alpha")?;
    check_prob(beta, "beta")?;
    check_prob(level, "level")?;
    tail.validate()?;
    IsConfig::new(cfg.n1, cfg.n2, cfg.b)?;

    let mut stage1 = stream.substream(0);
    let first = sample_losses(model, tail, &mut stage1, cfg.n1)?;
    let v_hat = var_order_stat(first.x(), alpha)?;

    let stage2 = stream.substream(1);
    let mut z = vec![0.0; model.dim()];
    let mut values = Vec::with_capacity(2 * cfg.n2);
    let mut weights = Vec::with_capacity(2 * cfg.n2);
    let mut crossed = 0usize;
    for i in 0..cfg.n2 {
        let mut scenario = stage2.substream(i as u64);
        let rw = scenario_core(model, tail, v_hat, &mut scenario, &mut z)?;
        if rw.crossed {
            crossed += 1;
        }
        values.push(rw.y1);
        weights.push(rw.q1);
        values.push(rw.y2);
        weights.push(rw.q2);
    }
    if crossed == 0 {
        return Err(Error::DegenerateWeights {
            detail: format!(
                "none of the {} scenarios crossed v_alpha_hat = {v_hat:.6e}; \
                 increase n1 or check the model curvature",
                cfg.n2
            ),
        });
    }

    let point = weighted_quantile(&values, &weights, beta)?;

    let per_section = cfg.n2 / cfg.b;
    let mut sections = Vec::with_capacity(cfg.b);
    for j in 0..cfg.b {
        let lo = 2 * j * per_section;
        let hi = 2 * (j + 1) * per_section;
        sections.push(weighted_quantile(
            &values[lo..hi],
            &weights[lo..hi],
            beta,
        )?);
    }
    let (ci_low, ci_high) = sectioning_ci(&sections, point, 1.0 - level)?;

    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("v_alpha_hat".to_string(), v_hat);
    diagnostics.insert(
        "crossed_fraction".to_string(),
        crossed as f64 / cfg.n2 as f64,
    );
    diagnostics.insert("n1".to_string(), cfg.n1 as f64);
    diagnostics.insert("n2".to_string(), cfg.n2 as f64);
    diagnostics.insert("b".to_string(), cfg.b as f64);
    Ok(EstimateReport {
        point,
        ci_low,
        ci_high,
        level,
        diagnostics,
    })
}

/// Conditional distribution function of Y at the exact level `x`.
///
/// Averages the crossing indicators `I{Y <= y}` with the scenario weights
/// over `n2` scenarios, scenario i consuming substream i of `stream`. The
/// numerator and denominator accumulate in lockstep, so the ratio is exactly
/// 1 whenever every crossing loss clears `y` and never exceeds 1.
///
/// # Errors
///
/// Degenerate when no scenario crosses `x`; invalid tails, a non-finite `x`
/// or a NaN threshold are rejected.
pub fn is_conditional_cdf(
    model: &SimplifiedDeltaGamma,
    tail: TailSpec,
    x: f64,
    y: f64,
    n2: usize,
    stream: &RngStream,
) -> Result<f64> {
    tail.validate()?;
    if n2 == 0 {
        return Err(Error::InvalidParameter(
            "need at least one scenario".into(),
        ));
    }
    if !x.is_finite() || y.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "need a finite level and a non-NaN threshold, got x = {x}, y = {y}"
        )));
    }
    let mut z = vec![0.0; model.dim()];
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n2 {
        let mut scenario = stream.substream(i as u64);
        let rw = scenario_core(model, tail, x, &mut scenario, &mut z)?;
        if rw.y1 <= y {
            num += rw.q1;
        }
        den += rw.q1;
        if rw.y2 <= y {
            num += rw.q2;
        }
        den += rw.q2;
    }
    if den <= 0.0 {
        return Err(Error::DegenerateWeights {
            detail: format!("no scenario crossed x = {x:.6e} in {n2} draws"),
        });
    }
    Ok(num / den)
}

/// Brute-force conditional CDF over an ε-band around `x`.
///
/// Counts `Y <= y` among the observations with `|X - x| <= eps`. This is the
/// assumption-free oracle the exact-conditioning estimator is tested
/// against; it needs no model, only a sample.
///
/// # Errors
///
/// An empty band is reported with the offending `eps`; `eps` must be a
/// positive real, `x` finite and `y` not NaN.
pub fn band_conditional_cdf(sample: &LossSample, x: f64, y: f64, eps: f64) -> Result<f64> {
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "band width must be a positive real, got {eps}"
        )));
    }
    if !x.is_finite() || y.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "need a finite level and a non-NaN threshold, got x = {x}, y = {y}"
        )));
    }
    let mut inside = 0usize;
    let mut below = 0usize;
    for (&xi, &yi) in sample.x().iter().zip(sample.y()) {
        if (xi - x).abs() <= eps {
            inside += 1;
            if yi <= y {
                below += 1;
            }
        }
    }
    if inside == 0 {
        return Err(Error::EmptyBand { x, eps });
    }
    Ok(below as f64 / inside as f64)
}

/// Writes crossing solutions as CSV for offline inspection.
///
/// Columns: `scenario,crossed,r1,r2,lambda,q1,q2,y1,y2`. Non-finite fields
/// (the NaN roots and infinity sentinels of non-crossing rows) are written
/// as empty cells rather than float sentinels, which round-trip poorly
/// across CSV consumers; the weights stay numeric zeros.
pub fn root_weights_csv<W: std::io::Write>(rows: &[RootWeights], mut out: W) -> Result<()> {
    fn field(v: f64) -> String {
        if v.is_finite() {
            format!("{v}")
        } else {
            String::new()
        }
    }
    writeln!(out, "scenario,crossed,r1,r2,lambda,q1,q2,y1,y2")?;
    for (i, rw) in rows.iter().enumerate() {
        writeln!(
            out,
            "{i},{},{},{},{},{},{},{},{}",
            u8::from(rw.crossed),
            field(rw.r1),
            field(rw.r2),
            field(rw.lambda),
            field(rw.q1),
            field(rw.q2),
            field(rw.y1),
            field(rw.y2),
        )?;
    }
    Ok(())
}
