//! Oracles and fixture models shared by the integration suites.
//!
//! The numeric oracles are written from scratch on purpose: plain Simpson
//! quadrature over a series-expanded normal distribution, so that agreement
//! with the library is evidence rather than tautology. Frozen constants were
//! derived once with an unrelated quadrature implementation and each oracle
//! function is asserted against its constant before use.

#![allow(dead_code)]

use covar_core::dgmodel::SimplifiedDeltaGamma;

/// Expected value of the 190th order statistic of 200 standard normals.
///
/// This is the mean of the batching estimator at k = m = 200 and alpha =
/// beta = 0.95 when X and Y are independent standard normals: each batch
/// hands over an independent N(0, 1) draw and the estimator keeps the
/// 190th of the 200. Note the gap to the 0.95 quantile 1.6449, which is
/// the estimator's finite-k bias.
pub const EXPECTED_TOP_BATCH: f64 = 1.617604511049018;

/// 0.95 quantile of X = Z1 + Z2^2.
pub const D2_VAR: f64 = 4.162991042309569;

/// 0.95 quantile of Y given X = D2_VAR in the two-driver model.
pub const D2_COVAR: f64 = 8.925229552884351;

/// Conditional median of Y given X = D2_VAR.
pub const D2_MEDIAN: f64 = 5.817567945754243;

/// Conditional probability of Y <= 4 given X = D2_VAR.
pub const D2_CDF_AT_FOUR: f64 = 0.40652244535937976;

/// 0.95 quantile of Y in the block-independence model, where Y loads only
/// on the two drivers X ignores.
pub const BLOCK_VAR_Y: f64 = 3.917022276157539;

pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal distribution function by the odd power series
/// `Phi(x) = 1/2 + pdf(x) (x + x^3/3 + x^5/15 + ...)`, cut off where the
/// density underflows every integrand used here.
pub fn norm_cdf(x: f64) -> f64 {
    if x < -8.5 {
        return 0.0;
    }
    if x > 8.5 {
        return 1.0;
    }
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut odd = 1.0;
    loop {
        odd += 2.0;
        term *= x2 / odd;
        let next = sum + term;
        if next == sum {
            break;
        }
        sum = next;
    }
    0.5 + sum * norm_pdf(x)
}

/// Composite Simpson rule with `n` panels (`n` even).
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n >= 2 && n % 2 == 0, "Simpson needs an even panel count");
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + h * i as f64);
    }
    acc * h / 3.0
}

/// Root of a monotone function by bisection; `f(lo)` and `f(hi)` must
/// bracket zero.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    assert!(
        flo * f(hi) <= 0.0,
        "bisection bracket does not straddle the root"
    );
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        if (fmid >= 0.0) == (flo >= 0.0) {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Mean of the k-th order statistic of n standard normals, as the ratio of
/// two quadratures of the unnormalised order-statistic density (the huge
/// binomial factor cancels).
pub fn expected_order_stat(k: usize, n: usize) -> f64 {
    let weight = move |z: f64| {
        let p = norm_cdf(z);
        p.powi(k as i32 - 1) * (1.0 - p).powi((n - k) as i32) * norm_pdf(z)
    };
    let mass = simpson(weight, -8.0, 8.0, 40_000);
    let first = simpson(|z| z * weight(z), -8.0, 8.0, 40_000);
    first / mass
}

/// The two-driver test model X = Z1 + Z2^2, Y = Z1^2 + Z2 + Z2^2.
///
/// Everything about it is tractable by one-dimensional quadrature, which is
/// what makes it the reference point for the conditional-law machinery.
pub fn d2_model() -> SimplifiedDeltaGamma {
    SimplifiedDeltaGamma::new(
        0.0,
        0.0,
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![0.0, 1.0],
        vec![1.0, 1.0],
    )
    .expect("the two-driver model is well formed")
}

/// Distribution function of X = Z1 + Z2^2.
pub fn d2_x_cdf(x: f64) -> f64 {
    simpson(
        |z2| norm_pdf(z2) * norm_cdf(x - z2 * z2),
        -8.5,
        8.5,
        40_000,
    )
}

/// alpha-quantile of X = Z1 + Z2^2.
pub fn d2_var(alpha: f64) -> f64 {
    bisect(|x| d2_x_cdf(x) - alpha, -8.0, 40.0, 1e-11)
}

/// Conditional law of Y given X = x in the two-driver model.
///
/// Conditioning replaces Z2 by the roots +-u of u^2 = x - z1, each carrying
/// density weight pdf(u) / (2u). Substituting z1 = x - u^2 removes the 1/u
/// singularity and leaves the smooth weight pdf(x - u^2) pdf(u) on u >= 0.
/// The event Y <= y restricts each root branch y(u) = (x - u^2)^2 + u^2
/// +- u to a union of u-intervals, resolved up front so that every
/// quadrature runs on a smooth integrand.
pub fn d2_cond_cdf(x: f64, y: f64) -> f64 {
    let hi = (x + 8.75).sqrt();
    let weight = |u: f64| norm_pdf(x - u * u) * norm_pdf(u);
    let den = 2.0 * simpson(&weight, 0.0, hi, 20_000);
    let mut num = 0.0;
    for sign in [-1.0, 1.0] {
        let slack = move |u: f64| {
            let z1 = x - u * u;
            y - (z1 * z1 + u * u + sign * u)
        };
        for (a, b) in positive_intervals(slack, 0.0, hi) {
            num += simpson(&weight, a, b, 20_000);
        }
    }
    num / den
}

/// Maximal subintervals of [lo, hi] on which f is positive. Sign changes
/// are located on a 4096-cell scan and refined by bisection, so f must not
/// oscillate faster than the scan resolves.
fn positive_intervals(f: impl Fn(f64) -> f64 + Copy, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    const CELLS: usize = 4096;
    let at = |i: usize| lo + (hi - lo) * i as f64 / CELLS as f64;
    let mut edges = Vec::new();
    let mut inside = f(lo) > 0.0;
    if inside {
        edges.push(lo);
    }
    for i in 1..=CELLS {
        let now = f(at(i)) > 0.0;
        if now != inside {
            edges.push(bisect(f, at(i - 1), at(i), 1e-13));
            inside = now;
        }
    }
    if inside {
        edges.push(hi);
    }
    edges.chunks(2).map(|pair| (pair[0], pair[1])).collect()
}

/// CoVaR of the two-driver model by nesting the two quadrature inversions.
pub fn d2_covar(alpha: f64, beta: f64) -> f64 {
    let v = d2_var(alpha);
    bisect(|y| d2_cond_cdf(v, y) - beta, -5.0, 60.0, 1e-9)
}

/// Distribution function of Y = 0.1 + z1 + 0.6 z1^2 + 0.5 z2 + 0.3 z2^2,
/// the target portfolio of the block model. Conditionally on z2 the event
/// is a quadratic inequality in z1 whose solution set is the interval
/// between the two roots, or empty below the parabola's minimum.
pub fn block_y_cdf(y: f64) -> f64 {
    simpson(
        |z2| {
            let c = y - 0.1 - 0.5 * z2 - 0.3 * z2 * z2;
            let disc = 1.0 + 2.4 * c;
            if disc <= 0.0 {
                return 0.0;
            }
            let r = disc.sqrt();
            norm_pdf(z2) * (norm_cdf((-1.0 + r) / 1.2) - norm_cdf((-1.0 - r) / 1.2))
        },
        -8.5,
        8.5,
        200_000,
    )
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    let mut a: Vec<f64> = a.to_vec();
    let mut b: Vec<f64> = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut gap: f64 = 0.0;
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        gap = gap.max((i as f64 / na - j as f64 / nb).abs());
    }
    gap
}

/// Four-driver model whose Y loads only on the two drivers X ignores, so
/// the conditional law of Y given any X value is Y's own law.
pub fn block_model() -> SimplifiedDeltaGamma {
    SimplifiedDeltaGamma::new(
        0.0,
        0.1,
        vec![0.0, 0.0, 0.4, 0.3],
        vec![0.0, 0.0, 0.2, 0.5],
        vec![1.0, 0.5, 0.0, 0.0],
        vec![0.6, 0.3, 0.0, 0.0],
    )
    .expect("the block model is well formed")
}

/// Three-driver model with mixed curvature signs for the conditional-law
/// comparisons.
pub fn d3_model() -> SimplifiedDeltaGamma {
    SimplifiedDeltaGamma::new(
        0.05,
        -0.1,
        vec![0.2, -0.1, 0.3],
        vec![-0.2, 0.1, 0.6],
        vec![0.5, 0.3, -0.2],
        vec![0.4, -0.1, 0.2],
    )
    .expect("the three-driver model is well formed")
}

/// Two-driver model used with the Student-t tail.
pub fn heavy_d2_model() -> SimplifiedDeltaGamma {
    SimplifiedDeltaGamma::new(
        0.0,
        0.05,
        vec![0.3, 0.1],
        vec![0.1, 0.4],
        vec![-0.2, 0.6],
        vec![0.3, 0.2],
    )
    .expect("the heavy-tail model is well formed")
}
