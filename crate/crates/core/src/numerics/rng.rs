//! Deterministic, splittable random number streams.
//!
//! Every stochastic routine in this crate draws from an [`RngStream`], which
//! is fully determined by a user seed and a stream identifier. Replications,
//! bootstrap replicates and generator retries each get their own stream, so
//! results never depend on scheduling or worker count: stream `(seed, id)`
//! always yields the same sequence of draws.
//!
//! The generator is SplitMix64: the per-stream state starts at a point
//! derived by hashing `(seed, stream_id)` and advances by the 64-bit golden
//! ratio each draw. Child streams re-hash the parent's origin with the child
//! index, which makes them independent of how much the parent has consumed.

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finaliser; bijective, so distinct inputs stay distinct.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A deterministic stream of pseudo-random draws.
///
/// Cloning copies the cursor, so a clone replays the remainder of the
/// sequence. Use [`RngStream::substream`] when independent draws are needed.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    origin: u64,
    counter: u64,
}

impl RngStream {
    /// Opens the stream identified by `(seed, stream_id)` at its start.
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let origin = mix64(mix64(seed ^ GOLDEN_GAMMA) ^ mix64(stream_id.wrapping_add(GOLDEN_GAMMA)));
        RngStream {
            seed,
            stream_id,
            origin,
            counter: 0,
        }
    }

    /// Seed this stream was created with.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream identifier this stream was created with.
    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Number of raw 64-bit draws consumed so far.
    pub fn draws(&self) -> u64 {
        self.counter
    }

    /// Derives an independent child stream.
    ///
    /// The child depends only on the parent's identity and `child_id`, never
    /// on how many draws the parent has made, so substream layouts are stable
    /// across refactorings of the consuming code.
    pub fn substream(&self, child_id: u64) -> RngStream {
        RngStream {
            seed: self.seed,
            stream_id: child_id,
            origin: mix64(self.origin ^ mix64(child_id.wrapping_add(GOLDEN_GAMMA))),
            counter: 0,
        }
    }

    /// Next raw 64-bit value.
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter += 1;
        mix64(self.origin.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform draw on `[0, 1)` with 53-bit resolution.
    #[inline]
    pub fn uniform01(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (self.next_u64() >> 11) as f64 * SCALE
    }

    /// Standard normal draw by inversion.
    ///
    /// Exactly one uniform is consumed per normal. The uniform is centred on
    /// the representable grid (`(k + 1/2) / 2^53`), which keeps the argument
    /// of the inverse CDF strictly inside `(0, 1)`.
    #[inline]
    pub fn std_normal(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        let p = ((self.next_u64() >> 11) as f64 + 0.5) * SCALE;
        super::special::inv_norm_cdf_unchecked(p)
    }

    /// Chi-squared draw with `nu` degrees of freedom.
    ///
    /// Uses the Marsaglia-Tsang gamma sampler on `Gamma(nu/2, 2)`. Each
    /// trial consumes one normal and one uniform; the number of trials is
    /// itself part of the deterministic stream, so replays are exact.
    ///
    /// # Errors
    ///
    /// `nu == 0` is rejected as an invalid parameter.
    pub fn chi_squared(&mut self, nu: u32) -> Result<f64> {
        if nu == 0 {
            return Err(Error::InvalidParameter(
                "chi-squared degrees of freedom must be positive".into(),
            ));
        }
        let alpha = f64::from(nu) / 2.0;
        Ok(2.0 * self.gamma_unit(alpha))
    }

    /// Gamma(alpha, 1) via Marsaglia-Tsang, with the alpha < 1 boost.
    fn gamma_unit(&mut self, alpha: f64) -> f64 {
        if alpha < 1.0 {
            // Boost: Gamma(a) = Gamma(a + 1) * U^(1/a).
            let g = self.gamma_unit(alpha + 1.0);
            let u = self.uniform01();
            return g * u.powf(1.0 / alpha);
        }
        let d = alpha - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.std_normal();
            let t = 1.0 + c * x;
            if t <= 0.0 {
                continue;
            }
            let v = t * t * t;
            let u = self.uniform01();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 {
                return d * v;
            }
            if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        (mean, var)
    }

    /// Two-sample Kolmogorov-Smirnov distance.
    fn ks_distance(a: &mut [f64], b: &mut [f64]) -> f64 {
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let (mut i, mut j, mut d) = (0usize, 0usize, 0f64);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            let gap = (i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs();
            if gap > d {
                d = gap;
            }
        }
        d
    }

    #[test]
    fn same_identity_replays_same_sequence() {
        let mut a = RngStream::new(42, 7);
        let mut b = RngStream::new(42, 7);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn distinct_streams_disagree() {
        let mut a = RngStream::new(42, 0);
        let mut b = RngStream::new(42, 1);
        let same = (0..1000).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn uniform_moments() {
        let mut s = RngStream::new(1, 0);
        let xs: Vec<f64> = (0..1_000_000).map(|_| s.uniform01()).collect();
        let (mean, var) = moments(&xs);
        assert!((mean - 0.5).abs() < 2e-3, "mean {mean}");
        assert!((var - 1.0 / 12.0).abs() < 1e-3, "var {var}");
        assert!(xs.iter().all(|&x| (0.0..1.0).contains(&x)));
    }

    #[test]
    fn normal_moments() {
        let mut s = RngStream::new(1, 0);
        let xs: Vec<f64> = (0..1_000_000).map(|_| s.std_normal()).collect();
        let (mean, var) = moments(&xs);
        assert!(mean.abs() < 4e-3, "mean {mean}");
        assert!((var - 1.0).abs() < 1e-2, "var {var}");
    }

    #[test]
    fn chi_squared_moments() {
        let mut s = RngStream::new(3, 0);
        let xs: Vec<f64> = (0..1_000_000).map(|_| s.chi_squared(6).unwrap()).collect();
        let (mean, _) = moments(&xs);
        assert!((mean - 6.0).abs() < 2e-2, "mean {mean}");
    }

    #[test]
    fn chi_squared_one_matches_squared_normals() {
        let mut s = RngStream::new(9, 0);
        let mut direct: Vec<f64> = (0..100_000).map(|_| s.chi_squared(1).unwrap()).collect();
        let mut t = RngStream::new(9, 1);
        let mut squared: Vec<f64> = (0..100_000)
            .map(|_| {
                let z = t.std_normal();
                z * z
            })
            .collect();
        let d = ks_distance(&mut direct, &mut squared);
        assert!(d <= 0.01, "KS distance {d}");
    }

    #[test]
    fn chi_squared_rejects_zero_dof() {
        let mut s = RngStream::new(1, 0);
        assert!(s.chi_squared(0).is_err());
    }

    #[test]
    fn cross_stream_correlation_is_negligible() {
        let mut a = RngStream::new(5, 0);
        let mut b = RngStream::new(5, 1);
        let xs: Vec<f64> = (0..100_000).map(|_| a.std_normal()).collect();
        let ys: Vec<f64> = (0..100_000).map(|_| b.std_normal()).collect();
        let (mx, vx) = moments(&xs);
        let (my, vy) = moments(&ys);
        let cov = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>()
            / xs.len() as f64;
        let corr = cov / (vx * vy).sqrt();
        assert!(corr.abs() <= 0.01, "corr {corr}");
    }

    #[test]
    fn substreams_ignore_parent_consumption() {
        let parent = RngStream::new(11, 2);
        let mut consumed = parent.clone();
        for _ in 0..57 {
            consumed.next_u64();
        }
        let mut c1 = parent.substream(4);
        let mut c2 = consumed.substream(4);
        for _ in 0..100 {
            assert_eq!(c1.next_u64(), c2.next_u64());
        }
    }
}
