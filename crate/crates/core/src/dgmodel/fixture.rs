//! The 50-dimensional reference model used throughout the experiment suite.
//!
//! These are the published coefficients of the simplified model (theta
//! terms vanish, so both constants are zero). Embedding them verbatim is
//! what makes results reproducible across implementations: the random
//! draws behind the original generation run are not recoverable, the
//! reduced coefficients are.

use super::SimplifiedDeltaGamma;

const DELTA1: [f64; 50] = [
    -2.04e-03, -5.56e-04, -3.06e-04, 1.94e-03, 7.03e-04, 1.32e-04, -1.75e-03,
    -6.79e-04, 9.27e-04, 2.14e-03, 8.05e-04, -1.58e-03, 4.74e-04, -2.06e-04,
    -1.67e-03, -4.66e-04, 6.03e-05, 1.46e-03, 3.17e-04, 1.32e-03, 1.96e-03,
    -2.95e-03, -1.13e-03, -7.05e-04, -1.14e-03, -2.91e-03, -9.88e-04, 5.80e-04,
    2.81e-04, 2.67e-03, 2.86e-03, 3.13e-03, -1.04e-04, 1.03e-03, 5.53e-04,
    -1.01e-03, -3.17e-03, 1.16e-03, -2.26e-04, 1.87e-03, 6.50e-04, 3.38e-03,
    1.88e-03, -3.42e-04, -3.97e-03, 1.94e-03, -1.61e-03, -6.50e-04, -3.70e-04,
    1.15e-03,
];

const GAMMA1: [f64; 50] = [
    -2.70e-02, -1.84e-02, -1.68e-02, -1.25e-02, -1.15e-02, -7.74e-03, -6.71e-03,
    -5.80e-03, -5.08e-03, -4.45e-03, -3.77e-03, -3.18e-03, -2.35e-03, -1.98e-03,
    -1.81e-03, -1.17e-03, -1.02e-03, -5.46e-04, -2.82e-04, -2.56e-04, -1.18e-04,
    -6.98e-05, -3.71e-05, -2.54e-05, -8.86e-07, 8.07e-06, 2.65e-05, 8.39e-05,
    1.21e-04, 1.25e-04, 3.03e-04, 5.26e-04, 7.85e-04, 9.46e-04, 1.51e-03,
    1.60e-03, 2.02e-03, 3.13e-03, 3.58e-03, 4.21e-03, 5.03e-03, 6.53e-03,
    7.33e-03, 7.93e-03, 1.18e-02, 1.43e-02, 1.70e-02, 2.20e-02, 3.28e-02,
    3.96e-01,
];

const DELTA2: [f64; 50] = [
    -4.27e-04, 7.47e-05, -2.28e-03, -6.62e-04, -1.85e-03, -2.44e-03, -3.18e-03,
    1.04e-03, 1.55e-03, -1.54e-03, 1.09e-03, -1.18e-03, -1.03e-03, 2.03e-04,
    -3.03e-03, 6.99e-04, -2.17e-03, -1.46e-03, 1.47e-03, -6.34e-04, 7.60e-04,
    3.49e-05, -3.45e-04, -4.75e-04, -6.02e-04, -3.13e-04, -9.54e-04, 1.49e-03,
    -1.65e-03, 1.90e-03, 1.01e-03, -5.71e-05, 3.75e-04, 1.63e-03, -9.59e-04,
    1.67e-03, 3.34e-03, 3.69e-03, -2.46e-04, 4.85e-03, 9.56e-04, 1.43e-03,
    4.48e-03, 3.79e-03, 2.61e-04, 4.53e-04, 3.03e-03, 3.88e-03, 2.92e-03,
    2.96e-03,
];

const GAMMA2: [f64; 50] = [
    -5.50e-02, -3.85e-02, -2.79e-02, -2.47e-02, -2.31e-02, -1.59e-02, -1.42e-02,
    -1.22e-02, -1.01e-02, -8.10e-03, -6.67e-03, -4.35e-03, -3.85e-03, -3.40e-03,
    -2.78e-03, -1.91e-03, -1.67e-03, -1.02e-03, -8.50e-04, -4.63e-04, -2.59e-04,
    -2.42e-04, -3.56e-05, -1.69e-05, -9.58e-06, 1.94e-06, 3.31e-05, 4.87e-05,
    2.78e-04, 5.07e-04, 1.02e-03, 1.33e-03, 1.65e-03, 2.21e-03, 3.32e-03,
    4.18e-03, 5.12e-03, 6.50e-03, 8.09e-03, 8.95e-03, 1.05e-02, 1.33e-02,
    1.45e-02, 1.94e-02, 2.87e-02, 3.32e-02, 3.61e-02, 3.93e-02, 5.78e-02,
    6.84e-02,
];

/// The embedded 50-dimensional reference model.
pub fn appendix_h_fixture() -> SimplifiedDeltaGamma {
    SimplifiedDeltaGamma::new(
        0.0,
        0.0,
        DELTA1.to_vec(),
        GAMMA1.to_vec(),
        DELTA2.to_vec(),
        GAMMA2.to_vec(),
    )
    .expect("embedded fixture coefficients are well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_shape_and_anchors() {
        let m = appendix_h_fixture();
        assert_eq!(m.dim(), 50);
        assert_eq!(m.c1(), 0.0);
        assert_eq!(m.c2(), 0.0);
        assert_eq!(m.delta1()[0], -2.04e-3);
        assert_eq!(m.gamma1()[49], 3.96e-1);
        assert_eq!(m.delta2()[49], 2.96e-3);
        assert_eq!(m.gamma2()[0], -5.50e-2);
    }

    #[test]
    fn fixture_gamma1_is_ascending_with_dominant_tail() {
        let m = appendix_h_fixture();
        assert!(m.gamma1().windows(2).all(|w| w[0] <= w[1]));
        let max = m.gamma1().iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(m.top_gamma1(), max);
        assert!(m.top_gamma1() > 0.0);
    }
}
