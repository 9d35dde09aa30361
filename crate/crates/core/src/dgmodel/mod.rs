//! Delta-gamma portfolio losses and their diagonal reduction.
//!
//! A raw model describes two portfolios over the same d risk factors through
//! first and second order sensitivities plus a factor covariance. The
//! reduction rotates factors so that X's quadratic part becomes diagonal:
//!
//! ```text
//! x = c1 + sum_j delta1[j] Z_j + gamma1[j] Z_j^2
//! y = c2 + sum_j delta2[j] Z_j + gamma2[j] Z_j^2
//! ```
//!
//! with i.i.d. standard normal Z (or, under a Student-t tail, Z_j replaced
//! by Z_j / W for a per-scenario chi-square mixing variable W). Dimensions
//! are ordered so `gamma1` ascends, putting the conditioning direction with
//! the strongest positive curvature last.

mod fixture;
mod generate;

pub use fixture::appendix_h_fixture;
pub use generate::{generate_raw_params, random_correlation};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cholesky, sym_eigen, sym_sandwich, Matrix, RngStream, SymMatrix};

/// Tail law of the common risk factors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailSpec {
    /// Multivariate normal factors.
    Normal,
    /// Multivariate Student-t factors: one chi-square shock per scenario
    /// divides every normal coordinate.
    StudentT { nu: u32 },
}

impl TailSpec {
    /// Rejects degrees of freedom that make the mixture undefined.
    pub fn validate(&self) -> Result<()> {
        match self {
            TailSpec::Normal => Ok(()),
            TailSpec::StudentT { nu: 0 } => Err(Error::InvalidParameter(
                "student-t tail needs nu >= 1".into(),
            )),
            TailSpec::StudentT { .. } => Ok(()),
        }
    }

    /// Draws the per-scenario scale divisor W (1 under a normal tail).
    pub(crate) fn draw_scale(&self, stream: &mut RngStream) -> Result<f64> {
        match *self {
            TailSpec::Normal => Ok(1.0),
            TailSpec::StudentT { nu } => {
                let chi2 = stream.chi_squared(nu)?;
                Ok((chi2 / f64::from(nu)).sqrt())
            }
        }
    }
}

/// Raw delta-gamma description of the (X, Y) loss pair.
#[derive(Clone, Debug)]
pub struct RawDeltaGamma {
    pub d: usize,
    /// Revaluation horizon; only enters through the theta terms.
    pub delta_t: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub delta1_bar: Vec<f64>,
    pub delta2_bar: Vec<f64>,
    pub gamma1_bar: SymMatrix,
    pub gamma2_bar: SymMatrix,
    /// Covariance of the factor moves over `delta_t`.
    pub sigma: SymMatrix,
}

impl RawDeltaGamma {
    fn validate(&self) -> Result<()> {
        let d = self.d;
        if d == 0 {
            return Err(Error::InvalidParameter("model dimension is zero".into()));
        }
        if self.delta1_bar.len() != d
            || self.delta2_bar.len() != d
            || self.gamma1_bar.dim() != d
            || self.gamma2_bar.dim() != d
            || self.sigma.dim() != d
        {
            return Err(Error::InvalidParameter(
                "raw model blocks disagree on the dimension".into(),
            ));
        }
        if !self.delta_t.is_finite() || self.delta_t <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "delta_t must be a positive real, got {}",
                self.delta_t
            )));
        }
        Ok(())
    }

    /// Quadratic losses at a raw factor move, before any rotation.
    pub fn loss(&self, delta_s: &[f64]) -> (f64, f64) {
        assert_eq!(delta_s.len(), self.d);
        let mut x = -self.theta1 * self.delta_t;
        let mut y = -self.theta2 * self.delta_t;
        for i in 0..self.d {
            x -= self.delta1_bar[i] * delta_s[i];
            y -= self.delta2_bar[i] * delta_s[i];
            for j in 0..self.d {
                x -= 0.5 * delta_s[i] * self.gamma1_bar.get(i, j) * delta_s[j];
                y -= 0.5 * delta_s[i] * self.gamma2_bar.get(i, j) * delta_s[j];
            }
        }
        (x, y)
    }
}

/// Shadow of the on-disk model document.
#[derive(Deserialize)]
struct ModelFile {
    d: usize,
    c1: f64,
    c2: f64,
    delta1: Vec<f64>,
    gamma1: Vec<f64>,
    delta2: Vec<f64>,
    gamma2: Vec<f64>,
}

/// Diagonal delta-gamma model for both portfolios.
///
/// Invariant: all four coefficient vectors share length `d`, and `gamma1`
/// is ascending, so `gamma1[d - 1]` is the largest X curvature. The
/// constructor establishes this by jointly permuting dimensions, which
/// leaves the loss distribution unchanged because the Z coordinates are
/// exchangeable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile")]
pub struct SimplifiedDeltaGamma {
    d: usize,
    c1: f64,
    c2: f64,
    delta1: Vec<f64>,
    gamma1: Vec<f64>,
    delta2: Vec<f64>,
    gamma2: Vec<f64>,
}

impl TryFrom<ModelFile> for SimplifiedDeltaGamma {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        let model = SimplifiedDeltaGamma::new(f.c1, f.c2, f.delta1, f.gamma1, f.delta2, f.gamma2)?;
        if model.d != f.d {
            return Err(Error::InvalidParameter(format!(
                "model file declares d = {} but carries vectors of length {}",
                f.d, model.d
            )));
        }
        Ok(model)
    }
}

impl SimplifiedDeltaGamma {
    /// Builds a model, canonicalising the dimension order by ascending
    /// `gamma1`.
    ///
    /// # Errors
    ///
    /// Mismatched vector lengths, an empty model or non-finite coefficients
    /// are rejected.
    pub fn new(
        c1: f64,
        c2: f64,
        delta1: Vec<f64>,
        gamma1: Vec<f64>,
        delta2: Vec<f64>,
        gamma2: Vec<f64>,
    ) -> Result<Self> {
        let d = delta1.len();
        if d == 0 {
            return Err(Error::InvalidParameter("model dimension is zero".into()));
        }
        if gamma1.len() != d || delta2.len() != d || gamma2.len() != d {
            return Err(Error::InvalidParameter(format!(
                "coefficient vectors disagree on length: {} / {} / {} / {}",
                delta1.len(),
                gamma1.len(),
                delta2.len(),
                gamma2.len()
            )));
        }
        let all = delta1
            .iter()
            .chain(&gamma1)
            .chain(&delta2)
            .chain(&gamma2)
            .chain([&c1, &c2]);
        for v in all {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(
                    "model coefficients must be finite".into(),
                ));
            }
        }

        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&i, &j| gamma1[i].total_cmp(&gamma1[j]));
        let pick = |v: &[f64]| -> Vec<f64> { order.iter().map(|&i| v[i]).collect() };
        Ok(SimplifiedDeltaGamma {
            d,
            c1,
            c2,
            delta1: pick(&delta1),
            gamma1: pick(&gamma1),
            delta2: pick(&delta2),
            gamma2: pick(&gamma2),
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn delta1(&self) -> &[f64] {
        &self.delta1
    }

    pub fn gamma1(&self) -> &[f64] {
        &self.gamma1
    }

    pub fn delta2(&self) -> &[f64] {
        &self.delta2
    }

    pub fn gamma2(&self) -> &[f64] {
        &self.gamma2
    }

    /// Largest X curvature, the coefficient the conditional weight
    /// construction pivots on.
    pub fn top_gamma1(&self) -> f64 {
        self.gamma1[self.d - 1]
    }
}

/// Serialise with the explicit dimension field the file format carries.
impl Serialize for ModelFileRef<'_> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let m = self.0;
        let mut st = s.serialize_struct("SimplifiedDeltaGamma", 7)?;
        st.serialize_field("d", &m.d)?;
        st.serialize_field("c1", &m.c1)?;
        st.serialize_field("c2", &m.c2)?;
        st.serialize_field("delta1", &m.delta1)?;
        st.serialize_field("gamma1", &m.gamma1)?;
        st.serialize_field("delta2", &m.delta2)?;
        st.serialize_field("gamma2", &m.gamma2)?;
        st.end()
    }
}

struct ModelFileRef<'a>(&'a SimplifiedDeltaGamma);

/// A paired sample of portfolio losses.
#[derive(Clone, Debug, PartialEq)]
pub struct LossSample {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl LossSample {
    /// # Errors
    ///
    /// The two vectors must have equal length.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidParameter(format!(
                "loss sample is not paired: {} x values vs {} y values",
                x.len(),
                y.len()
            )));
        }
        Ok(LossSample { x, y })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Output of the model reduction:  the diagonal model plus everything a
/// caller needs to judge how faithful the diagonal form is.
#[derive(Clone, Debug)]
pub struct Simplified {
    pub model: SimplifiedDeltaGamma,
    /// Factor transform C with C C^T = Sigma; raw losses at `C z` equal the
    /// diagonal losses at `z` (exactly for X, up to the residual for Y).
    pub transform: Matrix,
    /// Full transformed Y curvature `-1/2 C^T Gamma2 C`, of which the model
    /// keeps only the diagonal.
    pub y_curvature: SymMatrix,
    /// Frobenius norm of the off-diagonal part of `y_curvature`. Zero means
    /// the diagonal model reproduces Y exactly.
    pub y_curvature_residual: f64,
    /// False when no X curvature is positive; the conditional weight
    /// construction is then unavailable and only batching applies.
    pub is_capable: bool,
}

/// Rotates a raw model into diagonal form.
///
/// Factorises `Sigma = C~ C~^T`, diagonalises `-1/2 C~^T Gamma1 C~ = U B U^T`
/// and sets `C = C~ U`. X becomes exactly diagonal; Y keeps the diagonal of
/// its transformed curvature, with the discarded off-diagonal mass reported
/// in the result. Dimensions come out ordered by ascending `gamma1`.
///
/// # Errors
///
/// Propagates Cholesky and eigensolver failures, plus dimension mismatches.
pub fn simplify(raw: &RawDeltaGamma) -> Result<Simplified> {
    raw.validate()?;
    let ctilde = cholesky(&raw.sigma)?;
    let a = sym_sandwich(&ctilde, &raw.gamma1_bar, -0.5);
    let (u, gamma1) = sym_eigen(&a)?;
    let c = ctilde.mul(&u);

    let c1 = -raw.theta1 * raw.delta_t;
    let c2 = -raw.theta2 * raw.delta_t;
    let delta1: Vec<f64> = c.tr_mul_vec(&raw.delta1_bar).iter().map(|v| -v).collect();
    let delta2: Vec<f64> = c.tr_mul_vec(&raw.delta2_bar).iter().map(|v| -v).collect();

    let y_curvature = sym_sandwich(&c, &raw.gamma2_bar, -0.5);
    let d = raw.d;
    let gamma2: Vec<f64> = (0..d).map(|i| y_curvature.get(i, i)).collect();
    let mut off_sq = 0.0;
    for i in 0..d {
        for j in (i + 1)..d {
            off_sq += 2.0 * y_curvature.get(i, j) * y_curvature.get(i, j);
        }
    }

    let is_capable = gamma1[d - 1] > 0.0;
    if !is_capable {
        log::warn!(
            "no positive X curvature after reduction (max gamma1 = {:e}); \
             the conditional weight construction will be unavailable",
            gamma1[d - 1]
        );
    }
    let model = SimplifiedDeltaGamma::new(c1, c2, delta1, gamma1, delta2, gamma2)?;
    Ok(Simplified {
        model,
        transform: c,
        y_curvature,
        y_curvature_residual: off_sq.sqrt(),
        is_capable,
    })
}

/// Evaluates both diagonal losses at a factor vector `z` with scale
/// divisor `w` (use `w = 1` for the normal tail).
///
/// # Errors
///
/// `z` must have length `d` and `w` must be a positive real.
pub fn loss_from_z(model: &SimplifiedDeltaGamma, z: &[f64], w: f64) -> Result<(f64, f64)> {
    if z.len() != model.d {
        return Err(Error::InvalidParameter(format!(
            "factor vector has length {}, model has dimension {}",
            z.len(),
            model.d
        )));
    }
    if !w.is_finite() || w <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "scale divisor must be a positive real, got {w}"
        )));
    }
    Ok(loss_from_z_unchecked(model, z, w))
}

#[inline]
pub(crate) fn loss_from_z_unchecked(model: &SimplifiedDeltaGamma, z: &[f64], w: f64) -> (f64, f64) {
    let mut x = model.c1;
    let mut y = model.c2;
    for (j, &zj) in z.iter().enumerate() {
        let t = zj / w;
        let t2 = t * t;
        x += model.delta1[j] * t + model.gamma1[j] * t2;
        y += model.delta2[j] * t + model.gamma2[j] * t2;
    }
    (x, y)
}

/// Draws `n` paired losses from the diagonal model.
///
/// Per scenario the stream yields the d normal coordinates first, then the
/// chi-square draws for the Student-t scale (a fresh W every scenario, so
/// the scenarios stay i.i.d.).
///
/// # Errors
///
/// Rejects an invalid tail specification.
pub fn sample_losses(
    model: &SimplifiedDeltaGamma,
    tail: TailSpec,
    stream: &mut RngStream,
    n: usize,
) -> Result<LossSample> {
    tail.validate()?;
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut z = vec![0.0; model.d];
    for _ in 0..n {
        for slot in z.iter_mut() {
            *slot = stream.std_normal();
        }
        let w = tail.draw_scale(stream)?;
        let (x, y) = loss_from_z_unchecked(model, &z, w);
        xs.push(x);
        ys.push(y);
    }
    Ok(LossSample { x: xs, y: ys })
}

/// Reads a model document (see the serialised form of
/// [`SimplifiedDeltaGamma`]) from disk.
pub fn load_model(path: &std::path::Path) -> Result<SimplifiedDeltaGamma> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes a model document with full round-trip precision.
pub fn save_model(model: &SimplifiedDeltaGamma, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, model_to_string(model))?;
    Ok(())
}

/// Serialises a model to its on-disk document form.
pub fn model_to_string(model: &SimplifiedDeltaGamma) -> String {
    let mut text = serde_json::to_string_pretty(&ModelFileRef(model))
        .expect("model serialisation cannot fail");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_model() -> SimplifiedDeltaGamma {
        SimplifiedDeltaGamma::new(
            0.5,
            -0.25,
            vec![1.0, 2.0],
            vec![0.5, 1.5],
            vec![-1.0, 0.5],
            vec![0.25, -0.75],
        )
        .unwrap()
    }

    #[test]
    fn constructor_sorts_gamma1_ascending() {
        let m = SimplifiedDeltaGamma::new(
            0.0,
            0.0,
            vec![1.0, 2.0, 3.0],
            vec![0.9, -0.1, 0.4],
            vec![4.0, 5.0, 6.0],
            vec![7.0, 8.0, 9.0],
        )
        .unwrap();
        assert_eq!(m.gamma1(), &[-0.1, 0.4, 0.9]);
        assert_eq!(m.delta1(), &[2.0, 3.0, 1.0]);
        assert_eq!(m.delta2(), &[5.0, 6.0, 4.0]);
        assert_eq!(m.gamma2(), &[8.0, 9.0, 7.0]);
        assert_eq!(m.top_gamma1(), 0.9);
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        assert!(SimplifiedDeltaGamma::new(0.0, 0.0, vec![], vec![], vec![], vec![]).is_err());
        assert!(SimplifiedDeltaGamma::new(
            0.0,
            0.0,
            vec![1.0],
            vec![1.0, 2.0],
            vec![1.0],
            vec![1.0]
        )
        .is_err());
        assert!(SimplifiedDeltaGamma::new(
            0.0,
            0.0,
            vec![f64::NAN],
            vec![1.0],
            vec![1.0],
            vec![1.0]
        )
        .is_err());
    }

    #[test]
    fn loss_from_z_hand_value() {
        let m = toy_model();
        // gamma1 already ascending, so coordinates stay put.
        let (x, y) = loss_from_z(&m, &[1.0, -2.0], 1.0).unwrap();
        // x = 0.5 + 1*1 + 0.5*1 + 2*(-2) + 1.5*4 = 4.0
        assert!((x - 4.0).abs() < 1e-14);
        // y = -0.25 - 1 + 0.25 + 0.5*(-2) - 0.75*4 = -5.0
        assert!((y + 5.0).abs() < 1e-14);
    }

    #[test]
    fn loss_from_z_scale_divisor() {
        let m = toy_model();
        let (x2, _) = loss_from_z(&m, &[1.0, -2.0], 2.0).unwrap();
        let (x1, _) = loss_from_z(&m, &[0.5, -1.0], 1.0).unwrap();
        assert!((x2 - x1).abs() < 1e-14);
        assert!(loss_from_z(&m, &[1.0, 1.0], 0.0).is_err());
        assert!(loss_from_z(&m, &[1.0], 1.0).is_err());
    }

    #[test]
    fn sample_losses_is_deterministic_per_stream() {
        let m = toy_model();
        let a = sample_losses(&m, TailSpec::Normal, &mut RngStream::new(4, 9), 100).unwrap();
        let b = sample_losses(&m, TailSpec::Normal, &mut RngStream::new(4, 9), 100).unwrap();
        assert_eq!(a, b);
        let c = sample_losses(&m, TailSpec::Normal, &mut RngStream::new(4, 10), 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sample_losses_rejects_bad_tail() {
        let m = toy_model();
        let r = sample_losses(&m, TailSpec::StudentT { nu: 0 }, &mut RngStream::new(1, 0), 10);
        assert!(r.is_err());
    }

    #[test]
    fn model_document_round_trips_exactly() {
        let m = appendix_h_fixture();
        let text = model_to_string(&m);
        let back: SimplifiedDeltaGamma = serde_json::from_str(&text).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn model_file_dimension_mismatch_is_rejected() {
        let text = r#"{"d": 3, "c1": 0.0, "c2": 0.0,
            "delta1": [1.0, 2.0], "gamma1": [0.1, 0.2],
            "delta2": [0.0, 0.0], "gamma2": [0.0, 0.0]}"#;
        let parsed: std::result::Result<SimplifiedDeltaGamma, _> = serde_json::from_str(text);
        assert!(parsed.is_err());
    }
}
