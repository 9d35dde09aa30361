//! Dense symmetric matrices, Cholesky factorisation and a cyclic Jacobi
//! eigensolver. Dimensions stay small (portfolio models top out around
//! d = 50), so simplicity and reproducibility win over blocking tricks.

use crate::error::{Error, Result};

/// A general dense matrix, row major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Matrix {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ncols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.ncols + j] = v;
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.ncols, rhs.nrows, "inner dimensions must agree");
        let mut out = Matrix::zeros(self.nrows, rhs.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.ncols {
                    out.data[i * rhs.ncols + j] += a * rhs.get(k, j);
                }
            }
        }
        out
    }

    /// Matrix-vector product `self * x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.ncols, x.len());
        (0..self.nrows)
            .map(|i| (0..self.ncols).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// Transposed matrix-vector product `self^T * x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.nrows, x.len());
        (0..self.ncols)
            .map(|j| (0..self.nrows).map(|i| self.get(i, j) * x[i]).sum())
            .collect()
    }
}

/// A symmetric matrix with the mirror equality holding exactly as stored.
///
/// Mutation goes through [`SymMatrix::set`], which writes both triangle
/// entries, so `get(i, j) == get(j, i)` is bitwise true by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    d: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(d: usize) -> Self {
        SymMatrix {
            d,
            data: vec![0.0; d * d],
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = SymMatrix::zeros(d);
        for i in 0..d {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds from explicit rows, rejecting anything not exactly symmetric.
    ///
    /// # Errors
    ///
    /// Ragged input or `rows[i][j] != rows[j][i]` (bitwise) is rejected.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::InvalidParameter("empty matrix".into()));
        }
        let mut m = SymMatrix::zeros(d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidParameter(format!(
                    "row {i} has length {} in a {d} x {d} matrix",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if rows[j][i].to_bits() != v.to_bits() {
                    return Err(Error::InvalidParameter(format!(
                        "asymmetric entry at ({i}, {j})"
                    )));
                }
                m.data[i * d + j] = v;
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.d + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.d + j] = v;
        self.data[j * self.d + i] = v;
    }

    /// Largest entry magnitude (the max norm).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.d).map(|i| self.get(i, i)).sum()
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix {
            nrows: self.d,
            ncols: self.d,
            data: self.data.clone(),
        }
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
///
/// Pivots are compared against `1e-12` times the largest diagonal entry;
/// anything at or below that threshold fails the factorisation rather than
/// producing a garbage factor.
///
/// # Errors
///
/// [`Error::NotPositiveDefinite`] carries the failing column and pivot.
pub fn cholesky(sigma: &SymMatrix) -> Result<Matrix> {
    let d = sigma.dim();
    let max_diag = (0..d).fold(0.0f64, |m, i| m.max(sigma.get(i, i)));
    let tol = 1e-12 * max_diag;
    let mut l = Matrix::zeros(d, d);
    for j in 0..d {
        let mut pivot = sigma.get(j, j);
        for k in 0..j {
            pivot -= l.get(j, k) * l.get(j, k);
        }
        if pivot <= tol {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let diag = pivot.sqrt();
        l.set(j, j, diag);
        for i in (j + 1)..d {
            let mut s = sigma.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / diag);
        }
    }
    Ok(l)
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.
///
/// Returns `(u, lambda)` with eigenvalues ascending (the largest lands at
/// index d-1) and matching columns of `u`, so `a = u * diag(lambda) * u^T`.
/// Convergence means every off-diagonal magnitude is at most `1e-12` times
/// the max norm of the input.
///
/// # Errors
///
/// Fails with [`Error::EigenNoConvergence`] after 100 sweeps, which for
/// symmetric input indicates pathological values (NaN or infinities).
pub fn sym_eigen(a: &SymMatrix) -> Result<(Matrix, Vec<f64>)> {
    const MAX_SWEEPS: usize = 100;
    let d = a.dim();
    let scale = a.max_abs();
    if scale == 0.0 {
        return Ok((Matrix::identity(d), vec![0.0; d]));
    }
    let threshold = 1e-12 * scale;

    let mut w = a.data.clone();
    let mut u = Matrix::identity(d);
    let idx = |i: usize, j: usize| i * d + j;

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let mut off_max = 0.0f64;
        for p in 0..d {
            for q in (p + 1)..d {
                off_max = off_max.max(w[idx(p, q)].abs());
            }
        }
        if off_max <= threshold {
            converged = true;
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = w[idx(p, q)];
                if apq.abs() <= threshold {
                    continue;
                }
                let theta = (w[idx(q, q)] - w[idx(p, p)]) / (2.0 * apq);
                // tan of the rotation angle; the guarded form avoids
                // overflowing theta^2 for nearly-diagonal pairs.
                let t = if theta.abs() > 1e154 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                let wpq = w[idx(p, q)];
                w[idx(p, p)] -= t * wpq;
                w[idx(q, q)] += t * wpq;
                w[idx(p, q)] = 0.0;
                w[idx(q, p)] = 0.0;
                for r in 0..d {
                    if r == p || r == q {
                        continue;
                    }
                    let g = w[idx(r, p)];
                    let h = w[idx(r, q)];
                    let np = g - s * (h + g * tau);
                    let nq = h + s * (g - h * tau);
                    w[idx(r, p)] = np;
                    w[idx(p, r)] = np;
                    w[idx(r, q)] = nq;
                    w[idx(q, r)] = nq;
                }
                for r in 0..d {
                    let g = u.get(r, p);
                    let h = u.get(r, q);
                    u.set(r, p, g - s * (h + g * tau));
                    u.set(r, q, h + s * (g - h * tau));
                }
            }
        }
    }
    if !converged {
        return Err(Error::EigenNoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| w[idx(i, i)].total_cmp(&w[idx(j, j)]));
    let lambda: Vec<f64> = order.iter().map(|&i| w[idx(i, i)]).collect();
    let mut sorted_u = Matrix::zeros(d, d);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..d {
            sorted_u.set(r, new_col, u.get(r, old_col));
        }
    }
    Ok((sorted_u, lambda))
}

/// Symmetric congruence `scale * c^T * g * c`, built entry by entry so the
/// result is exactly symmetric as stored.
pub fn sym_sandwich(c: &Matrix, g: &SymMatrix, scale: f64) -> SymMatrix {
    let d = c.ncols();
    assert_eq!(c.nrows(), g.dim());
    // temp = g * c
    let temp = g.to_matrix().mul(c);
    let mut out = SymMatrix::zeros(d);
    for i in 0..d {
        for j in i..d {
            let mut s = 0.0;
            for r in 0..c.nrows() {
                s += c.get(r, i) * temp.get(r, j);
            }
            out.set(i, j, scale * s);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::RngStream;

    fn random_spd(d: usize, stream: &mut RngStream) -> SymMatrix {
        let mut b = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                b.set(i, j, stream.std_normal());
            }
        }
        let mut s = SymMatrix::zeros(d);
        for i in 0..d {
            for j in i..d {
                let mut acc = if i == j { d as f64 } else { 0.0 };
                for k in 0..d {
                    acc += b.get(i, k) * b.get(j, k);
                }
                s.set(i, j, acc);
            }
        }
        s
    }

    /// Determinant through LU with partial pivoting; independent of the
    /// Cholesky and Jacobi code paths.
    fn lu_det(a: &SymMatrix) -> f64 {
        let d = a.dim();
        let mut m: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| a.get(i, j)).collect())
            .collect();
        let mut det = 1.0;
        for col in 0..d {
            let pivot_row = (col..d)
                .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
                .unwrap();
            if m[pivot_row][col] == 0.0 {
                return 0.0;
            }
            if pivot_row != col {
                m.swap(pivot_row, col);
                det = -det;
            }
            det *= m[col][col];
            for row in (col + 1)..d {
                let f = m[row][col] / m[col][col];
                let (top, bottom) = m.split_at_mut(row);
                for (t, &p) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                    *t -= f * p;
                }
            }
        }
        det
    }

    #[test]
    fn sym_matrix_rejects_asymmetry() {
        let bad = vec![vec![1.0, 2.0], vec![2.0000001, 1.0]];
        assert!(SymMatrix::from_rows(&bad).is_err());
        let ragged = vec![vec![1.0, 2.0], vec![2.0]];
        assert!(SymMatrix::from_rows(&ragged).is_err());
    }

    #[test]
    fn sym_matrix_set_mirrors() {
        let mut m = SymMatrix::zeros(3);
        m.set(0, 2, -1.5);
        assert_eq!(m.get(2, 0), -1.5);
    }

    #[test]
    fn cholesky_hand_example() {
        let s = SymMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let l = cholesky(&s).unwrap();
        assert_eq!(l.get(0, 0), 2.0);
        assert_eq!(l.get(0, 1), 0.0);
        assert_eq!(l.get(1, 0), 1.0);
        assert_eq!(l.get(1, 1), 2f64.sqrt());
    }

    #[test]
    fn cholesky_identity() {
        let l = cholesky(&SymMatrix::identity(4)).unwrap();
        assert_eq!(l, Matrix::identity(4));
    }

    #[test]
    fn cholesky_rejects_singular() {
        let s = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        match cholesky(&s) {
            Err(Error::NotPositiveDefinite { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn cholesky_reconstructs_random_spd() {
        let mut stream = RngStream::new(7, 0);
        let s = random_spd(50, &mut stream);
        let l = cholesky(&s).unwrap();
        let mut err = 0.0f64;
        for i in 0..50 {
            for j in 0..50 {
                let mut v = 0.0;
                for k in 0..50 {
                    v += l.get(i, k) * l.get(j, k);
                }
                err = err.max((v - s.get(i, j)).abs());
            }
        }
        assert!(err <= 1e-10 * s.max_abs(), "reconstruction error {err}");
    }

    #[test]
    fn eigen_diagonal_is_sorted_ascending() {
        let s = SymMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let (u, lambda) = sym_eigen(&s).unwrap();
        assert_eq!(lambda, vec![1.0, 2.0]);
        // Columns must track the sorted values.
        assert_eq!(u.get(0, 1).abs(), 1.0);
        assert_eq!(u.get(1, 0).abs(), 1.0);
    }

    #[test]
    fn eigen_exchange_matrix() {
        let s = SymMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let (u, lambda) = sym_eigen(&s).unwrap();
        assert!((lambda[0] + 1.0).abs() < 1e-12);
        assert!((lambda[1] - 1.0).abs() < 1e-12);
        let inv_sqrt2 = 0.5f64.sqrt();
        for col in 0..2 {
            assert!((u.get(0, col).abs() - inv_sqrt2).abs() < 1e-12);
            assert!((u.get(1, col).abs() - inv_sqrt2).abs() < 1e-12);
        }
    }

    #[test]
    fn eigen_reconstructs_two_by_two() {
        let s = SymMatrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let (u, lambda) = sym_eigen(&s).unwrap();
        let expect_low = (7.0 - 5f64.sqrt()) / 2.0;
        let expect_high = (7.0 + 5f64.sqrt()) / 2.0;
        assert!((lambda[0] - expect_low).abs() < 1e-12);
        assert!((lambda[1] - expect_high).abs() < 1e-12);
        for i in 0..2 {
            for j in 0..2 {
                let v: f64 = (0..2).map(|k| u.get(i, k) * lambda[k] * u.get(j, k)).sum();
                assert!((v - s.get(i, j)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn eigen_orthogonality_and_trace_on_random_input() {
        let mut stream = RngStream::new(13, 0);
        let s = random_spd(50, &mut stream);
        let (u, lambda) = sym_eigen(&s).unwrap();
        let mut ortho_err = 0.0f64;
        for i in 0..50 {
            for j in 0..50 {
                let dot: f64 = (0..50).map(|k| u.get(k, i) * u.get(k, j)).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                ortho_err = ortho_err.max((dot - target).abs());
            }
        }
        assert!(ortho_err <= 1e-10, "orthogonality error {ortho_err}");
        assert!(lambda.windows(2).all(|w| w[0] <= w[1]));
        let sum: f64 = lambda.iter().sum();
        let trace = s.trace();
        assert!((sum - trace).abs() <= 1e-10 * trace.abs().max(1.0));
    }

    #[test]
    fn eigen_product_matches_lu_determinant() {
        let mut stream = RngStream::new(21, 0);
        for d in 2..=10 {
            let s = random_spd(d, &mut stream);
            let (_, lambda) = sym_eigen(&s).unwrap();
            let product: f64 = lambda.iter().product();
            let det = lu_det(&s);
            assert!(
                (product - det).abs() <= 1e-8 * det.abs(),
                "d = {d}: product {product} vs det {det}"
            );
        }
    }

    #[test]
    fn eigen_zero_matrix_short_circuits() {
        let (u, lambda) = sym_eigen(&SymMatrix::zeros(3)).unwrap();
        assert_eq!(lambda, vec![0.0; 3]);
        assert_eq!(u, Matrix::identity(3));
    }

    #[test]
    fn sandwich_is_exactly_symmetric() {
        let mut stream = RngStream::new(5, 0);
        let g = random_spd(6, &mut stream);
        let mut c = Matrix::zeros(6, 6);
        for i in 0..6 {
            for j in 0..6 {
                c.set(i, j, stream.std_normal());
            }
        }
        let s = sym_sandwich(&c, &g, -0.5);
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(s.get(i, j).to_bits(), s.get(j, i).to_bits());
            }
        }
    }
}
