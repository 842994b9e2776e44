//! Small dense linear algebra.
//!
//! The type space is small (at most [`MAX_TYPES`] states), so everything here
//! is a plain row-major `Vec` with direct loops: no BLAS, no sparse formats,
//! deterministic operation order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::real::Real;

/// Hard cap on the number of types; keeps the dense solvers honest.
pub const MAX_TYPES: usize = 64;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix dimension {0} exceeds supported maximum {MAX_TYPES}")]
    TooLarge(usize),
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("negative time {0} passed to matrix exponential")]
    NegativeTime(f64),
    #[error("non-finite entry in matrix")]
    NonFinite,
    #[error("rows of unequal length")]
    Ragged,
}

/// Dense square matrix, row major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    bound(serialize = "F: Serialize + Clone", deserialize = "F: Deserialize<'de> + Real"),
    into = "Vec<Vec<F>>",
    try_from = "Vec<Vec<F>>"
)]
pub struct SquareMat<F> {
    dim: usize,
    data: Vec<F>,
}

impl<F: Real> SquareMat<F> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![F::zero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = F::one();
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<F>>) -> Result<Self, LinalgError> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(LinalgError::Ragged);
        }
        Ok(Self { dim, data: rows.into_iter().flatten().collect() })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> Vec<Vec<F>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    /// `self * v`.
    pub fn matvec(&self, v: &[F]) -> Vec<F> {
        assert_eq!(v.len(), self.dim);
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// `y^T * self`, returned as a plain vector.
    pub fn vecmat(&self, y: &[F]) -> Vec<F> {
        assert_eq!(y.len(), self.dim);
        let mut out = vec![F::zero(); self.dim];
        for i in 0..self.dim {
            let yi = y[i];
            for j in 0..self.dim {
                out[j] += yi * self[(i, j)];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = Self::zeros(self.dim);
        for i in 0..self.dim {
            for k in 0..self.dim {
                let a = self[(i, k)];
                if a == F::zero() {
                    continue;
                }
                for j in 0..self.dim {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn scale(&self, s: F) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    /// Max absolute row sum.
    pub fn inf_norm(&self) -> F {
        (0..self.dim)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum())
            .fold(F::zero(), F::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Strong connectivity of the support graph `{(i,j): i != j, m_ij != 0}`.
    ///
    /// A 1x1 matrix counts as irreducible (degenerate single-state chain).
    pub fn is_irreducible_support(&self) -> bool {
        if self.dim <= 1 {
            return true;
        }
        let edge = |i: usize, j: usize| i != j && self[(i, j)] != F::zero();
        reachable_from(self.dim, 0, |i, j| edge(i, j)) && reachable_from(self.dim, 0, |i, j| edge(j, i))
    }
}

impl<F> std::ops::Index<(usize, usize)> for SquareMat<F> {
    type Output = F;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &F {
        &self.data[i * self.dim + j]
    }
}

impl<F> std::ops::IndexMut<(usize, usize)> for SquareMat<F> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut F {
        &mut self.data[i * self.dim + j]
    }
}

impl<F: Real> From<SquareMat<F>> for Vec<Vec<F>> {
    fn from(m: SquareMat<F>) -> Self {
        m.rows()
    }
}

impl<F: Real> TryFrom<Vec<Vec<F>>> for SquareMat<F> {
    type Error = LinalgError;
    fn try_from(rows: Vec<Vec<F>>) -> Result<Self, LinalgError> {
        Self::from_rows(rows)
    }
}

fn reachable_from(n: usize, start: usize, edge: impl Fn(usize, usize) -> bool) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && edge(i, j) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Solve `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear<F: Real>(a: &SquareMat<F>, b: &[F]) -> Result<Vec<F>, LinalgError> {
    let n = a.dim();
    assert_eq!(b.len(), n);
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| {
                m[(r, col)].abs().partial_cmp(&m[(s, col)].abs()).expect("NaN pivot")
            })
            .unwrap();
        if m[(pivot, col)].abs() <= F::epsilon() * F::lit(n as f64) {
            return Err(LinalgError::Singular);
        }
        if pivot != col {
            for j in 0..n {
                let tmp = m[(pivot, j)];
                m[(pivot, j)] = m[(col, j)];
                m[(col, j)] = tmp;
            }
            rhs.swap(pivot, col);
        }
        let inv = F::one() / m[(col, col)];
        for r in col + 1..n {
            let factor = m[(r, col)] * inv;
            if factor == F::zero() {
                continue;
            }
            for j in col..n {
                let v = m[(col, j)];
                m[(r, j)] = m[(r, j)] - factor * v;
            }
            let v = rhs[col];
            rhs[r] = rhs[r] - factor * v;
        }
    }
    let mut x = vec![F::zero(); n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for j in row + 1..n {
            acc = acc - m[(row, j)] * x[j];
        }
        x[row] = acc / m[(row, row)];
    }
    Ok(x)
}

/// `exp(t m)` by scaling and squaring with a truncated Taylor series.
///
/// The argument is scaled until its inf-norm is below 1/2, the series is
/// summed until terms fall below the target relative accuracy (1e-15, well
/// inside the documented 1e-12 contract), then the result is repeatedly
/// squared.
pub fn matrix_exp<F: Real>(m: &SquareMat<F>, t: F) -> Result<SquareMat<F>, LinalgError> {
    if t < F::zero() {
        return Err(LinalgError::NegativeTime(t.f64()));
    }
    if !m.is_finite() || !t.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let n = m.dim();
    if n > MAX_TYPES {
        return Err(LinalgError::TooLarge(n));
    }
    let scaled_norm = (m.inf_norm() * t).f64();
    let squarings = if scaled_norm > 0.5 { (scaled_norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scale = t / F::lit(f64::powi(2.0, squarings as i32));
    let b = m.scale(scale);

    let mut result = SquareMat::identity(n);
    let mut term = SquareMat::identity(n);
    for k in 1..=40u32 {
        term = term.matmul(&b).scale(F::one() / F::lit(f64::from(k)));
        result = result.add(&term);
        if term.inf_norm() <= F::lit(1e-15) * result.inf_norm() {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.matmul(&result);
    }
    Ok(result)
}

/// Solve a tridiagonal system by the Thomas algorithm.
///
/// `lower[0]` and `upper[n-1]` are ignored. Stable for the diagonally
/// dominant systems produced by implicit diffusion steps.
pub fn solve_tridiagonal<F: Real>(
    lower: &[F],
    diag: &[F],
    upper: &[F],
    rhs: &[F],
) -> Result<Vec<F>, LinalgError> {
    let n = diag.len();
    assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    let mut c = vec![F::zero(); n];
    let mut d = vec![F::zero(); n];
    if diag[0] == F::zero() {
        return Err(LinalgError::Singular);
    }
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * c[i - 1];
        if denom == F::zero() {
            return Err(LinalgError::Singular);
        }
        c[i] = upper[i] / denom;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        let xi = x[i] - c[i] * x[i + 1];
        x[i] = xi;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_exp_is_e_on_diagonal() {
        let m = SquareMat::<f64>::identity(3);
        let e = matrix_exp(&m, 1.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0f64.exp() } else { 0.0 };
                assert!((e[(i, j)] - want).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn exp_at_zero_time_is_identity() {
        let m = SquareMat::from_rows(vec![vec![2.0, -1.0], vec![0.5, 3.0]]).unwrap();
        let e = matrix_exp(&m, 0.0).unwrap();
        assert_eq!(e, SquareMat::identity(2));
    }

    #[test]
    fn exp_of_diagonal_is_elementwise() {
        let m = SquareMat::from_rows(vec![vec![-1.5, 0.0], vec![0.0, 2.0]]).unwrap();
        let e = matrix_exp(&m, 1.3).unwrap();
        assert!((e[(0, 0)] - (-1.5f64 * 1.3).exp()).abs() < 1e-13);
        assert!((e[(1, 1)] - (2.0f64 * 1.3).exp()).abs() < 1e-12);
        assert_eq!(e[(0, 1)], 0.0);
        assert_eq!(e[(1, 0)], 0.0);
    }

    #[test]
    fn exp_rejects_negative_time() {
        let m = SquareMat::<f64>::identity(2);
        assert!(matches!(matrix_exp(&m, -1.0), Err(LinalgError::NegativeTime(_))));
    }

    #[test]
    fn semigroup_property() {
        // exp((s+t)m) = exp(sm) exp(tm), checked entrywise to 1e-10.
        let m = SquareMat::from_rows(vec![
            vec![-0.7, 0.4, 0.3],
            vec![0.2, -1.1, 0.9],
            vec![0.5, 0.1, -0.6],
        ])
        .unwrap();
        let (s, t) = (0.8, 1.3);
        let whole = matrix_exp(&m, s + t).unwrap();
        let split = matrix_exp(&m, s).unwrap().matmul(&matrix_exp(&m, t).unwrap());
        for i in 0..3 {
            for j in 0..3 {
                assert!((whole[(i, j)] - split[(i, j)]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn linear_solve_recovers_known_solution() {
        let a = SquareMat::from_rows(vec![vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x = vec![0.5, -2.0];
        let b = a.matvec(&x);
        let got = solve_linear(&a, &b).unwrap();
        for (g, w) in got.iter().zip(&x) {
            assert!((g - w).abs() < 1e-13);
        }
    }

    #[test]
    fn singular_solve_errors() {
        let a = SquareMat::from_rows(vec![vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(solve_linear(&a, &[1.0, 1.0]), Err(LinalgError::Singular)));
    }

    #[test]
    fn tridiagonal_matches_dense_solve() {
        let n = 6;
        let lower = vec![-0.5; n];
        let diag = vec![2.0; n];
        let upper = vec![-0.3; n];
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 0.2).collect();
        let dense = SquareMat::from_fn(n, |i, j| {
            if i == j {
                diag[i]
            } else if j + 1 == i {
                lower[i]
            } else if i + 1 == j {
                upper[i]
            } else {
                0.0
            }
        });
        let want = solve_linear(&dense, &rhs).unwrap();
        let got = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn irreducibility_of_support_graph() {
        let cyclic =
            SquareMat::from_rows(vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0]])
                .unwrap();
        assert!(cyclic.is_irreducible_support());
        let lower_block =
            SquareMat::from_rows(vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0]])
                .unwrap();
        assert!(!lower_block.is_irreducible_support());
        let zero = SquareMat::<f64>::zeros(2);
        assert!(!zero.is_irreducible_support());
        assert!(SquareMat::<f64>::zeros(1).is_irreducible_support());
    }
}
