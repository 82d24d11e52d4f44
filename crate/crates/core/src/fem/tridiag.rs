//! Tridiagonal matrices and their LU (Thomas) factorization.

use crate::error::{Error, Result};

/// Square tridiagonal matrix stored by diagonals.
///
/// `lower[i]` holds entry `(i + 1, i)` and `upper[i]` holds entry `(i, i + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        let off = n.saturating_sub(1);
        Self { lower: vec![0.0; off], diag: vec![0.0; n], upper: vec![0.0; off] }
    }

    pub fn from_diagonals(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::invalid("tridiagonal matrix must have at least one row"));
        }
        for (what, len) in [("lower diagonal", lower.len()), ("upper diagonal", upper.len())] {
            if len != n - 1 {
                return Err(Error::Dimension { what, expected: n - 1, got: len });
            }
        }
        Ok(Self { lower, diag, upper })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if i == j + 1 {
            self.lower[j]
        } else if j == i + 1 {
            self.upper[i]
        } else {
            0.0
        }
    }

    /// Adds `value` to entry `(i, j)`. Panics outside the band.
    pub(crate) fn add(&mut self, i: usize, j: usize, value: f64) {
        if i == j {
            self.diag[i] += value;
        } else if i == j + 1 {
            self.lower[j] += value;
        } else if j == i + 1 {
            self.upper[i] += value;
        } else {
            panic!("entry ({i}, {j}) lies outside the tridiagonal band");
        }
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: f64, other: &Tridiagonal, beta: f64) -> Tridiagonal {
        assert_eq!(self.dim(), other.dim());
        let zip = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| alpha * x + beta * y).collect() };
        Tridiagonal {
            lower: zip(&self.lower, &other.lower),
            diag: zip(&self.diag, &other.diag),
            upper: zip(&self.upper, &other.upper),
        }
    }

    pub fn transpose(&self) -> Tridiagonal {
        Tridiagonal { lower: self.upper.clone(), diag: self.diag.clone(), upper: self.lower.clone() }
    }

    /// Principal submatrix obtained by removing the first and last rows and columns.
    pub fn interior(&self) -> Tridiagonal {
        let n = self.dim();
        assert!(n >= 3, "interior block needs at least three rows");
        Tridiagonal {
            lower: self.lower[1..n - 2].to_vec(),
            diag: self.diag[1..n - 1].to_vec(),
            upper: self.upper[1..n - 2].to_vec(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.matvec_into(x, &mut out);
        out
    }

    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        assert_eq!(x.len(), n);
        assert_eq!(out.len(), n);
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.lower[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * x[i + 1];
            }
            out[i] = acc;
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.matvec(&vec![1.0; self.dim()])
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.lower.iter().zip(&self.upper).all(|(l, u)| (l - u).abs() <= tol * (1.0 + l.abs().max(u.abs())))
    }

    /// LU factorization without pivoting.
    pub fn factor(&self) -> Result<TridiagonalLu> {
        let n = self.dim();
        let mut pivots = Vec::with_capacity(n);
        let mut multipliers = Vec::with_capacity(n.saturating_sub(1));
        let mut prev = self.diag[0];
        if prev == 0.0 || !prev.is_finite() {
            return Err(Error::Singular { step: 0, row: 0 });
        }
        pivots.push(prev);
        for i in 1..n {
            let l = self.lower[i - 1] / prev;
            let u = self.diag[i] - l * self.upper[i - 1];
            if u == 0.0 || !u.is_finite() {
                return Err(Error::Singular { step: 0, row: i });
            }
            multipliers.push(l);
            pivots.push(u);
            prev = u;
        }
        Ok(TridiagonalLu { multipliers, pivots, upper: self.upper.clone() })
    }

    /// Cholesky factorization of a symmetric tridiagonal matrix; `None` if not positive definite.
    pub fn cholesky(&self) -> Option<Vec<(f64, f64)>> {
        if !self.is_symmetric(1e-14) {
            return None;
        }
        let n = self.dim();
        let mut out = Vec::with_capacity(n);
        let mut prev_diag = 0.0;
        for i in 0..n {
            let sub = if i == 0 { 0.0 } else { self.lower[i - 1] / prev_diag };
            let d2 = self.diag[i] - sub * sub;
            if d2 <= 0.0 {
                return None;
            }
            let d = d2.sqrt();
            out.push((d, sub));
            prev_diag = d;
        }
        Some(out)
    }
}

/// Thomas-style `A = L U` factors of a [`Tridiagonal`], reusable for many right-hand sides.
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    multipliers: Vec<f64>,
    pivots: Vec<f64>,
    upper: Vec<f64>,
}

impl TridiagonalLu {
    pub fn dim(&self) -> usize {
        self.pivots.len()
    }

    /// Solves `A x = rhs` in place.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = self.dim();
        assert_eq!(rhs.len(), n);
        for i in 1..n {
            rhs[i] -= self.multipliers[i - 1] * rhs[i - 1];
        }
        rhs[n - 1] /= self.pivots[n - 1];
        for i in (0..n - 1).rev() {
            rhs[i] = (rhs[i] - self.upper[i] * rhs[i + 1]) / self.pivots[i];
        }
    }

    /// Solves `A^T x = rhs` in place with the same factors.
    pub fn solve_transpose_in_place(&self, rhs: &mut [f64]) {
        let n = self.dim();
        assert_eq!(rhs.len(), n);
        rhs[0] /= self.pivots[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.upper[i - 1] * rhs[i - 1]) / self.pivots[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.multipliers[i] * rhs[i + 1];
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        // Gaussian elimination with partial pivoting.
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut x = b.to_vec();
        for k in 0..n {
            let p = (k..n).max_by(|&i, &j| m[i][k].abs().partial_cmp(&m[j][k].abs()).unwrap()).unwrap();
            m.swap(k, p);
            x.swap(k, p);
            for i in k + 1..n {
                let f = m[i][k] / m[k][k];
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                x[i] -= f * x[k];
            }
        }
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| m[k][j] * x[j]).sum();
            x[k] = (x[k] - s) / m[k][k];
        }
        x
    }

    #[test]
    fn factor_then_solve_matches_dense_on_three_nodes() {
        let a = Tridiagonal::from_diagonals(vec![1.0, -2.0], vec![4.0, 5.0, 3.0], vec![0.5, 1.5]).unwrap();
        let b = [1.0, -2.0, 0.25];
        let x = a.factor().unwrap().solve(&b);
        let y = dense_solve(&a.to_dense(), &b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn transpose_solve_matches_transposed_matrix() {
        let a =
            Tridiagonal::from_diagonals(vec![1.0, -2.0, 0.3], vec![4.0, 5.0, 3.0, 2.5], vec![0.5, 1.5, -0.7]).unwrap();
        let b = [1.0, -2.0, 0.25, 3.0];
        let mut x = b.to_vec();
        a.factor().unwrap().solve_transpose_in_place(&mut x);
        let y = dense_solve(&a.transpose().to_dense(), &b);
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_pivot_is_reported() {
        let a = Tridiagonal::from_diagonals(vec![1.0], vec![0.0, 1.0], vec![1.0]).unwrap();
        assert!(matches!(a.factor(), Err(Error::Singular { row: 0, .. })));
    }

    #[test]
    fn mismatched_diagonals_rejected() {
        assert!(Tridiagonal::from_diagonals(vec![1.0], vec![1.0, 2.0, 3.0], vec![1.0, 1.0]).is_err());
    }
}
