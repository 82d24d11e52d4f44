//! Truncated flatness series for `y_t = y_xx` anchored at an interior point.
//!
//! With `d = x - x₁`,
//!
//! ```text
//! y(t, x) = Σ_{i≤K} w₁⁽ⁱ⁾(t) d²ⁱ/(2i)! + Σ_{i≤K} w₂⁽ⁱ⁾(t) d²ⁱ⁺¹/(2i+1)!
//! ```
//!
//! so that `y(t, x₁) = w₁` and `∂ₓy(t, x₁) = w₂`. For polynomial targets of
//! degree at most `K` the truncation is exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{GridSignal, TimeGrid};

/// Polynomial in `t` with coefficients in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial(pub Vec<f64>);

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial(Vec::new())
    }

    pub fn monomial(degree: usize, coefficient: f64) -> Self {
        let mut c = vec![0.0; degree + 1];
        c[degree] = coefficient;
        Polynomial(c)
    }

    /// Degree of the highest nonzero coefficient; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.0.iter().rposition(|c| *c != 0.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial(self.0.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect())
    }

    /// The `order`-th derivative.
    pub fn derivative_n(&self, order: usize) -> Polynomial {
        (0..order).fold(self.clone(), |p, _| p.derivative())
    }

    pub fn scaled(&self, s: f64) -> Polynomial {
        Polynomial(self.0.iter().map(|c| c * s).collect())
    }
}

/// Anchor-point data `w₁ = y(·, x₁)` and `w₂ = ∂ₓy(·, x₁)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesTarget {
    pub w1: Polynomial,
    pub w2: Polynomial,
}

impl SeriesTarget {
    fn max_degree(&self) -> usize {
        self.w1.degree().unwrap_or(0).max(self.w2.degree().unwrap_or(0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSolution {
    anchor: f64,
    order: usize,
    /// `w₁⁽ⁱ⁾ / (2i)!` for `i = 0..=K`.
    even: Vec<Polynomial>,
    /// `w₂⁽ⁱ⁾ / (2i+1)!` for `i = 0..=K`.
    odd: Vec<Polynomial>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Builds the order-`K` series. Fails if `K` is below the target degree, where
/// truncation would no longer solve the heat equation.
pub fn build_series(targets: &SeriesTarget, anchor: f64, order: usize) -> Result<SeriesSolution> {
    if !anchor.is_finite() {
        return Err(Error::invalid("anchor must be finite"));
    }
    let degree = targets.max_degree();
    if order < degree {
        return Err(Error::invalid(format!("order {order} is below the target degree {degree}")));
    }
    let even = (0..=order).map(|i| targets.w1.derivative_n(i).scaled(1.0 / factorial(2 * i))).collect();
    let odd = (0..=order).map(|i| targets.w2.derivative_n(i).scaled(1.0 / factorial(2 * i + 1))).collect();
    Ok(SeriesSolution { anchor, order, even, odd })
}

impl SeriesSolution {
    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `Σ_i c_i(t) d^{2i + shift - dx}` differentiated `dx` times in `x` and once in `t` if `dt`.
    fn sum(&self, table: &[Polynomial], shift: usize, t: f64, x: f64, dx: usize, dt: bool) -> f64 {
        let d = x - self.anchor;
        let mut acc = 0.0;
        for (i, c) in table.iter().enumerate() {
            let power = 2 * i + shift;
            if power < dx {
                continue;
            }
            let falling: f64 = (0..dx).map(|k| (power - k) as f64).product();
            let coef = if dt { c.derivative().eval(t) } else { c.eval(t) };
            acc += coef * falling * d.powi((power - dx) as i32);
        }
        acc
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.sum(&self.even, 0, t, x, 0, false) + self.sum(&self.odd, 1, t, x, 0, false)
    }

    pub fn dx(&self, t: f64, x: f64) -> f64 {
        self.sum(&self.even, 0, t, x, 1, false) + self.sum(&self.odd, 1, t, x, 1, false)
    }

    pub fn dxx(&self, t: f64, x: f64) -> f64 {
        self.sum(&self.even, 0, t, x, 2, false) + self.sum(&self.odd, 1, t, x, 2, false)
    }

    pub fn dt(&self, t: f64, x: f64) -> f64 {
        self.sum(&self.even, 0, t, x, 0, true) + self.sum(&self.odd, 1, t, x, 0, true)
    }

    /// Heat-equation residual `y_t - y_xx`.
    pub fn residual(&self, t: f64, x: f64) -> f64 {
        self.dt(t, x) - self.dxx(t, x)
    }
}

/// Dirichlet controls `(y(·, 0), y(·, L))` sampled on the solve times.
pub fn series_controls(solution: &SeriesSolution, length: f64, grid: &TimeGrid) -> (GridSignal, GridSignal) {
    (GridSignal::sample(grid, |t| solution.eval(t, 0.0)), GridSignal::sample(grid, |t| solution.eval(t, length)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t2_t3() -> SeriesTarget {
        SeriesTarget { w1: Polynomial::monomial(2, 1.0), w2: Polynomial::monomial(3, 1.0) }
    }

    #[test]
    fn polynomial_basics() {
        let p = Polynomial(vec![1.0, -2.0, 3.0]);
        assert_eq!(p.eval(2.0), 9.0);
        assert_eq!(p.derivative(), Polynomial(vec![-2.0, 6.0]));
        assert_eq!(p.derivative_n(3).degree(), None);
        assert_eq!(Polynomial::monomial(4, 2.0).degree(), Some(4));
    }

    #[test]
    fn zero_targets_zero_solution() {
        let s = build_series(&SeriesTarget { w1: Polynomial::zero(), w2: Polynomial::zero() }, 0.5, 3).unwrap();
        assert_eq!(s.eval(0.3, 0.9), 0.0);
    }

    #[test]
    fn anchor_identities() {
        let s = build_series(&t2_t3(), 0.5, 3).unwrap();
        for t in [0.0, 0.1, 0.77, 1.5] {
            assert_eq!(s.eval(t, 0.5), t * t);
            assert_eq!(s.dx(t, 0.5), t * t * t);
        }
    }

    #[test]
    fn control_for_quadratic_target() {
        let s =
            build_series(&SeriesTarget { w1: Polynomial::monomial(2, 1.0), w2: Polynomial::zero() }, 0.5, 2).unwrap();
        let grid = TimeGrid::new(1.0, 4).unwrap();
        let (v0, vl) = series_controls(&s, 1.0, &grid);
        for (k, t) in grid.solve_times().into_iter().enumerate() {
            // t² + (x-½)²·2t/2! + (x-½)⁴·2/4!
            let expected = t * t + 0.25 * t + 0.0625 / 12.0;
            assert!((v0[k] - expected).abs() < 1e-15);
            assert_eq!(v0[k], vl[k]);
        }
    }

    #[test]
    fn residual_vanishes() {
        let s = build_series(&t2_t3(), 0.3, 3).unwrap();
        for (t, x) in [(0.1, 0.0), (0.9, 1.0), (0.4, 0.37)] {
            assert!(s.residual(t, x).abs() < 1e-13);
        }
    }

    #[test]
    fn truncation_below_degree_rejected() {
        assert!(build_series(&t2_t3(), 0.5, 2).is_err());
    }
}
