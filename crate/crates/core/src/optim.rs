//! Quasi-Newton minimization (dense BFGS or limited-memory BFGS) with a
//! strong-Wolfe line search.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inverse-Hessian model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Dense BFGS when the dimension is at most `OptimOptions::dense_limit`, L-BFGS otherwise.
    Auto,
    Bfgs,
    Lbfgs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimOptions {
    pub max_iterations: usize,
    /// Stop when `‖g‖ ≤ gtol · max(1, |f|)`.
    pub gtol: f64,
    /// Stop when the relative decrease of one accepted step falls below this.
    pub ftol: f64,
    pub c1: f64,
    pub c2: f64,
    pub memory: usize,
    pub method: Method,
    pub dense_limit: usize,
    pub max_line_search: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gtol: 1e-9,
            ftol: 1e-12,
            c1: 1e-4,
            c2: 0.9,
            memory: 20,
            method: Method::Auto,
            dense_limit: 2000,
            max_line_search: 40,
        }
    }
}

impl OptimOptions {
    pub fn validate(&self) -> Result<()> {
        let positive = [("gtol", self.gtol), ("ftol", self.ftol)];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::invalid(format!(
                "line-search constants need 0 < c1 < c2 < 1, got c1 = {}, c2 = {}",
                self.c1, self.c2
            )));
        }
        if self.memory == 0 {
            return Err(Error::invalid("memory must be at least 1"));
        }
        if self.max_line_search == 0 {
            return Err(Error::invalid("max_line_search must be at least 1"));
        }
        Ok(())
    }

    fn dense(&self, dim: usize) -> bool {
        match self.method {
            Method::Bfgs => true,
            Method::Lbfgs => false,
            Method::Auto => dim <= self.dense_limit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    GradientTolerance,
    FunctionTolerance,
    MaxIterations,
    LineSearchBreakdown,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::GradientTolerance => "gradient tolerance",
            Termination::FunctionTolerance => "function tolerance",
            Termination::MaxIterations => "iteration cap",
            Termination::LineSearchBreakdown => "line-search breakdown",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimReport {
    pub iterations: usize,
    pub evaluations: usize,
    pub value: f64,
    pub gradient_norm: f64,
    pub termination: Termination,
    /// Objective at the starting point and after every accepted step.
    pub history: Vec<f64>,
}

impl OptimReport {
    pub fn converged(&self) -> bool {
        matches!(self.termination, Termination::GradientTolerance | Termination::FunctionTolerance)
    }

    pub fn is_monotone(&self) -> bool {
        self.history.windows(2).all(|w| w[1] <= w[0])
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

enum Hessian {
    Dense { h: Vec<f64>, dim: usize, scaled: bool },
    Limited { pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>, memory: usize },
}

impl Hessian {
    fn new(dim: usize, opts: &OptimOptions) -> Self {
        if opts.dense(dim) {
            let mut h = vec![0.0; dim * dim];
            for i in 0..dim {
                h[i * dim + i] = 1.0;
            }
            Hessian::Dense { h, dim, scaled: false }
        } else {
            Hessian::Limited { pairs: VecDeque::new(), memory: opts.memory }
        }
    }

    fn reset(&mut self) {
        match self {
            Hessian::Dense { h, dim, scaled } => {
                h.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..*dim {
                    h[i * *dim + i] = 1.0;
                }
                *scaled = false;
            }
            Hessian::Limited { pairs, .. } => pairs.clear(),
        }
    }

    /// `d = -H g`.
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        match self {
            Hessian::Dense { h, dim, .. } => (0..*dim).map(|i| -dot(&h[i * dim..(i + 1) * dim], g)).collect(),
            Hessian::Limited { pairs, .. } => {
                let mut q = g.to_vec();
                let mut alphas = Vec::with_capacity(pairs.len());
                for (s, y, rho) in pairs.iter().rev() {
                    let a = rho * dot(s, &q);
                    q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
                    alphas.push(a);
                }
                if let Some((s, y, _)) = pairs.back() {
                    let gamma = dot(s, y) / dot(y, y);
                    q.iter_mut().for_each(|v| *v *= gamma);
                }
                for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
                    let b = rho * dot(y, &q);
                    q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
                }
                q.iter_mut().for_each(|v| *v = -*v);
                q
            }
        }
    }

    fn update(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        if !(sy > f64::EPSILON * norm(&s) * norm(&y)) {
            return;
        }
        let rho = 1.0 / sy;
        match self {
            Hessian::Dense { h, dim, scaled } => {
                let n = *dim;
                if !*scaled {
                    let gamma = sy / dot(&y, &y);
                    h.iter_mut().for_each(|v| *v *= gamma);
                    *scaled = true;
                }
                // H ← (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ
                let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &y)).collect();
                let yhy = dot(&y, &hy);
                let coef = rho * rho * yhy + rho;
                for i in 0..n {
                    for j in 0..n {
                        h[i * n + j] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                    }
                }
            }
            Hessian::Limited { pairs, memory } => {
                if pairs.len() == *memory {
                    pairs.pop_front();
                }
                pairs.push_back((s, y, rho));
            }
        }
    }
}

struct Point {
    alpha: f64,
    value: f64,
    slope: f64,
    x: Vec<f64>,
    grad: Vec<f64>,
}

struct LineSearch<'a, F> {
    objective: &'a mut F,
    evaluations: &'a mut usize,
    x0: &'a [f64],
    d: &'a [f64],
    f0: f64,
    slope0: f64,
    c1: f64,
    c2: f64,
    budget: usize,
}

impl<F> LineSearch<'_, F>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn eval(&mut self, alpha: f64) -> Result<Point> {
        let x: Vec<f64> = self.x0.iter().zip(self.d).map(|(xi, di)| xi + alpha * di).collect();
        let (value, grad) = (self.objective)(&x)?;
        *self.evaluations += 1;
        let slope = dot(&grad, self.d);
        Ok(Point { alpha, value, slope, x, grad })
    }

    fn armijo(&self, p: &Point) -> bool {
        p.value <= self.f0 + self.c1 * p.alpha * self.slope0
    }

    fn curvature(&self, p: &Point) -> bool {
        p.slope.abs() <= -self.c2 * self.slope0
    }

    /// Returns a point satisfying the strong Wolfe conditions, or `None`.
    fn search(&mut self, alpha_init: f64) -> Result<Option<Point>> {
        let mut prev = Point { alpha: 0.0, value: self.f0, slope: self.slope0, x: self.x0.to_vec(), grad: Vec::new() };
        let mut alpha = alpha_init;
        for i in 0..self.budget {
            let cur = self.eval(alpha)?;
            if !cur.value.is_finite() {
                alpha = 0.5 * (prev.alpha + alpha);
                continue;
            }
            if !self.armijo(&cur) || (i > 0 && cur.value >= prev.value) {
                return self.zoom(prev, cur);
            }
            if self.curvature(&cur) {
                return Ok(Some(cur));
            }
            if cur.slope >= 0.0 {
                return self.zoom(cur, prev);
            }
            alpha = 2.0 * cur.alpha;
            prev = cur;
        }
        Ok(None)
    }

    fn zoom(&mut self, mut lo: Point, mut hi: Point) -> Result<Option<Point>> {
        for _ in 0..self.budget {
            let alpha = interpolate(&lo, &hi);
            let cur = self.eval(alpha)?;
            if !self.armijo(&cur) || cur.value >= lo.value {
                hi = cur;
            } else {
                if self.curvature(&cur) {
                    return Ok(Some(cur));
                }
                if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = cur;
            }
            if (hi.alpha - lo.alpha).abs() <= 1e-16 * lo.alpha.abs().max(1e-300) {
                break;
            }
        }
        // Accept a sufficient-decrease point even if the curvature test never held.
        if lo.alpha > 0.0 && lo.value < self.f0 {
            return Ok(Some(lo));
        }
        Ok(None)
    }
}

/// Cubic interpolation between two bracket points, safeguarded into the interior.
fn interpolate(lo: &Point, hi: &Point) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let d1 = lo.slope + hi.slope - 3.0 * (lo.value - hi.value) / (a - b);
    let disc = d1 * d1 - lo.slope * hi.slope;
    let (left, right) = if a < b { (a, b) } else { (b, a) };
    let margin = 0.1 * (right - left);
    if disc >= 0.0 {
        let d2 = (b - a).signum() * disc.sqrt();
        let t = b - (b - a) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
        if t.is_finite() && t > left + margin && t < right - margin {
            return t;
        }
    }
    0.5 * (a + b)
}

/// Minimizes `objective` (returning value and gradient) from `x0`.
///
/// Errors from the objective propagate; a failed line search ends the run with
/// [`Termination::LineSearchBreakdown`] at the best iterate.
pub fn minimize<F>(mut objective: F, x0: &[f64], opts: &OptimOptions) -> Result<(Vec<f64>, OptimReport)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    opts.validate()?;
    let dim = x0.len();
    let mut x = x0.to_vec();
    let (mut value, mut grad) = objective(&x)?;
    if grad.len() != dim {
        return Err(Error::Dimension { what: "gradient", expected: dim, got: grad.len() });
    }
    let mut evaluations = 1;
    let mut history = vec![value];
    let mut hess = Hessian::new(dim, opts);
    let mut iterations = 0;
    let mut first = true;
    let termination = loop {
        let gnorm = norm(&grad);
        if gnorm <= opts.gtol * value.abs().max(1.0) {
            break Termination::GradientTolerance;
        }
        if iterations >= opts.max_iterations {
            break Termination::MaxIterations;
        }
        let mut d = hess.direction(&grad);
        let mut slope = dot(&grad, &d);
        if !(slope < 0.0) {
            hess.reset();
            first = true;
            d = grad.iter().map(|g| -g).collect();
            slope = -gnorm * gnorm;
        }
        let alpha_init = if first { (1.0 / gnorm).min(1.0) } else { 1.0 };
        let step = LineSearch {
            objective: &mut objective,
            evaluations: &mut evaluations,
            x0: &x,
            d: &d,
            f0: value,
            slope0: slope,
            c1: opts.c1,
            c2: opts.c2,
            budget: opts.max_line_search,
        }
        .search(alpha_init)?;
        let Some(p) = step else {
            if first {
                break Termination::LineSearchBreakdown;
            }
            // Retry once along steepest descent before giving up.
            hess.reset();
            first = true;
            continue;
        };
        iterations += 1;
        first = false;
        let s: Vec<f64> = p.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = p.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let decrease = value - p.value;
        let scale = value.abs().max(p.value.abs()).max(1.0);
        x = p.x;
        grad = p.grad;
        value = p.value;
        history.push(value);
        hess.update(s, y);
        if decrease <= opts.ftol * scale {
            let gnorm = norm(&grad);
            break if gnorm <= opts.gtol * value.abs().max(1.0) {
                Termination::GradientTolerance
            } else {
                Termination::FunctionTolerance
            };
        }
    };
    let report = OptimReport { iterations, evaluations, value, gradient_norm: norm(&grad), termination, history };
    Ok((x, report))
}
