//! Variable coefficients `a(t,x)`, `b(t,x)`, `c(t,x)` of the parabolic operator
//! `L y = -a y_xx + b y_x + c y`.

use std::fmt;
use std::sync::Arc;

use super::{Mesh, TimeGrid};
use crate::error::{Error, Result};

/// A scalar function of `(t, x)`.
pub type ScalarField = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

const DERIVATIVE_RTOL: f64 = 1e-4;

#[derive(Clone)]
pub struct CoefficientSet {
    a: ScalarField,
    b: ScalarField,
    c: ScalarField,
    a_x: Option<ScalarField>,
    a_xx: Option<ScalarField>,
    b_x: Option<ScalarField>,
    a0: f64,
    time_dependent: bool,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("a0", &self.a0)
            .field("time_dependent", &self.time_dependent)
            .field("analytic_derivatives", &self.a_x.is_some())
            .finish_non_exhaustive()
    }
}

fn constant_field(v: f64) -> ScalarField {
    Arc::new(move |_, _| v)
}

impl CoefficientSet {
    /// Constant coefficients; `a` must be positive.
    pub fn constant(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::Coefficient(format!("diffusion a = {a} must be positive")));
        }
        Ok(Self {
            a: constant_field(a),
            b: constant_field(b),
            c: constant_field(c),
            a_x: Some(constant_field(0.0)),
            a_xx: Some(constant_field(0.0)),
            b_x: Some(constant_field(0.0)),
            a0: a,
            time_dependent: false,
        })
    }

    /// The heat operator `y_t - y_xx`.
    pub fn heat() -> Self {
        Self::constant(1.0, 0.0, 0.0).expect("unit diffusion is valid")
    }

    /// General coefficients. Derivatives of `a` and `b` fall back to centered
    /// differences unless supplied with [`CoefficientSet::with_derivatives`].
    pub fn new(a: ScalarField, b: ScalarField, c: ScalarField, a0: f64, time_dependent: bool) -> Result<Self> {
        if !(a0 > 0.0) {
            return Err(Error::Coefficient(format!("ellipticity floor a0 = {a0} must be positive")));
        }
        Ok(Self { a, b, c, a_x: None, a_xx: None, b_x: None, a0, time_dependent })
    }

    pub fn with_derivatives(mut self, a_x: ScalarField, a_xx: ScalarField, b_x: ScalarField) -> Self {
        self.a_x = Some(a_x);
        self.a_xx = Some(a_xx);
        self.b_x = Some(b_x);
        self
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn time_dependent(&self) -> bool {
        self.time_dependent
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.a_x.is_some() && self.a_xx.is_some() && self.b_x.is_some()
    }

    pub fn a(&self, t: f64, x: f64) -> f64 {
        (self.a)(t, x)
    }

    pub fn b(&self, t: f64, x: f64) -> f64 {
        (self.b)(t, x)
    }

    pub fn c(&self, t: f64, x: f64) -> f64 {
        (self.c)(t, x)
    }

    /// `a_x`, analytic or by centered difference with step `h`.
    pub fn a_x(&self, t: f64, x: f64, h: f64) -> f64 {
        match &self.a_x {
            Some(f) => f(t, x),
            None => centered_first(&self.a, t, x, h),
        }
    }

    /// `a_xx`, analytic or by centered second difference with step `100 h`.
    pub fn a_xx(&self, t: f64, x: f64, h: f64) -> f64 {
        match &self.a_xx {
            Some(f) => f(t, x),
            None => centered_second(&self.a, t, x, second_difference_step(h)),
        }
    }

    pub fn b_x(&self, t: f64, x: f64, h: f64) -> f64 {
        match &self.b_x {
            Some(f) => f(t, x),
            None => centered_first(&self.b, t, x, h),
        }
    }

    /// Coefficients on the translated interval: `x -> x + offset`.
    pub fn shifted(&self, offset: f64) -> CoefficientSet {
        let shift = |f: &ScalarField| -> ScalarField {
            let f = f.clone();
            Arc::new(move |t, x| f(t, x + offset))
        };
        CoefficientSet {
            a: shift(&self.a),
            b: shift(&self.b),
            c: shift(&self.c),
            a_x: self.a_x.as_ref().map(shift),
            a_xx: self.a_xx.as_ref().map(shift),
            b_x: self.b_x.as_ref().map(shift),
            a0: self.a0,
            time_dependent: self.time_dependent,
        }
    }

    /// Checks `a >= a0` on every node / time level, and agreement of any supplied
    /// derivatives with finite differences.
    pub fn check(&self, mesh: &Mesh, grid: &TimeGrid) -> Result<()> {
        let h_fd = fd_step(mesh);
        for n in 0..=grid.steps() {
            let t = grid.time(n);
            for &x in mesh.nodes() {
                let a = self.a(t, x);
                if !a.is_finite() || a < self.a0 {
                    return Err(Error::Coefficient(format!(
                        "a({t}, {x}) = {a} is below the ellipticity floor {}",
                        self.a0
                    )));
                }
                for (name, v) in [("b", self.b(t, x)), ("c", self.c(t, x))] {
                    if !v.is_finite() {
                        return Err(Error::Coefficient(format!("{name}({t}, {x}) is not finite")));
                    }
                }
            }
        }
        // Derivative consistency on interior nodes at a handful of time levels.
        let times = [0, grid.steps() / 2, grid.steps()];
        let nodes = mesh.nodes();
        for &n in &times {
            let t = grid.time(n);
            for &x in &nodes[1..nodes.len() - 1] {
                let pairs: [(&str, Option<&ScalarField>, f64); 3] = [
                    ("a_x", self.a_x.as_ref(), centered_first(&self.a, t, x, h_fd)),
                    ("a_xx", self.a_xx.as_ref(), centered_second(&self.a, t, x, second_difference_step(h_fd))),
                    ("b_x", self.b_x.as_ref(), centered_first(&self.b, t, x, h_fd)),
                ];
                for (name, supplied, fd) in pairs {
                    if let Some(f) = supplied {
                        let v = f(t, x);
                        let scale = 1.0_f64.max(v.abs()).max(fd.abs());
                        if (v - fd).abs() > DERIVATIVE_RTOL * scale {
                            return Err(Error::Coefficient(format!(
                                "supplied {name}({t}, {x}) = {v} disagrees with finite difference {fd}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Finite-difference step used for coefficient derivatives on `mesh`.
pub fn fd_step(mesh: &Mesh) -> f64 {
    1e-6 * mesh.length().max(1.0)
}

// A step of 1e-6 leaves ~1e-4 roundoff in a second difference; 1e-4 balances
// truncation and roundoff.
fn second_difference_step(h: f64) -> f64 {
    h * 100.0
}

fn centered_first(f: &ScalarField, t: f64, x: f64, h: f64) -> f64 {
    (f(t, x + h) - f(t, x - h)) / (2.0 * h)
}

fn centered_second(f: &ScalarField, t: f64, x: f64, h: f64) -> f64 {
    (f(t, x + h) - 2.0 * f(t, x) + f(t, x - h)) / (h * h)
}
