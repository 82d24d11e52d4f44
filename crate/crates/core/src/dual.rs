//! The dual (HUM) functional for pointwise tracking, its exact discrete gradient,
//! control recovery from adjoint boundary fluxes, and tracking errors.
//!
//! For forcing `f` with adjoint `p_f`,
//!
//! ```text
//! J(f) = dt/2 Σ_n Σ_sides a(t_n, side) |∂ₓp_f|² + dt Σ_n Σ_i f_i^n w_i^n + ε sqrt(dt Σ |f|² + δ)
//! ```
//!
//! Flux sample `n` (solve time `t_n`) is read from the adjoint at level `t_{n-1}`,
//! the output of reversed step `N_t + 1 - n`; the same step consumes `f^n`.
//! The gradient differentiates this discrete composition exactly (a transposed
//! forward-in-time sweep), so it agrees with finite differences of `J` to rounding.

use crate::error::{Error, Result};
use crate::fem::{
    assemble_mass, discrete_norm, CoefficientSet, GridSignal, Mesh, PointWeights, Side, TimeGrid, Tridiagonal,
};
use crate::optim::{minimize, OptimOptions, OptimReport};
use crate::solvers::{
    mass_rhs, reversed_level, solve_adjoint_with, solve_forward_with, BoundaryControls, FactorCache, ObservationSet,
    SpaceTimeField,
};

pub use crate::solvers::DualForcing;

/// Default norm smoothing.
pub const DEFAULT_DELTA: f64 = 1e-14;

/// A pointwise tracking problem together with its reusable factorizations.
#[derive(Debug, Clone)]
pub struct TrackingProblem {
    mesh: Mesh,
    grid: TimeGrid,
    coeffs: CoefficientSet,
    sides: Vec<Side>,
    observations: ObservationSet,
    targets: Vec<GridSignal>,
    epsilon: f64,
    delta: f64,
    forward: FactorCache,
    adjoint: FactorCache,
    mass: Tridiagonal,
}

/// Per-target errors `E_i` and `sqrt(Σ E_i²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingError {
    pub per_target: Vec<f64>,
    pub combined: f64,
}

/// Adjoint boundary fluxes per signal index, for each side (zero if uncontrolled).
struct Fluxes {
    left: Vec<f64>,
    right: Vec<f64>,
}

impl TrackingProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mesh: Mesh,
        grid: TimeGrid,
        coeffs: CoefficientSet,
        sides: Vec<Side>,
        observations: ObservationSet,
        targets: Vec<GridSignal>,
        epsilon: f64,
        delta: f64,
    ) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(delta >= 0.0) {
            return Err(Error::invalid(format!("delta must be nonnegative, got {delta}")));
        }
        let mut sides = sides;
        sides.sort_by_key(|s| match s {
            Side::Left => 0,
            Side::Right => 1,
        });
        sides.dedup();
        if sides.is_empty() {
            return Err(Error::invalid("at least one control side is required"));
        }
        if targets.len() != observations.len() {
            return Err(Error::Dimension { what: "target count", expected: observations.len(), got: targets.len() });
        }
        for w in &targets {
            w.check_len(&grid, "target signal")?;
        }
        coeffs.check(&mesh, &grid)?;
        let forward = FactorCache::new(&mesh, &grid, &coeffs, false)?;
        let adjoint = FactorCache::new(&mesh, &grid, &coeffs, true)?;
        let mass = assemble_mass(&mesh);
        Ok(Self { mesh, grid, coeffs, sides, observations, targets, epsilon, delta, forward, adjoint, mass })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &CoefficientSet {
        &self.coeffs
    }

    pub fn sides(&self) -> &[Side] {
        &self.sides
    }

    pub fn observations(&self) -> &ObservationSet {
        &self.observations
    }

    pub fn targets(&self) -> &[GridSignal] {
        &self.targets
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn unknowns(&self) -> usize {
        self.observations.len() * self.grid.steps()
    }

    pub fn forward_cache(&self) -> &FactorCache {
        &self.forward
    }

    pub fn adjoint_cache(&self) -> &FactorCache {
        &self.adjoint
    }

    fn controls_left(&self) -> bool {
        self.sides.contains(&Side::Left)
    }

    fn controls_right(&self) -> bool {
        self.sides.contains(&Side::Right)
    }

    pub fn zero_forcing(&self) -> DualForcing {
        DualForcing::zeros(self.observations.len(), &self.grid)
    }

    pub fn solve_adjoint(&self, f: &DualForcing) -> Result<SpaceTimeField> {
        solve_adjoint_with(&self.adjoint, &self.mesh, &self.grid, &self.observations, f)
    }

    pub fn solve_forward(&self, controls: &BoundaryControls) -> Result<SpaceTimeField> {
        solve_forward_with(&self.forward, &self.mesh, &self.grid, controls)
    }

    fn fluxes(&self, f: &DualForcing) -> Result<Fluxes> {
        f.validate(&self.observations, &self.grid)?;
        let steps = self.grid.steps();
        let ni = self.mesh.interior_count();
        let h = self.mesh.h();
        let dt = self.grid.dt();
        let mut left = vec![0.0; steps];
        let mut right = vec![0.0; steps];
        let mut prev = vec![0.0; ni + 2];
        let mut rhs = vec![0.0; ni];
        for m in 1..=steps {
            let n = reversed_level(steps, m);
            let t = self.grid.time(n);
            mass_rhs(self.adjoint.mass_full(), dt, &prev, &mut rhs);
            for (loc, sig) in self.observations.locations().iter().zip(&f.signals) {
                PointWeights::at(&self.mesh, loc.at(t)).scatter_interior(sig[n - 1], &mut rhs);
            }
            self.adjoint.system(n).lu.solve_in_place(&mut rhs);
            left[n - 1] = rhs[0] / h;
            right[n - 1] = -rhs[ni - 1] / h;
            prev[1..=ni].copy_from_slice(&rhs);
        }
        Ok(Fluxes { left, right })
    }

    fn weight(&self, side: Side, n: usize) -> f64 {
        self.coeffs.a(self.grid.time(n), side.coordinate(&self.mesh))
    }

    fn quadratic_term(&self, fl: &Fluxes) -> f64 {
        let dt = self.grid.dt();
        let mut acc = 0.0;
        for n in 1..=self.grid.steps() {
            if self.controls_left() {
                acc += self.weight(Side::Left, n) * fl.left[n - 1].powi(2);
            }
            if self.controls_right() {
                acc += self.weight(Side::Right, n) * fl.right[n - 1].powi(2);
            }
        }
        0.5 * dt * acc
    }

    fn linear_term(&self, f: &DualForcing) -> f64 {
        let dt = self.grid.dt();
        dt * f
            .signals
            .iter()
            .zip(&self.targets)
            .map(|(fi, wi)| fi.iter().zip(wi.iter()).map(|(a, b)| a * b).sum::<f64>())
            .sum::<f64>()
    }

    /// `J = J₁ + J₂ + J₃`.
    pub fn evaluate_j(&self, f: &DualForcing) -> Result<f64> {
        let fl = self.fluxes(f)?;
        let norm = discrete_norm(&f.signals, self.grid.dt(), self.delta);
        Ok(self.quadratic_term(&fl) + self.linear_term(f) + self.epsilon * norm)
    }

    /// Gradient of [`TrackingProblem::evaluate_j`] with respect to the grid values of `f`.
    pub fn evaluate_gradient(&self, f: &DualForcing) -> Result<DualForcing> {
        Ok(self.value_and_gradient(f)?.1)
    }

    pub fn value_and_gradient(&self, f: &DualForcing) -> Result<(f64, DualForcing)> {
        let fl = self.fluxes(f)?;
        let dt = self.grid.dt();
        let norm = discrete_norm(&f.signals, dt, self.delta);
        if norm == 0.0 {
            return Err(Error::SmoothingRequired);
        }
        let value = self.quadratic_term(&fl) + self.linear_term(f) + self.epsilon * norm;

        let steps = self.grid.steps();
        let ni = self.mesh.interior_count();
        let h = self.mesh.h();
        let mut grad = self.zero_forcing();
        let mut z_next = vec![0.0; ni];
        let mut rhs = vec![0.0; ni];
        // Reversed steps m = N_t .. 1 visit physical levels n = 1 .. N_t.
        for n in 1..=steps {
            let k = n - 1;
            self.mass.matvec_into(&z_next, &mut rhs);
            rhs.iter_mut().for_each(|v| *v /= dt);
            if self.controls_left() {
                rhs[0] += dt * self.weight(Side::Left, n) * fl.left[k] / h;
            }
            if self.controls_right() {
                rhs[ni - 1] -= dt * self.weight(Side::Right, n) * fl.right[k] / h;
            }
            self.adjoint.system(n).lu.solve_transpose_in_place(&mut rhs);
            let t = self.grid.time(n);
            for (loc, g) in self.observations.locations().iter().zip(grad.signals.iter_mut()) {
                g[k] = PointWeights::at(&self.mesh, loc.at(t)).dot_interior(&rhs);
            }
            std::mem::swap(&mut z_next, &mut rhs);
        }
        let scale = self.epsilon * dt / norm;
        for ((g, fi), wi) in grad.signals.iter_mut().zip(&f.signals).zip(&self.targets) {
            for ((gv, fv), wv) in g.iter_mut().zip(fi.iter()).zip(wi.iter()) {
                *gv += dt * wv + scale * fv;
            }
        }
        Ok((value, grad))
    }

    /// Controls `v = ∂p_f/∂ν` on every controlled side (outward normal derivative:
    /// `-∂ₓp` at `x = 0`, `∂ₓp` at `x = L`).
    pub fn recover_controls(&self, f: &DualForcing) -> Result<BoundaryControls> {
        let fl = self.fluxes(f)?;
        Ok(BoundaryControls {
            left: self
                .controls_left()
                .then(|| GridSignal(fl.left.iter().map(|v| Side::Left.outward_sign() * v).collect())),
            right: self.controls_right().then_some(GridSignal(fl.right)),
        })
    }

    /// Traces of the controlled state at each observation location.
    pub fn traces(&self, controls: &BoundaryControls) -> Result<Vec<GridSignal>> {
        let y = self.solve_forward(controls)?;
        Ok(self.observations.locations().iter().map(|loc| y.trace_signal(&self.mesh, &self.grid, loc)).collect())
    }

    /// `E_i = sqrt(dt Σ_n |y(t_n, x_i(t_n)) - w_i^n|²)`.
    pub fn tracking_error(&self, controls: &BoundaryControls) -> Result<TrackingError> {
        let traces = self.traces(controls)?;
        Ok(self.errors_from_traces(&traces))
    }

    pub fn errors_from_traces(&self, traces: &[GridSignal]) -> TrackingError {
        let dt = self.grid.dt();
        let per_target: Vec<f64> = traces
            .iter()
            .zip(&self.targets)
            .map(|(y, w)| (dt * y.iter().zip(w.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).sqrt())
            .collect();
        let combined = per_target.iter().map(|e| e * e).sum::<f64>().sqrt();
        TrackingError { per_target, combined }
    }
}

/// Minimizes `J` from `f = 0` in the variables `sqrt(dt)·f`, whose Euclidean
/// gradient norm is the time-weighted norm of `∂J/∂f / dt`.
pub fn minimize_dual(problem: &TrackingProblem, opts: &OptimOptions) -> Result<(DualForcing, OptimReport)> {
    let count = problem.observations().len();
    let root = problem.grid().dt().sqrt();
    let objective = |u: &[f64]| {
        let f: Vec<f64> = u.iter().map(|v| v / root).collect();
        let (value, grad) = problem.value_and_gradient(&DualForcing::from_flat(&f, count)?)?;
        Ok((value, grad.flatten().into_iter().map(|g| g / root).collect()))
    };
    let (u, report) = minimize(objective, &vec![0.0; problem.unknowns()], opts)?;
    let f: Vec<f64> = u.iter().map(|v| v / root).collect();
    Ok((DualForcing::from_flat(&f, count)?, report))
}
