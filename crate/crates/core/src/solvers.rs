//! Backward-Euler time stepping for the controlled state and for the adjoint
//! driven by point sources.
//!
//! Index conventions. The state is stored at physical levels `t_0 .. t_{N_t}`.
//! The adjoint is computed in reversed time `s = T - t`: reversed step `m`
//! (`m = 1 .. N_t`) produces the adjoint at `t_{N_t - m}` and is driven by the
//! forcing sample of solve time `t_{N_t + 1 - m}`, i.e. signal entry `N_t - m`.
//! Operators and moving source locations for that step are evaluated at the same
//! solve time, so forward step `n` and reversed step `N_t + 1 - n` share one
//! system matrix.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fem::{
    assemble_mass_full, assemble_operator_full, CoefficientSet, GridSignal, Mesh, PointWeights, Side, TimeGrid,
    Tridiagonal, TridiagonalLu,
};
use crate::moving::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldRole {
    State,
    Adjoint,
}

/// Nodal values (boundary included) at every time level `t_0 .. t_{N_t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    role: FieldRole,
    nodes: usize,
    values: Vec<f64>,
}

impl SpaceTimeField {
    fn from_levels(role: FieldRole, levels: Vec<Vec<f64>>) -> Self {
        let nodes = levels[0].len();
        let values = levels.into_iter().flatten().collect();
        Self { role, nodes, values }
    }

    pub fn role(&self) -> FieldRole {
        self.role
    }

    pub fn level_count(&self) -> usize {
        self.values.len() / self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    /// Nodal vector at time level `n`.
    pub fn level(&self, n: usize) -> &[f64] {
        &self.values[n * self.nodes..(n + 1) * self.nodes]
    }

    pub fn at(&self, n: usize, j: usize) -> f64 {
        self.values[n * self.nodes + j]
    }

    /// Same field with the time axis reversed.
    pub fn reversed(&self) -> SpaceTimeField {
        let levels = self.level_count();
        let values = (0..levels).rev().flat_map(|n| self.level(n).iter().copied()).collect();
        SpaceTimeField { role: self.role, nodes: self.nodes, values }
    }

    /// Discrete space-time L² norm `sqrt(dt Σ_n h Σ_j u²)` over levels 1..N_t.
    pub fn l2_norm(&self, mesh: &Mesh, grid: &TimeGrid) -> f64 {
        let mut acc = 0.0;
        for n in 1..self.level_count() {
            acc += self.level(n).iter().map(|v| v * v).sum::<f64>();
        }
        (acc * grid.dt() * mesh.h()).sqrt()
    }

    /// P1 trace at `location` for every solve time `t_1 .. t_{N_t}`.
    pub fn trace_signal(&self, mesh: &Mesh, grid: &TimeGrid, location: &Location) -> GridSignal {
        GridSignal(
            (1..=grid.steps())
                .map(|n| PointWeights::at(mesh, location.at(grid.time(n))).interpolate(self.level(n)))
                .collect(),
        )
    }

    /// CSV dump: one row per time level, columns `t, u_0 .. u_{N_e}`.
    pub fn write_csv<W: Write>(&self, grid: &TimeGrid, mut out: W) -> std::io::Result<()> {
        write!(out, "t")?;
        for j in 0..self.nodes {
            write!(out, ",u_{j}")?;
        }
        writeln!(out)?;
        for n in 0..self.level_count() {
            write!(out, "{:.16e}", grid.time(n))?;
            for v in self.level(n) {
                write!(out, ",{v:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Dirichlet boundary controls on the solve-time grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryControls {
    pub left: Option<GridSignal>,
    pub right: Option<GridSignal>,
}

impl BoundaryControls {
    pub fn right(v: GridSignal) -> Self {
        Self { left: None, right: Some(v) }
    }

    pub fn both(left: GridSignal, right: GridSignal) -> Self {
        Self { left: Some(left), right: Some(right) }
    }

    pub fn get(&self, side: Side) -> Option<&GridSignal> {
        match side {
            Side::Left => self.left.as_ref(),
            Side::Right => self.right.as_ref(),
        }
    }

    pub fn validate(&self, grid: &TimeGrid) -> Result<()> {
        if self.left.is_none() && self.right.is_none() {
            return Err(Error::invalid("at least one boundary control is required"));
        }
        for s in self.left.iter().chain(self.right.iter()) {
            s.check_len(grid, "boundary control")?;
        }
        Ok(())
    }

    /// Boundary value at physical level `n` (`0` at `t_0`).
    fn value(&self, side: Side, n: usize) -> f64 {
        match (self.get(side), n) {
            (_, 0) | (None, _) => 0.0,
            (Some(s), n) => s[n - 1],
        }
    }
}

/// An observation location: fixed coordinate or moving trajectory.
#[derive(Debug, Clone)]
pub enum Location {
    Fixed(f64),
    Moving(Trajectory),
}

impl Location {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Location::Fixed(x) => *x,
            Location::Moving(h) => h.eval(t),
        }
    }

    pub fn is_moving(&self) -> bool {
        matches!(self, Location::Moving(_))
    }
}

/// Ordered observation locations `x_1 < .. < x_N` inside `(0, L)`.
#[derive(Debug, Clone)]
pub struct ObservationSet {
    locations: Vec<Location>,
}

impl ObservationSet {
    /// Validates strict interiority and ordering at every level of `grid`.
    pub fn new(locations: Vec<Location>, mesh: &Mesh, grid: &TimeGrid) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::invalid("at least one observation location is required"));
        }
        for n in 0..=grid.steps() {
            let t = grid.time(n);
            let xs: Vec<f64> = locations.iter().map(|l| l.at(t)).collect();
            if let Some(x) = xs.iter().find(|x| !(**x > 0.0 && **x < mesh.length())) {
                return Err(Error::invalid(format!(
                    "observation point {x} at t = {t} is not inside (0, {})",
                    mesh.length()
                )));
            }
            if xs.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!("observation points not strictly ordered at t = {t}")));
            }
        }
        Ok(Self { locations })
    }

    pub fn fixed(points: &[f64], mesh: &Mesh, grid: &TimeGrid) -> Result<Self> {
        Self::new(points.iter().map(|&x| Location::Fixed(x)).collect(), mesh, grid)
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn moving(&self) -> bool {
        self.locations.iter().any(Location::is_moving)
    }
}

/// Dual unknowns `f_1 .. f_N`, one [`GridSignal`] per observation location.
#[derive(Debug, Clone, PartialEq)]
pub struct DualForcing {
    pub signals: Vec<GridSignal>,
}

impl DualForcing {
    pub fn zeros(count: usize, grid: &TimeGrid) -> Self {
        Self { signals: vec![GridSignal::zeros(grid.steps()); count] }
    }

    /// Concatenation `f_1, f_2, ..`.
    pub fn flatten(&self) -> Vec<f64> {
        self.signals.iter().flat_map(|s| s.iter().copied()).collect()
    }

    pub fn from_flat(flat: &[f64], count: usize) -> Result<Self> {
        if count == 0 || !flat.len().is_multiple_of(count) {
            return Err(Error::Dimension { what: "flattened forcing", expected: count, got: flat.len() });
        }
        let steps = flat.len() / count;
        Ok(Self { signals: flat.chunks(steps).map(|c| GridSignal(c.to_vec())).collect() })
    }

    pub fn validate(&self, observations: &ObservationSet, grid: &TimeGrid) -> Result<()> {
        if self.signals.len() != observations.len() {
            return Err(Error::Dimension {
                what: "forcing signal count",
                expected: observations.len(),
                got: self.signals.len(),
            });
        }
        for s in &self.signals {
            s.check_len(grid, "forcing signal")?;
        }
        Ok(())
    }

    pub fn linear_combination(&self, alpha: f64, other: &DualForcing, beta: f64) -> DualForcing {
        DualForcing {
            signals: self
                .signals
                .iter()
                .zip(&other.signals)
                .map(|(f, g)| GridSignal(f.iter().zip(g.iter()).map(|(a, b)| alpha * a + beta * b).collect()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct StepSystem {
    /// Full `M/dt + A` including boundary rows and columns.
    pub full: Tridiagonal,
    /// Factors of its interior block.
    pub lu: TridiagonalLu,
}

/// Factored backward-Euler systems `M/dt + A(t_n)` for `n = 1 .. N_t`.
///
/// Time-independent coefficients share a single factorization.
#[derive(Debug, Clone)]
pub struct FactorCache {
    adjoint: bool,
    steps: usize,
    mass_full: Tridiagonal,
    systems: Vec<StepSystem>,
}

impl FactorCache {
    pub fn new(mesh: &Mesh, grid: &TimeGrid, coeffs: &CoefficientSet, adjoint: bool) -> Result<Self> {
        let dt = grid.dt();
        let mass_full = assemble_mass_full(mesh);
        let build = |n: usize| -> Result<StepSystem> {
            let op = assemble_operator_full(mesh, coeffs, grid.time(n), adjoint)?;
            let full = mass_full.combine(1.0 / dt, &op, 1.0);
            let lu = full.interior().factor().map_err(|e| match e {
                Error::Singular { row, .. } => Error::Singular { step: n, row },
                other => other,
            })?;
            Ok(StepSystem { full, lu })
        };
        let systems = if coeffs.time_dependent() {
            (1..=grid.steps()).map(build).collect::<Result<Vec<_>>>()?
        } else {
            vec![build(grid.steps())?]
        };
        Ok(Self { adjoint, steps: grid.steps(), mass_full, systems })
    }

    pub fn adjoint(&self) -> bool {
        self.adjoint
    }

    pub fn factorizations(&self) -> usize {
        self.systems.len()
    }

    /// System for physical solve level `n` in `1 ..= N_t`.
    pub(crate) fn system(&self, n: usize) -> &StepSystem {
        debug_assert!((1..=self.steps).contains(&n));
        if self.systems.len() == 1 {
            &self.systems[0]
        } else {
            &self.systems[n - 1]
        }
    }

    pub(crate) fn mass_full(&self) -> &Tridiagonal {
        &self.mass_full
    }
}

/// Reusable factorization handle for `(M/dt + A)` (or the adjoint operator).
pub fn factor_cache(mesh: &Mesh, grid: &TimeGrid, coeffs: &CoefficientSet, adjoint: bool) -> Result<FactorCache> {
    FactorCache::new(mesh, grid, coeffs, adjoint)
}

/// `(M u)_j / dt` for interior rows `j = 1 .. N_e - 1`, written into `out` (interior indexing).
pub(crate) fn mass_rhs(mass_full: &Tridiagonal, dt: f64, u: &[f64], out: &mut [f64]) {
    let lower = mass_full.lower();
    let diag = mass_full.diag();
    let upper = mass_full.upper();
    for (i, o) in out.iter_mut().enumerate() {
        let j = i + 1;
        *o = (lower[j - 1] * u[j - 1] + diag[j] * u[j] + upper[j] * u[j + 1]) / dt;
    }
}

/// Generic backward-Euler march over `N_t` steps.
///
/// `system_level(k)` gives the physical level whose system is used at march step `k`,
/// `boundary(k)` gives the Dirichlet values `(left, right)` at march level `k`
/// (level 0 is the initial datum, identically zero), and `load(k, rhs)` adds
/// interior source terms.
pub(crate) fn march(
    cache: &FactorCache,
    mesh: &Mesh,
    grid: &TimeGrid,
    system_level: impl Fn(usize) -> usize,
    boundary: impl Fn(usize) -> (f64, f64),
    mut load: impl FnMut(usize, &mut [f64]),
) -> Vec<Vec<f64>> {
    let ne = mesh.elements();
    let dt = grid.dt();
    let mut levels = Vec::with_capacity(grid.steps() + 1);
    let mut prev = vec![0.0; ne + 1];
    levels.push(prev.clone());
    let mut rhs = vec![0.0; ne - 1];
    for k in 1..=grid.steps() {
        let sys = cache.system(system_level(k));
        let (left, right) = boundary(k);
        mass_rhs(cache.mass_full(), dt, &prev, &mut rhs);
        rhs[0] -= sys.full.get(1, 0) * left;
        rhs[ne - 2] -= sys.full.get(ne - 1, ne) * right;
        load(k, &mut rhs);
        sys.lu.solve_in_place(&mut rhs);
        let mut next = Vec::with_capacity(ne + 1);
        next.push(left);
        next.extend_from_slice(&rhs);
        next.push(right);
        levels.push(next.clone());
        prev = next;
    }
    levels
}

/// Controlled state with zero initial datum; uncontrolled boundaries are held at zero.
pub fn solve_forward(
    mesh: &Mesh,
    grid: &TimeGrid,
    coeffs: &CoefficientSet,
    controls: &BoundaryControls,
) -> Result<SpaceTimeField> {
    let cache = FactorCache::new(mesh, grid, coeffs, false)?;
    solve_forward_with(&cache, mesh, grid, controls)
}

pub fn solve_forward_with(
    cache: &FactorCache,
    mesh: &Mesh,
    grid: &TimeGrid,
    controls: &BoundaryControls,
) -> Result<SpaceTimeField> {
    if cache.adjoint() {
        return Err(Error::invalid("forward solve needs a forward-operator factorization"));
    }
    controls.validate(grid)?;
    let levels =
        march(cache, mesh, grid, |n| n, |n| (controls.value(Side::Left, n), controls.value(Side::Right, n)), |_, _| {});
    Ok(SpaceTimeField::from_levels(FieldRole::State, levels))
}

/// Forward solve with an additional volume source `g(t, x)` (consistent P1 load,
/// two-point Gauss per element, evaluated at each solve time). Used for
/// manufactured-solution checks.
pub fn solve_forward_with_source(
    mesh: &Mesh,
    grid: &TimeGrid,
    coeffs: &CoefficientSet,
    controls: &BoundaryControls,
    source: impl Fn(f64, f64) -> f64,
) -> Result<SpaceTimeField> {
    controls.validate(grid)?;
    let cache = FactorCache::new(mesh, grid, coeffs, false)?;
    let h = mesh.h();
    let offset = h / (2.0 * 3f64.sqrt());
    let levels = march(
        &cache,
        mesh,
        grid,
        |n| n,
        |n| (controls.value(Side::Left, n), controls.value(Side::Right, n)),
        |n, rhs| {
            let t = grid.time(n);
            for k in 0..mesh.elements() {
                let mid = 0.5 * (mesh.node(k) + mesh.node(k + 1));
                for x in [mid - offset, mid + offset] {
                    let g = 0.5 * h * source(t, x);
                    PointWeights::at(mesh, x).scatter_interior(g, rhs);
                }
            }
        },
    );
    Ok(SpaceTimeField::from_levels(FieldRole::State, levels))
}

/// Physical solve level driving reversed step `m`.
#[inline]
pub(crate) fn reversed_level(steps: usize, m: usize) -> usize {
    steps + 1 - m
}

/// Adjoint with homogeneous Dirichlet data, zero final datum and point sources
/// `Σ_i f_i δ_{x_i}`. Returned with physical time ordering (level `N_t` is zero).
pub fn solve_adjoint(
    mesh: &Mesh,
    grid: &TimeGrid,
    coeffs: &CoefficientSet,
    observations: &ObservationSet,
    forcing: &DualForcing,
) -> Result<SpaceTimeField> {
    let cache = FactorCache::new(mesh, grid, coeffs, true)?;
    solve_adjoint_with(&cache, mesh, grid, observations, forcing)
}

pub fn solve_adjoint_with(
    cache: &FactorCache,
    mesh: &Mesh,
    grid: &TimeGrid,
    observations: &ObservationSet,
    forcing: &DualForcing,
) -> Result<SpaceTimeField> {
    if !cache.adjoint() {
        return Err(Error::invalid("adjoint solve needs an adjoint-operator factorization"));
    }
    forcing.validate(observations, grid)?;
    let steps = grid.steps();
    let levels = march(
        cache,
        mesh,
        grid,
        |m| reversed_level(steps, m),
        |_| (0.0, 0.0),
        |m, rhs| {
            let n = reversed_level(steps, m);
            let t = grid.time(n);
            for (loc, f) in observations.locations().iter().zip(&forcing.signals) {
                PointWeights::at(mesh, loc.at(t)).scatter_interior(f[n - 1], rhs);
            }
        },
    );
    Ok(SpaceTimeField::from_levels(FieldRole::Adjoint, levels).reversed())
}

/// Adjoint-operator solve with prescribed Dirichlet values and no sources; boundary
/// functions take the physical solve level `n` of each reversed step. Physical ordering.
pub fn solve_adjoint_dirichlet(
    mesh: &Mesh,
    grid: &TimeGrid,
    coeffs: &CoefficientSet,
    left: impl Fn(usize) -> f64,
    right: impl Fn(usize) -> f64,
) -> Result<SpaceTimeField> {
    let cache = FactorCache::new(mesh, grid, coeffs, true)?;
    let steps = grid.steps();
    let levels = march(
        &cache,
        mesh,
        grid,
        |m| reversed_level(steps, m),
        |m| {
            let n = reversed_level(steps, m);
            (left(n), right(n))
        },
        |_, _| {},
    );
    Ok(SpaceTimeField::from_levels(FieldRole::Adjoint, levels).reversed())
}
