//! Uniform 1D meshes, P1 finite-element assembly, point loads, traces and
//! discrete time-grid norms.

mod coefficients;
mod tridiag;

pub use coefficients::{fd_step, CoefficientSet, ScalarField};
pub use tridiag::{Tridiagonal, TridiagonalLu};

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform partition of `[0, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    length: f64,
    elements: usize,
    h: f64,
    nodes: Vec<f64>,
}

impl Mesh {
    pub fn new(length: f64, elements: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::invalid(format!("mesh length must be positive, got {length}")));
        }
        if elements < 2 {
            return Err(Error::invalid(format!("mesh needs at least 2 elements, got {elements}")));
        }
        let h = length / elements as f64;
        let mut nodes: Vec<f64> = (0..=elements).map(|j| j as f64 * h).collect();
        nodes[elements] = length;
        Ok(Self { length, elements, h, nodes })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn node_count(&self) -> usize {
        self.elements + 1
    }

    pub fn interior_count(&self) -> usize {
        self.elements - 1
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// Element index `k` and local coordinate so that `x = x_k + theta * h`, `theta` in `[0, 1]`.
    /// Points within 1e-10 (relative to `h`) of a node snap onto it.
    fn locate(&self, x: f64) -> (usize, f64) {
        let s = x / self.h;
        let nearest = s.round();
        let s = if (s - nearest).abs() < 1e-10 { nearest } else { s };
        let k = (s.floor() as usize).min(self.elements - 1);
        (k, s - k as f64)
    }
}

/// Build a uniform mesh of `[0, length]` with `elements` subintervals.
pub fn build_mesh(length: f64, elements: usize) -> Result<Mesh> {
    Mesh::new(length, elements)
}

/// Uniform partition of `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::invalid(format!("time horizon must be positive, got {horizon}")));
        }
        if steps < 1 {
            return Err(Error::invalid("time grid needs at least one step"));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// `t_n = n dt`, exact at `n = steps`.
    pub fn time(&self, n: usize) -> f64 {
        if n == self.steps {
            self.horizon
        } else {
            n as f64 * self.dt()
        }
    }

    /// Solve times `t_1 .. t_{N_t}`, the abscissae of every [`GridSignal`].
    pub fn solve_times(&self) -> Vec<f64> {
        (1..=self.steps).map(|n| self.time(n)).collect()
    }
}

/// One value per solve time `t_1 .. t_{N_t}`; entry `k` belongs to `t_{k+1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GridSignal(pub Vec<f64>);

impl GridSignal {
    pub fn zeros(steps: usize) -> Self {
        GridSignal(vec![0.0; steps])
    }

    /// Samples `f` at the solve times of `grid`.
    pub fn sample(grid: &TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        GridSignal(grid.solve_times().into_iter().map(f).collect())
    }

    pub fn check_len(&self, grid: &TimeGrid, what: &'static str) -> Result<()> {
        if self.0.len() != grid.steps() {
            return Err(Error::Dimension { what, expected: grid.steps(), got: self.0.len() });
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> GridSignal {
        GridSignal(self.0.iter().map(|v| s * v).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for GridSignal {
    type Target = Vec<f64>;
    fn deref(&self) -> &Vec<f64> {
        &self.0
    }
}

impl DerefMut for GridSignal {
    fn deref_mut(&mut self) -> &mut Vec<f64> {
        &mut self.0
    }
}

impl From<Vec<f64>> for GridSignal {
    fn from(v: Vec<f64>) -> Self {
        GridSignal(v)
    }
}

/// Full (boundary nodes included) consistent P1 mass matrix.
pub fn assemble_mass_full(mesh: &Mesh) -> Tridiagonal {
    let n = mesh.node_count();
    let h = mesh.h();
    let mut m = Tridiagonal::zeros(n);
    for k in 0..mesh.elements() {
        m.add(k, k, h / 3.0);
        m.add(k + 1, k + 1, h / 3.0);
        m.add(k, k + 1, h / 6.0);
        m.add(k + 1, k, h / 6.0);
    }
    m
}

/// Mass matrix restricted to interior nodes.
pub fn assemble_mass(mesh: &Mesh) -> Tridiagonal {
    assemble_mass_full(mesh).interior()
}

const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // 1 / (2 sqrt 3)

/// Full operator matrix at time `t`, rows indexed by test function.
///
/// Forward: `∫ a y'φ' + ∫ (a_x + b) y'φ + ∫ c yφ`.
/// Adjoint: `∫ a p'φ' - ∫ (a_x + b) p'φ + ∫ (c - a_xx - b_x) pφ`.
pub fn assemble_operator_full(mesh: &Mesh, coeffs: &CoefficientSet, t: f64, adjoint: bool) -> Result<Tridiagonal> {
    let n = mesh.node_count();
    let h = mesh.h();
    let h_fd = fd_step(mesh);
    let mut out = Tridiagonal::zeros(n);
    let dphi = [-1.0 / h, 1.0 / h];
    for k in 0..mesh.elements() {
        let mid = 0.5 * (mesh.node(k) + mesh.node(k + 1));
        let mut local = [[0.0; 2]; 2];
        for x in [mid - GAUSS_OFFSET * h, mid + GAUSS_OFFSET * h] {
            let w = 0.5 * h;
            let theta = (x - mesh.node(k)) / h;
            let phi = [1.0 - theta, theta];
            let a = coeffs.a(t, x);
            let beta = coeffs.a_x(t, x, h_fd) + coeffs.b(t, x);
            let (advection, reaction) = if adjoint {
                (-beta, coeffs.c(t, x) - coeffs.a_xx(t, x, h_fd) - coeffs.b_x(t, x, h_fd))
            } else {
                (beta, coeffs.c(t, x))
            };
            if !(a.is_finite() && advection.is_finite() && reaction.is_finite()) {
                return Err(Error::Coefficient(format!("non-finite coefficient at (t, x) = ({t}, {x})")));
            }
            for i in 0..2 {
                for j in 0..2 {
                    local[i][j] +=
                        w * (a * dphi[i] * dphi[j] + advection * dphi[j] * phi[i] + reaction * phi[j] * phi[i]);
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                out.add(k + i, k + j, local[i][j]);
            }
        }
    }
    Ok(out)
}

/// Operator matrix restricted to interior nodes.
pub fn assemble_operator(mesh: &Mesh, coeffs: &CoefficientSet, t: f64, adjoint: bool) -> Result<Tridiagonal> {
    Ok(assemble_operator_full(mesh, coeffs, t, adjoint)?.interior())
}

/// Sparse point load: nodal basis values at the source, keyed by global node index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointWeights {
    pub nodes: [usize; 2],
    pub weights: [f64; 2],
}

impl PointWeights {
    pub fn at(mesh: &Mesh, x: f64) -> Self {
        let (k, theta) = mesh.locate(x);
        PointWeights { nodes: [k, k + 1], weights: [1.0 - theta, theta] }
    }

    /// `Σ_j φ_j(x) u_j` for a full nodal vector.
    pub fn interpolate(&self, nodal: &[f64]) -> f64 {
        self.weights[0] * nodal[self.nodes[0]] + self.weights[1] * nodal[self.nodes[1]]
    }

    /// Adds `scale * φ_j(x)` to an interior-indexed vector, dropping boundary nodes.
    pub fn scatter_interior(&self, scale: f64, interior: &mut [f64]) {
        let last = interior.len() + 1;
        for (&node, &w) in self.nodes.iter().zip(&self.weights) {
            if node > 0 && node < last {
                interior[node - 1] += scale * w;
            }
        }
    }

    /// `Σ_j φ_j(x) u_j` over an interior-indexed vector (boundary values taken as zero).
    pub fn dot_interior(&self, interior: &[f64]) -> f64 {
        let last = interior.len() + 1;
        self.nodes
            .iter()
            .zip(&self.weights)
            .filter(|(&node, _)| node > 0 && node < last)
            .map(|(&node, &w)| w * interior[node - 1])
            .sum()
    }
}

/// Dirac load vector over interior nodes: `(b)_j = φ_j(x_point)`.
pub fn dirac_load(mesh: &Mesh, x_point: f64) -> Result<Vec<f64>> {
    if !(x_point > 0.0 && x_point < mesh.length()) {
        return Err(Error::invalid(format!(
            "point source at {x_point} must lie strictly inside (0, {})",
            mesh.length()
        )));
    }
    let mut out = vec![0.0; mesh.interior_count()];
    PointWeights::at(mesh, x_point).scatter_interior(1.0, &mut out);
    Ok(out)
}

/// P1 interpolation of a full nodal vector at `x_point`.
pub fn trace(mesh: &Mesh, nodal: &[f64], x_point: f64) -> Result<f64> {
    if !(x_point >= 0.0 && x_point <= mesh.length()) {
        return Err(Error::invalid(format!("trace point {x_point} outside [0, {}]", mesh.length())));
    }
    if nodal.len() != mesh.node_count() {
        return Err(Error::Dimension { what: "nodal vector", expected: mesh.node_count(), got: nodal.len() });
    }
    Ok(PointWeights::at(mesh, x_point).interpolate(nodal))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    /// Coordinate of this boundary on `mesh`.
    pub fn coordinate(self, mesh: &Mesh) -> f64 {
        match self {
            Side::Left => 0.0,
            Side::Right => mesh.length(),
        }
    }

    /// Sign of the outward normal.
    pub fn outward_sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

/// One-sided first-order derivative at a boundary.
pub fn boundary_flux(mesh: &Mesh, nodal: &[f64], side: Side) -> f64 {
    let ne = mesh.elements();
    match side {
        Side::Left => (nodal[1] - nodal[0]) / mesh.h(),
        Side::Right => (nodal[ne] - nodal[ne - 1]) / mesh.h(),
    }
}

/// `sqrt(dt Σ_n Σ_i |f_i^n|² + delta)`.
pub fn discrete_norm(signals: &[GridSignal], dt: f64, delta: f64) -> f64 {
    let sum: f64 = signals.iter().flat_map(|s| s.iter()).map(|v| v * v).sum();
    (dt * sum + delta).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::Arc;

    const TOL: f64 = 1e-14;

    #[test]
    fn mesh_layout() {
        let m = build_mesh(1.0, 200).unwrap();
        assert!((m.h() - 0.005).abs() < TOL);
        assert_eq!(m.node_count(), 201);
        assert_eq!(m.node(200), 1.0);

        let m = build_mesh(1.0, 2).unwrap();
        assert_eq!(m.nodes(), &[0.0, 0.5, 1.0]);

        assert_eq!(build_mesh(2.0, 4).unwrap().h(), 0.5);
    }

    #[test]
    fn mesh_rejects_bad_input() {
        assert!(matches!(build_mesh(0.0, 10), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_mesh(-1.0, 10), Err(Error::InvalidArgument(_))));
        assert!(matches!(build_mesh(1.0, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn time_grid_layout() {
        let g = TimeGrid::new(0.5, 500).unwrap();
        assert!((g.dt() - 1e-3).abs() < 1e-18);
        assert_eq!(g.time(500), 0.5);
        assert_eq!(g.solve_times().len(), 500);
        assert!(TimeGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn mass_small_meshes() {
        let m = assemble_mass(&build_mesh(1.0, 2).unwrap());
        assert_eq!(m.dim(), 1);
        assert!((m.get(0, 0) - 1.0 / 3.0).abs() < TOL);

        let m = assemble_mass(&build_mesh(1.0, 4).unwrap());
        for i in 0..3 {
            assert!((m.get(i, i) - 1.0 / 6.0).abs() < TOL);
        }
        for i in 0..2 {
            assert!((m.get(i, i + 1) - 1.0 / 24.0).abs() < TOL);
            assert!((m.get(i + 1, i) - 1.0 / 24.0).abs() < TOL);
        }
    }

    #[test]
    fn mass_row_sums_partition_of_unity() {
        let mesh = build_mesh(1.3, 9).unwrap();
        let full = assemble_mass_full(&mesh);
        let sums = full.row_sums();
        assert!((sums[0] - mesh.h() / 2.0).abs() < TOL);
        for s in &sums[1..9] {
            assert!((s - mesh.h()).abs() < TOL);
        }
        let total: f64 = sums.iter().sum();
        assert!((total - 1.3).abs() < 1e-13);
    }

    #[test]
    fn laplacian_stiffness() {
        let mesh = build_mesh(1.0, 10).unwrap();
        let heat = CoefficientSet::heat();
        let k = assemble_operator(&mesh, &heat, 0.0, false).unwrap();
        for i in 0..k.dim() {
            assert!((k.get(i, i) - 2.0 / mesh.h()).abs() < 1e-12);
        }
        for i in 0..k.dim() - 1 {
            assert!((k.get(i, i + 1) + 1.0 / mesh.h()).abs() < 1e-12);
        }
        let kt = assemble_operator(&mesh, &heat, 0.0, true).unwrap();
        assert_eq!(k, kt);
    }

    fn example3() -> CoefficientSet {
        use std::f64::consts::PI;
        CoefficientSet::new(
            Arc::new(|_, x| 1.0 + 0.15 * (PI * x).cos()),
            Arc::new(|_, x| 0.1 * (PI * x).sin()),
            Arc::new(|t, _| 0.3 * (1.0 + t)),
            0.85,
            true,
        )
        .unwrap()
    }

    // Brute-force oracle: 400-point midpoint rule on each element, analytic derivatives.
    fn oracle_entry(mesh: &Mesh, t: f64, i: usize, j: usize, adjoint: bool) -> f64 {
        use std::f64::consts::PI;
        let h = mesh.h();
        let hat = |node: usize, x: f64| -> (f64, f64) {
            let xn = mesh.node(node);
            if (x - xn).abs() >= h {
                (0.0, 0.0)
            } else if x < xn {
                ((x - (xn - h)) / h, 1.0 / h)
            } else {
                ((xn + h - x) / h, -1.0 / h)
            }
        };
        let samples = 400;
        let mut acc = 0.0;
        for k in 0..mesh.elements() {
            for s in 0..samples {
                let x = mesh.node(k) + (s as f64 + 0.5) * h / samples as f64;
                let (pi, dpi) = hat(i, x);
                let (pj, dpj) = hat(j, x);
                let a = 1.0 + 0.15 * (PI * x).cos();
                let ax = -0.15 * PI * (PI * x).sin();
                let axx = -0.15 * PI * PI * (PI * x).cos();
                let b = 0.1 * (PI * x).sin();
                let bx = 0.1 * PI * (PI * x).cos();
                let c = 0.3 * (1.0 + t);
                let beta = ax + b;
                let val = if adjoint {
                    a * dpj * dpi - beta * dpj * pi + (c - axx - bx) * pj * pi
                } else {
                    a * dpj * dpi + beta * dpj * pi + c * pj * pi
                };
                acc += val * h / samples as f64;
            }
        }
        acc
    }

    #[test]
    fn variable_coefficient_assembly_matches_quadrature_oracle() {
        let mesh = build_mesh(1.0, 8).unwrap();
        let coeffs = example3();
        for adjoint in [false, true] {
            let a = assemble_operator_full(&mesh, &coeffs, 0.0, adjoint).unwrap();
            for i in 0..mesh.node_count() {
                for j in i.saturating_sub(1)..(i + 2).min(mesh.node_count()) {
                    let o = oracle_entry(&mesh, 0.0, i, j, adjoint);
                    // 2-point Gauss error on smooth coefficients is O(h^4) relative.
                    assert!(
                        (a.get(i, j) - o).abs() < 2e-4 * o.abs().max(1.0),
                        "({i},{j}) adjoint={adjoint}: {} vs {o}",
                        a.get(i, j)
                    );
                }
            }
        }
    }

    #[test]
    fn dirac_load_cases() {
        let mesh = build_mesh(1.0, 10).unwrap();
        let b = dirac_load(&mesh, mesh.node(3)).unwrap();
        assert_eq!(b.iter().filter(|v| **v != 0.0).count(), 1);
        assert!((b[2] - 1.0).abs() < TOL);

        let b = dirac_load(&mesh, 0.35).unwrap();
        assert!((b[2] - 0.5).abs() < 1e-12 && (b[3] - 0.5).abs() < 1e-12);

        let mesh = build_mesh(1.0, 200).unwrap();
        let b = dirac_load(&mesh, 0.5).unwrap();
        assert_eq!(b[99], 1.0);
        assert_eq!(b.iter().sum::<f64>(), 1.0);

        assert!(dirac_load(&mesh, 0.0).is_err());
        assert!(dirac_load(&mesh, 1.0).is_err());
        assert!(dirac_load(&mesh, 1.2).is_err());
    }

    #[test]
    fn trace_cases() {
        let mesh = build_mesh(2.0, 7).unwrap();
        let coords = mesh.nodes().to_vec();
        for x in [0.0, 0.3, 1.0, 1.77, 2.0] {
            assert!((trace(&mesh, &coords, x).unwrap() - x).abs() <= 1e-13 * x.max(1.0));
        }
        let vals: Vec<f64> = (0..8).map(|j| (j as f64 * 1.7).sin()).collect();
        assert_eq!(trace(&mesh, &vals, mesh.node(4)).unwrap(), vals[4]);
        let mid = 0.5 * (mesh.node(2) + mesh.node(3));
        assert!((trace(&mesh, &vals, mid).unwrap() - 0.5 * (vals[2] + vals[3])).abs() < 1e-14);
        assert!(trace(&mesh, &vals, -0.1).is_err());
        assert!(trace(&mesh, &vals, 2.1).is_err());
    }

    #[test]
    fn flux_cases() {
        let mesh = build_mesh(1.0, 10).unwrap();
        let lin: Vec<f64> = mesh.nodes().iter().map(|x| 2.5 * x).collect();
        assert!((boundary_flux(&mesh, &lin, Side::Left) - 2.5).abs() < 1e-12);
        assert!((boundary_flux(&mesh, &lin, Side::Right) - 2.5).abs() < 1e-12);
        let mut p = vec![0.0; 11];
        p[9] = 0.7;
        assert!((boundary_flux(&mesh, &p, Side::Right) + 0.7 / mesh.h()).abs() < 1e-12);
        assert_eq!(boundary_flux(&mesh, &[0.0; 11], Side::Left), 0.0);
    }

    #[test]
    fn flux_converges_first_order() {
        let f = |x: f64| (1.3 * x).sin();
        let df = |x: f64| 1.3 * (1.3 * x).cos();
        let errs: Vec<f64> = [10, 20, 40, 80]
            .iter()
            .map(|&n| {
                let mesh = build_mesh(1.0, n).unwrap();
                let nodal: Vec<f64> = mesh.nodes().iter().map(|&x| f(x)).collect();
                (boundary_flux(&mesh, &nodal, Side::Right) - df(1.0)).abs()
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((0.8..=1.2).contains(&order), "order {order}");
        }
    }

    #[test]
    fn norm_cases() {
        assert!((discrete_norm(&[GridSignal::zeros(5)], 0.1, 1e-14) - 1e-7).abs() < 1e-20);
        let one = GridSignal(vec![1.0; 1000]);
        assert!((discrete_norm(&[one], 1e-3, 0.0) - 1.0).abs() < 1e-12);
        assert_eq!(discrete_norm(&[GridSignal(vec![1.0, 2.0, 2.0])], 1.0, 0.0), 3.0);
    }

    proptest! {
        #[test]
        fn mass_is_spd(n in 2usize..300, len in 0.01f64..50.0) {
            let mesh = build_mesh(len, n).unwrap();
            prop_assert!(assemble_mass(&mesh).cholesky().is_some());
        }

        #[test]
        fn dirac_weights_nonnegative_and_sum_to_one(n in 4usize..200, s in 0.0f64..1.0) {
            let mesh = build_mesh(1.0, n).unwrap();
            let x = mesh.h() + s * (1.0 - 2.0 * mesh.h());
            prop_assume!(x > mesh.h() && x < 1.0 - mesh.h());
            let b = dirac_load(&mesh, x).unwrap();
            prop_assert!(b.iter().all(|v| *v >= 0.0));
            prop_assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn trace_exact_on_linear_fields(n in 2usize..100, s in 0.0f64..=1.0, slope in -5.0f64..5.0, icpt in -5.0f64..5.0) {
            let mesh = build_mesh(3.0, n).unwrap();
            let nodal: Vec<f64> = mesh.nodes().iter().map(|x| slope * x + icpt).collect();
            let x = 3.0 * s;
            let exact = slope * x + icpt;
            prop_assert!((trace(&mesh, &nodal, x).unwrap() - exact).abs() <= 1e-13 * exact.abs().max(1.0));
        }
    }
}
