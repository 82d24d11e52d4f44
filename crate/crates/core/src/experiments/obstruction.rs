//! Nonzero dual forcings whose adjoint leaves no trace on the controlled
//! boundary: one control cannot steer two points, two controls cannot steer three.
//!
//! The adjoint is built piecewise from Dirichlet sub-solves (values 0/1 at the
//! observation points, zero elsewhere); the flux jumps at the points give `f`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{build_mesh, discrete_norm, CoefficientSet, GridSignal, Mesh, TimeGrid};
use crate::solvers::{solve_adjoint, solve_adjoint_dirichlet, DualForcing, ObservationSet, SpaceTimeField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObstructionVariant {
    OneControlTwoPoints,
    TwoControlsThreePoints,
}

impl ObstructionVariant {
    pub fn point_count(self) -> usize {
        match self {
            ObstructionVariant::OneControlTwoPoints => 2,
            ObstructionVariant::TwoControlsThreePoints => 3,
        }
    }

    pub fn default_points(self) -> Vec<f64> {
        match self {
            ObstructionVariant::OneControlTwoPoints => vec![0.3, 0.6],
            ObstructionVariant::TwoControlsThreePoints => vec![0.2, 0.5, 0.8],
        }
    }
}

impl fmt::Display for ObstructionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObstructionVariant::OneControlTwoPoints => "one-control-two-points",
            ObstructionVariant::TwoControlsThreePoints => "two-controls-three-points",
        })
    }
}

impl FromStr for ObstructionVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-control-two-points" => Ok(ObstructionVariant::OneControlTwoPoints),
            "two-controls-three-points" => Ok(ObstructionVariant::TwoControlsThreePoints),
            _ => Err(Error::Config(format!(
                "variant: expected one-control-two-points or two-controls-three-points, got {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ObstructionSetup {
    pub length: f64,
    pub horizon: f64,
    pub elements: usize,
    pub steps: usize,
    pub coeffs: CoefficientSet,
    pub points: Vec<f64>,
}

impl ObstructionSetup {
    /// Heat equation on `[0, 1]`, `T = 0.5`, `dt = 5e-3`.
    pub fn standard(variant: ObstructionVariant, elements: usize) -> Self {
        Self {
            length: 1.0,
            horizon: 0.5,
            elements,
            steps: 100,
            coeffs: CoefficientSet::heat(),
            points: variant.default_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstructionReport {
    pub variant: ObstructionVariant,
    pub elements: usize,
    pub steps: usize,
    /// `‖f‖` (unsmoothed discrete norm over all components).
    pub forcing_norm: f64,
    /// `‖∂ₓp(·, 0)‖`, reported for the two-control variant.
    pub flux_left: Option<f64>,
    /// `‖∂ₓp(·, L)‖`.
    pub flux_right: f64,
    /// Space-time L² distance between the glued and directly solved adjoints.
    pub mismatch: f64,
    pub glued_norm: f64,
}

/// Dirichlet sub-solve on `[x_a, x_b]`, embedded into full-mesh nodes `start..`.
struct Piece {
    start: usize,
    field: SpaceTimeField,
    h: f64,
}

impl Piece {
    fn solve(
        mesh: &Mesh,
        grid: &TimeGrid,
        coeffs: &CoefficientSet,
        (start, end): (usize, usize),
        (left, right): (f64, f64),
    ) -> Result<Self> {
        let sub = build_mesh(mesh.node(end) - mesh.node(start), end - start)?;
        let field = solve_adjoint_dirichlet(&sub, grid, &coeffs.shifted(mesh.node(start)), |_| left, |_| right)?;
        Ok(Piece { start, field, h: sub.h() })
    }

    fn flux_start(&self, n: usize) -> f64 {
        (self.field.at(n, 1) - self.field.at(n, 0)) / self.h
    }

    fn flux_end(&self, n: usize) -> f64 {
        let last = self.field.node_count() - 1;
        (self.field.at(n, last) - self.field.at(n, last - 1)) / self.h
    }
}

fn node_index(mesh: &Mesh, x: f64) -> Result<usize> {
    let j = (x / mesh.h()).round() as usize;
    if j == 0 || j >= mesh.elements() || (mesh.node(j) - x).abs() > 1e-9 * mesh.h() {
        return Err(Error::invalid(format!("point {x} is not an interior mesh node")));
    }
    Ok(j)
}

pub fn run_obstruction(variant: ObstructionVariant, setup: &ObstructionSetup) -> Result<ObstructionReport> {
    if setup.points.len() != variant.point_count() {
        return Err(Error::invalid(format!(
            "{variant} needs {} points, got {}",
            variant.point_count(),
            setup.points.len()
        )));
    }
    let mesh = build_mesh(setup.length, setup.elements)?;
    let grid = TimeGrid::new(setup.horizon, setup.steps)?;
    let coeffs = &setup.coeffs;
    coeffs.check(&mesh, &grid)?;
    let idx = setup.points.iter().map(|&x| node_index(&mesh, x)).collect::<Result<Vec<_>>>()?;
    if idx.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("points must be strictly increasing"));
    }
    // Rising piece (0 → 1) then falling piece (1 → 0); zero outside.
    let (rise, fall) = match variant {
        ObstructionVariant::OneControlTwoPoints => ((0, idx[0]), (idx[0], idx[1])),
        ObstructionVariant::TwoControlsThreePoints => ((idx[0], idx[1]), (idx[1], idx[2])),
    };
    let tilde = Piece::solve(&mesh, &grid, coeffs, rise, (0.0, 1.0))?;
    let hat = Piece::solve(&mesh, &grid, coeffs, fall, (1.0, 0.0))?;

    let steps = grid.steps();
    // Level k is produced by the reversed step assembled at t_{k+1}.
    let a_at = |n: usize, j: usize| coeffs.a(grid.time(n), mesh.node(j));
    let mut signals = vec![GridSignal::zeros(steps); variant.point_count()];
    for k in 0..steps {
        let (sig_mid, sig_end) = match variant {
            ObstructionVariant::OneControlTwoPoints => (0, 1),
            ObstructionVariant::TwoControlsThreePoints => {
                signals[0][k] = -a_at(k + 1, idx[0]) * tilde.flux_start(k);
                (1, 2)
            }
        };
        let mid = rise.1;
        signals[sig_mid][k] = a_at(k + 1, mid) * (tilde.flux_end(k) - hat.flux_start(k));
        signals[sig_end][k] = a_at(k + 1, fall.1) * hat.flux_end(k);
    }
    let forcing = DualForcing { signals };
    let observations = ObservationSet::fixed(&setup.points, &mesh, &grid)?;
    let direct = solve_adjoint(&mesh, &grid, coeffs, &observations, &forcing)?;

    let (mut diff2, mut glued2) = (0.0, 0.0);
    for n in 0..=steps {
        for j in 0..mesh.node_count() {
            let glued = [&tilde, &hat]
                .iter()
                .find(|p| j >= p.start && j < p.start + p.field.node_count())
                .map_or(0.0, |p| p.field.at(n, j - p.start));
            diff2 += (glued - direct.at(n, j)).powi(2);
            glued2 += glued * glued;
        }
    }
    let weight = grid.dt() * mesh.h();
    let flux_norm = |side_node: usize, neighbor: usize| {
        let s: f64 = (0..steps).map(|k| ((direct.at(k, side_node) - direct.at(k, neighbor)) / mesh.h()).powi(2)).sum();
        (grid.dt() * s).sqrt()
    };
    let last = mesh.node_count() - 1;
    Ok(ObstructionReport {
        variant,
        elements: setup.elements,
        steps,
        forcing_norm: discrete_norm(&forcing.signals, grid.dt(), 0.0),
        flux_left: (variant == ObstructionVariant::TwoControlsThreePoints).then(|| flux_norm(1, 0)),
        flux_right: flux_norm(last, last - 1),
        mismatch: (weight * diff2).sqrt(),
        glued_norm: (weight * glued2).sqrt(),
    })
}
