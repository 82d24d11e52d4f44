#![allow(dead_code)]

use std::f64::consts::PI;

use hum_tracking::dual::{DualForcing, TrackingProblem, DEFAULT_DELTA};
use hum_tracking::experiments::{example_configs, ExampleOverrides};
use hum_tracking::fem::{build_mesh, CoefficientSet, GridSignal, Side, TimeGrid};
use hum_tracking::moving::{build_single_diffeo, transform_coefficients, Trajectory};
use hum_tracking::solvers::ObservationSet;
use rand::Rng;

pub fn example_problem(n: u8, elements: usize, steps: usize, eps: Option<f64>) -> TrackingProblem {
    let overrides = ExampleOverrides { epsilon: eps, elements: Some(elements), steps: Some(steps) };
    example_configs(n, overrides).unwrap()[0].problem().unwrap()
}

/// Example-1 coefficients and target on a coarse grid.
pub fn coarse_example1(elements: usize, steps: usize, eps: f64) -> TrackingProblem {
    let mesh = build_mesh(1.0, elements).unwrap();
    let grid = TimeGrid::new(0.5, steps).unwrap();
    let obs = ObservationSet::fixed(&[0.5], &mesh, &grid).unwrap();
    let w = GridSignal::sample(&grid, |t| (2.0 * PI * 2.0 * t / 0.5).sin());
    TrackingProblem::new(mesh, grid, CoefficientSet::heat(), vec![Side::Right], obs, vec![w], eps, DEFAULT_DELTA)
        .unwrap()
}

pub fn random_forcing(p: &TrackingProblem, rng: &mut impl Rng) -> DualForcing {
    let steps = p.grid().steps();
    DualForcing {
        signals: (0..p.observations().len())
            .map(|_| GridSignal((0..steps).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect(),
    }
}

/// Worst componentwise relative error between the analytic gradient and central differences.
pub fn gradient_gate_error(p: &TrackingProblem, f: &DualForcing, step: f64) -> f64 {
    let g = p.evaluate_gradient(f).unwrap().flatten();
    let x = f.flatten();
    let count = p.observations().len();
    let mut worst: f64 = 0.0;
    for k in 0..x.len() {
        let mut xp = x.clone();
        xp[k] += step;
        let mut xm = x.clone();
        xm[k] -= step;
        let jp = p.evaluate_j(&DualForcing::from_flat(&xp, count).unwrap()).unwrap();
        let jm = p.evaluate_j(&DualForcing::from_flat(&xm, count).unwrap()).unwrap();
        let fd = (jp - jm) / (2.0 * step);
        worst = worst.max((fd - g[k]).abs() / g[k].abs().max(fd.abs()));
    }
    worst
}

/// `|dt Σ a(t_n, L) ∂ₓp_f ∂ₓp_g + dt Σ g trace(y_f)|` for smooth `f`, `g` on an Example-1 grid.
pub fn duality_residual(elements: usize, steps: usize) -> f64 {
    let p = coarse_example1(elements, steps, 0.1);
    let grid = *p.grid();
    let f = DualForcing { signals: vec![GridSignal::sample(&grid, |t| (2.0 * PI * t / 0.5).sin() + 0.5)] };
    let g = DualForcing { signals: vec![GridSignal::sample(&grid, |t| (3.0 * t).cos() - 0.2 * t)] };
    let vf = p.recover_controls(&f).unwrap();
    let vg = p.recover_controls(&g).unwrap();
    let traces = p.traces(&vf).unwrap();
    let dt = grid.dt();
    let left: f64 = (0..steps)
        .map(|k| p.coeffs().a(grid.time(k + 1), 1.0) * vf.right.as_ref().unwrap()[k] * vg.right.as_ref().unwrap()[k])
        .sum();
    let right: f64 = (0..steps).map(|k| g.signals[0][k] * traces[0][k]).sum();
    (dt * (left + right)).abs()
}

/// Max finite-difference residual of `z(t, x) = y(t, χ(t, x))` in the transformed
/// equation, where `y = e^{-π²t} sin(πx)` solves the heat equation and `χ`
/// straightens the Example-4 trajectory. Grid: `steps` in time, `cells` in space.
pub fn pullback_residual(steps: usize, cells: usize) -> f64 {
    let horizon = 0.5;
    let grid = TimeGrid::new(horizon, steps).unwrap();
    let h = Trajectory::sine_bump(0.5, 0.15, horizon).unwrap();
    let map = build_single_diffeo(&h, &grid, 1.0).unwrap();
    let c = transform_coefficients(&CoefficientSet::heat(), &map).unwrap();
    let y = |t: f64, x: f64| (-PI * PI * t).exp() * (PI * x).sin();
    let z = |t: f64, x: f64| y(t, map.apply(t, x));
    let (dt, dx) = (grid.dt(), 1.0 / cells as f64);
    let mut worst: f64 = 0.0;
    for n in 1..steps {
        let t = grid.time(n);
        for j in 1..cells {
            let x = j as f64 * dx;
            let zt = (z(t + dt, x) - z(t - dt, x)) / (2.0 * dt);
            let zx = (z(t, x + dx) - z(t, x - dx)) / (2.0 * dx);
            let zxx = (z(t, x + dx) - 2.0 * z(t, x) + z(t, x - dx)) / (dx * dx);
            let r = zt - c.a(t, x) * zxx + c.b(t, x) * zx + c.c(t, x) * z(t, x);
            worst = worst.max(r.abs());
        }
    }
    worst
}
