mod common;

use hum_tracking::fem::{build_mesh, CoefficientSet, GridSignal, TimeGrid};
use hum_tracking::solvers::{factor_cache, solve_forward_with_source, BoundaryControls};

/// `y* = sin(x)(e^t - 1)` solves `y_t - y_xx = sin(x)(2e^t - 1)` with `y(·,0) = 0`.
fn manufactured_error(elements: usize, steps: usize) -> f64 {
    let horizon = 0.5;
    let mesh = build_mesh(1.0, elements).unwrap();
    let grid = TimeGrid::new(horizon, steps).unwrap();
    let exact = |t: f64, x: f64| x.sin() * (t.exp() - 1.0);
    let right = GridSignal::sample(&grid, |t| exact(t, 1.0));
    let y =
        solve_forward_with_source(&mesh, &grid, &CoefficientSet::heat(), &BoundaryControls::right(right), |t, x| {
            x.sin() * (2.0 * t.exp() - 1.0)
        })
        .unwrap();
    let mut acc = 0.0;
    for n in 1..=steps {
        for (j, &x) in mesh.nodes().iter().enumerate() {
            acc += (y.at(n, j) - exact(grid.time(n), x)).powi(2);
        }
    }
    (acc * grid.dt() * mesh.h()).sqrt()
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

#[test]
fn second_order_in_space() {
    // dt ∝ h² so the time error follows the space error.
    let e: Vec<f64> = [8, 16, 32].iter().map(|&ne| manufactured_error(ne, ne * ne / 2)).collect();
    for w in e.windows(2) {
        let q = order(w[0], w[1]);
        assert!((q - 2.0).abs() <= 0.3, "order {q}, errors {e:?}");
    }
}

#[test]
fn first_order_in_time() {
    let e: Vec<f64> = [10, 20, 40].iter().map(|&nt| manufactured_error(400, nt)).collect();
    for w in e.windows(2) {
        let q = order(w[0], w[1]);
        assert!((q - 1.0).abs() <= 0.3, "order {q}, errors {e:?}");
    }
}

#[test]
fn factorization_counts() {
    let p1 = common::example_problem(1, 200, 500, Some(0.1));
    assert_eq!(p1.forward_cache().factorizations(), 1);
    assert_eq!(p1.adjoint_cache().factorizations(), 1);
    let p3 = common::example_problem(3, 200, 500, None);
    assert_eq!(p3.forward_cache().factorizations(), 500);
    let c = factor_cache(p3.mesh(), p3.grid(), p3.coeffs(), true).unwrap();
    assert_eq!(c.factorizations(), 500);
}

#[test]
fn duality_residual_shrinks() {
    let r: Vec<f64> = [(20, 20), (40, 40), (80, 80)].iter().map(|&(ne, nt)| common::duality_residual(ne, nt)).collect();
    assert!(r[0] / r[1] >= 1.5 && r[1] / r[2] >= 1.5, "{r:?}");
}
