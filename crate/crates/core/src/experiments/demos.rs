//! Inspection outputs for the moving-point maps and the flatness series.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::output::write_columns;
use crate::error::{Error, Result};
use crate::fem::{build_mesh, trace, CoefficientSet, TimeGrid};
use crate::flatness::{build_series, series_controls, Polynomial, SeriesTarget};
use crate::moving::{build_double_diffeo, build_single_diffeo, DiffeoMap, DiffeoMode, Trajectory};
use crate::solvers::{solve_forward, BoundaryControls};

/// Trajectory given on the command line: `constant:<value>` or `sine:<center>:<amplitude>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrajectorySpec {
    Constant { value: f64 },
    Sine { center: f64, amplitude: f64 },
}

impl FromStr for TrajectorySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| -> Result<f64> {
            p.trim().parse().map_err(|_| Error::Config(format!("traj: {p:?} is not a number")))
        };
        match parts.as_slice() {
            ["constant", v] => Ok(TrajectorySpec::Constant { value: num(v)? }),
            ["sine", c, a] => Ok(TrajectorySpec::Sine { center: num(c)?, amplitude: num(a)? }),
            _ => Err(Error::Config(format!("traj: expected constant:<value> or sine:<center>:<amplitude>, got {s:?}"))),
        }
    }
}

impl TrajectorySpec {
    pub fn build(self, horizon: f64) -> Result<Trajectory> {
        match self {
            TrajectorySpec::Constant { value } => Trajectory::constant(value, horizon),
            TrajectorySpec::Sine { center, amplitude } => Trajectory::sine_bump(center, amplitude, horizon),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffeoSummary {
    pub mode: String,
    pub exponents: Vec<u32>,
    /// Fixed images of the straightened points.
    pub targets: Vec<f64>,
    pub pin_error: f64,
    pub interpolation_error: f64,
    pub min_slope: f64,
    pub csv: PathBuf,
}

/// Builds a single map, or a double map anchored at `k` when given, and writes
/// `t, h, alpha, beta[, gamma], min_slope` to `diffeo.csv`.
pub fn run_diffeo(
    spec: TrajectorySpec,
    double: Option<f64>,
    horizon: f64,
    steps: usize,
    dir: &Path,
) -> Result<(DiffeoMap, DiffeoSummary)> {
    let grid = TimeGrid::new(horizon, steps)?;
    let h = spec.build(horizon)?;
    let map = match double {
        Some(k) => build_double_diffeo(k, &h, &grid, 1.0)?,
        None => build_single_diffeo(&h, &grid, 1.0)?,
    };
    let (mode, exponents) = match map.mode() {
        DiffeoMode::Single { n, .. } => ("single", vec![n, 1]),
        DiffeoMode::Double { n, r, .. } => ("double", vec![n, r, 1]),
    };
    let times: Vec<f64> = (0..=steps).map(|n| grid.time(n)).collect();
    let hv: Vec<f64> = times.iter().map(|&t| h.eval(t)).collect();
    let coefs: Vec<Vec<f64>> = times.iter().map(|&t| map.coefficients(t)).collect();
    let slopes: Vec<f64> = times
        .iter()
        .map(|&t| (0..=1000).map(|j| map.chi_x(t, j as f64 / 1000.0)).fold(f64::INFINITY, f64::min))
        .collect();
    let names = ["alpha", "beta", "gamma"];
    let ncoef = coefs[0].len();
    let columns_owned: Vec<Vec<f64>> = (0..ncoef).map(|i| coefs.iter().map(|c| c[i]).collect()).collect();
    let mut header = vec!["t".to_string(), "h".to_string()];
    header.extend(names[..ncoef].iter().map(|s| s.to_string()));
    header.push("min_slope".into());
    let mut columns: Vec<&[f64]> = vec![&times, &hv];
    columns.extend(columns_owned.iter().map(|c| c.as_slice()));
    columns.push(&slopes);
    std::fs::create_dir_all(dir)?;
    let csv = dir.join("diffeo.csv");
    write_columns(&csv, &header, &columns)?;
    let inv = map.check_invariants(10 * steps, 1000);
    let summary = DiffeoSummary {
        mode: mode.into(),
        exponents,
        targets: map.targets(),
        pin_error: inv.pin_left.max(inv.pin_right),
        interpolation_error: inv.interpolation,
        min_slope: inv.min_slope,
        csv,
    };
    Ok((map, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub order: usize,
    pub anchor: f64,
    pub max_residual: f64,
    pub max_anchor_error: f64,
    pub max_anchor_slope_error: f64,
    /// `max |y_h(t, x₁) - w₁(t)|` over `t ≥ T/4` for the finite-element solve driven by the series controls.
    pub forward_trace_error: f64,
    pub controls_csv: PathBuf,
    pub residual_csv: PathBuf,
}

/// `w₁ = t²`, `w₂ = t³` anchored at `x₁ = 0.5`, `K = 3`, on `[0, 1] x [0, 1]`.
pub fn run_flatness_demo(dir: &Path, elements: usize, steps: usize) -> Result<FlatnessReport> {
    let (anchor, order, horizon) = (0.5, 3, 1.0);
    let targets = SeriesTarget { w1: Polynomial::monomial(2, 1.0), w2: Polynomial::monomial(3, 1.0) };
    let series = build_series(&targets, anchor, order)?;
    let grid = TimeGrid::new(horizon, steps)?;
    let mesh = build_mesh(1.0, elements)?;
    let (v0, vl) = series_controls(&series, 1.0, &grid);
    let y = solve_forward(&mesh, &grid, &CoefficientSet::heat(), &BoundaryControls::both(v0.clone(), vl.clone()))?;
    let mut forward_trace_error: f64 = 0.0;
    let mut trace_col = Vec::with_capacity(steps);
    for n in 1..=steps {
        let t = grid.time(n);
        let yt = trace(&mesh, y.level(n), anchor)?;
        trace_col.push(yt);
        if t >= horizon / 4.0 {
            forward_trace_error = forward_trace_error.max((yt - targets.w1.eval(t)).abs());
        }
    }
    std::fs::create_dir_all(dir)?;
    let controls_csv = dir.join("flatness_controls.csv");
    let times = grid.solve_times();
    let w1: Vec<f64> = times.iter().map(|&t| targets.w1.eval(t)).collect();
    let header: Vec<String> =
        ["t", "control_left", "control_right", "target_1", "trace_1"].iter().map(|s| s.to_string()).collect();
    write_columns(&controls_csv, &header, &[&times, &v0, &vl, &w1, &trace_col])?;

    let (mut ts, mut xs, mut res) = (Vec::new(), Vec::new(), Vec::new());
    let (mut anchor_err, mut slope_err): (f64, f64) = (0.0, 0.0);
    for i in 0..=10 {
        let t = horizon * i as f64 / 10.0;
        anchor_err = anchor_err.max((series.eval(t, anchor) - targets.w1.eval(t)).abs());
        slope_err = slope_err.max((series.dx(t, anchor) - targets.w2.eval(t)).abs());
        for j in 0..=10 {
            let x = j as f64 / 10.0;
            ts.push(t);
            xs.push(x);
            res.push(series.residual(t, x));
        }
    }
    let residual_csv = dir.join("flatness_residual.csv");
    let header: Vec<String> = ["t", "x", "residual"].iter().map(|s| s.to_string()).collect();
    write_columns(&residual_csv, &header, &[&ts, &xs, &res])?;
    Ok(FlatnessReport {
        order,
        anchor,
        max_residual: res.iter().fold(0.0, |a: f64, r| a.max(r.abs())),
        max_anchor_error: anchor_err,
        max_anchor_slope_error: slope_err,
        forward_trace_error,
        controls_csv,
        residual_csv,
    })
}
