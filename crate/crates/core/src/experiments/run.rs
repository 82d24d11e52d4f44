//! Tracking runs: configuration → dual minimization → controls → errors → artifacts.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{CoefficientSpec, ExperimentConfig, ObservationSpec, OutputOptions, Waveform};
use super::output::{write_json, write_timeseries};
use crate::dual::{minimize_dual, DualForcing, TrackingError, TrackingProblem, DEFAULT_DELTA};
use crate::error::{Error, Result};
use crate::fem::{GridSignal, Side};
use crate::optim::{OptimOptions, OptimReport};
use crate::solvers::{BoundaryControls, SpaceTimeField};

/// Everything a tracking run computes, before anything is written.
#[derive(Debug, Clone)]
pub struct TrackingOutcome {
    pub problem: TrackingProblem,
    pub forcing: DualForcing,
    pub report: OptimReport,
    pub controls: BoundaryControls,
    pub state: SpaceTimeField,
    pub traces: Vec<GridSignal>,
    pub errors: TrackingError,
    pub wall_time: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub timeseries: PathBuf,
    pub summary: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub state: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub adjoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub errors: Vec<f64>,
    pub combined_error: f64,
    pub epsilon: f64,
    pub objective: f64,
    pub objective_history: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub gradient_norm: f64,
    pub termination: String,
    pub wall_time_seconds: f64,
    pub config: ExperimentConfig,
    pub artifacts: Artifacts,
}

/// Runs the pipeline without touching the filesystem.
pub fn solve_tracking(config: &ExperimentConfig) -> Result<TrackingOutcome> {
    let start = Instant::now();
    let problem = config.problem()?;
    let (forcing, report) = minimize_dual(&problem, &config.optimizer)?;
    let controls = problem.recover_controls(&forcing)?;
    let state = problem.solve_forward(&controls)?;
    let traces: Vec<GridSignal> = problem
        .observations()
        .locations()
        .iter()
        .map(|loc| state.trace_signal(problem.mesh(), problem.grid(), loc))
        .collect();
    let errors = problem.errors_from_traces(&traces);
    Ok(TrackingOutcome {
        problem,
        forcing,
        report,
        controls,
        state,
        traces,
        errors,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn write_field(path: &Path, field: &SpaceTimeField, outcome: &TrackingOutcome) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    field.write_csv(outcome.problem.grid(), &mut w)?;
    Ok(())
}

/// Runs the pipeline and writes `<name>.csv`, `<name>_summary.json` and, if
/// requested, `<name>_state.csv` / `<name>_adjoint.csv` into `dir`.
pub fn run_tracking(config: &ExperimentConfig, dir: &Path) -> Result<RunSummary> {
    let outcome = solve_tracking(config)?;
    fs::create_dir_all(dir)?;
    let name = &config.name;
    let mut artifacts = Artifacts {
        timeseries: dir.join(format!("{name}.csv")),
        summary: dir.join(format!("{name}_summary.json")),
        ..Default::default()
    };
    let p = &outcome.problem;
    write_timeseries(&artifacts.timeseries, p.grid(), p.targets(), &outcome.traces, &outcome.controls)?;
    if config.output.space_time {
        let state = dir.join(format!("{name}_state.csv"));
        write_field(&state, &outcome.state, &outcome)?;
        let adjoint = dir.join(format!("{name}_adjoint.csv"));
        write_field(&adjoint, &p.solve_adjoint(&outcome.forcing)?, &outcome)?;
        artifacts.state = Some(state);
        artifacts.adjoint = Some(adjoint);
    }
    let summary = RunSummary {
        name: name.clone(),
        errors: outcome.errors.per_target.clone(),
        combined_error: outcome.errors.combined,
        epsilon: config.epsilon,
        objective: outcome.report.value,
        objective_history: outcome.report.history.clone(),
        iterations: outcome.report.iterations,
        evaluations: outcome.report.evaluations,
        gradient_norm: outcome.report.gradient_norm,
        termination: outcome.report.termination.to_string(),
        wall_time_seconds: outcome.wall_time,
        config: config.clone(),
        artifacts,
    };
    write_json(&summary.artifacts.summary, &summary)?;
    Ok(summary)
}

/// Command-line overrides for the builtin examples.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExampleOverrides {
    pub epsilon: Option<f64>,
    pub elements: Option<usize>,
    pub steps: Option<usize>,
}

fn eps_label(eps: f64) -> String {
    format!("{eps:e}")
}

/// Builtin configurations; Example 1 yields one run per `ε ∈ {1e-1, 1e-2}` unless overridden.
pub fn example_configs(n: u8, overrides: ExampleOverrides) -> Result<Vec<ExperimentConfig>> {
    let base = |name: &str, horizon: f64, eps: f64| ExperimentConfig {
        name: name.to_string(),
        length: 1.0,
        horizon,
        elements: 200,
        steps: (horizon / 1e-3).round() as usize,
        coefficients: CoefficientSpec::default(),
        controls: vec![Side::Right],
        observations: vec![],
        targets: vec![],
        epsilon: eps,
        delta: DEFAULT_DELTA,
        optimizer: OptimOptions { max_iterations: 1000, ..OptimOptions::default() },
        output: OutputOptions::default(),
    };
    let mut configs = match n {
        1 => {
            let eps_list = overrides.epsilon.map_or(vec![1e-1, 1e-2], |e| vec![e]);
            eps_list
                .into_iter()
                .map(|eps| ExperimentConfig {
                    observations: vec![ObservationSpec::Fixed { x: 0.5 }],
                    targets: vec![Waveform::Sinusoid { amplitude: 1.0, frequency: 2.0 }],
                    ..base(&format!("example1_eps{}", eps_label(eps)), 0.5, eps)
                })
                .collect()
        }
        2 => vec![ExperimentConfig {
            controls: vec![Side::Left, Side::Right],
            observations: vec![ObservationSpec::Fixed { x: 0.25 }, ObservationSpec::Fixed { x: 0.5 }],
            targets: vec![Waveform::Ramp { rate: 1.0 }, Waveform::HalfRamp { rate: 1.0 }],
            ..base("example2", 1.0, overrides.epsilon.unwrap_or(1e-3))
        }],
        3 => vec![ExperimentConfig {
            coefficients: CoefficientSpec::Example3Variable,
            observations: vec![ObservationSpec::Fixed { x: 0.75 }],
            targets: vec![Waveform::SquaredSine],
            ..base("example3", 0.5, overrides.epsilon.unwrap_or(1e-3))
        }],
        4 => vec![ExperimentConfig {
            observations: vec![ObservationSpec::SineBump { center: 0.5, amplitude: 0.15 }],
            targets: vec![Waveform::Gaussian { center: 0.25, width: 0.5 / 16.0 }],
            ..base("example4", 0.5, overrides.epsilon.unwrap_or(1e-3))
        }],
        _ => return Err(Error::Config(format!("example: expected 1, 2, 3 or 4, got {n}"))),
    };
    for c in &mut configs {
        if let Some(ne) = overrides.elements {
            c.elements = ne;
        }
        if let Some(nt) = overrides.steps {
            c.steps = nt;
        }
        c.validate()?;
    }
    Ok(configs)
}

pub fn run_example(n: u8, overrides: ExampleOverrides, dir: &Path) -> Result<Vec<RunSummary>> {
    example_configs(n, overrides)?.iter().map(|c| run_tracking(c, dir)).collect()
}
