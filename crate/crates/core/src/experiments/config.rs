//! JSON experiment configuration.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use exmex::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual::{TrackingProblem, DEFAULT_DELTA};
use crate::error::{Error, Result};
use crate::fem::{build_mesh, CoefficientSet, GridSignal, Mesh, ScalarField, Side, TimeGrid};
use crate::moving::Trajectory;
use crate::optim::OptimOptions;
use crate::solvers::{Location, ObservationSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_length")]
    pub length: f64,
    pub horizon: f64,
    pub elements: usize,
    pub steps: usize,
    #[serde(default)]
    pub coefficients: CoefficientSpec,
    pub controls: Vec<Side>,
    pub observations: Vec<ObservationSpec>,
    pub targets: Vec<Waveform>,
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub optimizer: OptimOptions,
    #[serde(default)]
    pub output: OutputOptions,
}

fn default_name() -> String {
    "run".into()
}

fn default_length() -> f64 {
    1.0
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputOptions {
    /// Output directory; the CLI falls back to `<output root>/<name>`.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Also write the state and adjoint fields (rows = time levels, columns = nodes).
    #[serde(default)]
    pub space_time: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoefficientSpec {
    Constant {
        #[serde(default = "default_length")]
        a: f64,
        #[serde(default)]
        b: f64,
        #[serde(default)]
        c: f64,
    },
    /// `a = 1 + 0.15 cos(πx)`, `b = 0.1 sin(πx)`, `c = 0.3 (1 + t)`.
    Example3Variable,
    /// Expressions in `t` and `x`, e.g. `"1 + 0.15*cos(PI*x)"`.
    Expression {
        a: String,
        #[serde(default = "zero_expr")]
        b: String,
        #[serde(default = "zero_expr")]
        c: String,
        /// Ellipticity floor; sampled from `a` when omitted.
        #[serde(default)]
        a0: Option<f64>,
    },
}

fn zero_expr() -> String {
    "0".into()
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        CoefficientSpec::Constant { a: 1.0, b: 0.0, c: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObservationSpec {
    Fixed {
        x: f64,
    },
    /// `center + amplitude sin(πt/T)`.
    SineBump {
        center: f64,
        amplitude: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Waveform {
    /// `A sin(2π m t / T)`.
    Sinusoid { amplitude: f64, frequency: f64 },
    /// `t (1 - e^{-kt})`.
    Ramp { rate: f64 },
    /// `t (1 - e^{-kt}) / 2`.
    HalfRamp { rate: f64 },
    /// `sin²(πt/T)`.
    SquaredSine,
    /// `exp(-(t - t₀)² / (2σ²))`.
    Gaussian { center: f64, width: f64 },
}

impl Waveform {
    pub fn eval(&self, t: f64, horizon: f64) -> f64 {
        match *self {
            Waveform::Sinusoid { amplitude, frequency } => amplitude * (2.0 * PI * frequency * t / horizon).sin(),
            Waveform::Ramp { rate } => t * (1.0 - (-rate * t).exp()),
            Waveform::HalfRamp { rate } => 0.5 * t * (1.0 - (-rate * t).exp()),
            Waveform::SquaredSine => (PI * t / horizon).sin().powi(2),
            Waveform::Gaussian { center, width } => (-(t - center).powi(2) / (2.0 * width * width)).exp(),
        }
    }

    pub fn sample(&self, grid: &TimeGrid) -> GridSignal {
        GridSignal::sample(grid, |t| self.eval(t, grid.horizon()))
    }
}

fn config_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

fn expression(field: &str, src: &str) -> Result<FlatEx<f64>> {
    let ex = exmex::parse::<f64>(src).map_err(|e| config_err(field, format!("cannot parse {src:?}: {e}")))?;
    if let Some(v) = ex.var_names().iter().find(|v| v.as_str() != "t" && v.as_str() != "x") {
        return Err(config_err(field, format!("unknown variable {v:?}; only t and x are allowed")));
    }
    Ok(ex)
}

/// Wraps a parsed expression as a field in `(t, x)`.
fn field_of(ex: FlatEx<f64>) -> ScalarField {
    let names: Vec<String> = ex.var_names().to_vec();
    Arc::new(move |t, x| {
        let args: Vec<f64> = names.iter().map(|n| if n == "t" { t } else { x }).collect();
        ex.eval(&args).unwrap_or(f64::NAN)
    })
}

fn x_partial(ex: &FlatEx<f64>, field: &str) -> Result<FlatEx<f64>> {
    match ex.var_names().iter().position(|v| v == "x") {
        Some(i) => ex.clone().partial(i).map_err(|e| config_err(field, format!("cannot differentiate: {e}"))),
        None => Ok(exmex::parse::<f64>("0").expect("constant parses")),
    }
}

impl CoefficientSpec {
    pub fn build(&self, mesh: &Mesh, grid: &TimeGrid) -> Result<CoefficientSet> {
        match self {
            CoefficientSpec::Constant { a, b, c } => {
                CoefficientSet::constant(*a, *b, *c).map_err(|e| config_err("coefficients", e))
            }
            CoefficientSpec::Example3Variable => Ok(example3_coefficients()),
            CoefficientSpec::Expression { a, b, c, a0 } => {
                let (ea, eb, ec) = (
                    expression("coefficients.a", a)?,
                    expression("coefficients.b", b)?,
                    expression("coefficients.c", c)?,
                );
                let time_dependent = [&ea, &eb, &ec].iter().any(|e| e.var_names().iter().any(|v| v == "t"));
                let a_x = x_partial(&ea, "coefficients.a")?;
                let a_xx = x_partial(&a_x, "coefficients.a")?;
                let b_x = x_partial(&eb, "coefficients.b")?;
                let a_field = field_of(ea);
                let floor = match a0 {
                    Some(v) => *v,
                    None => {
                        let mut min = f64::INFINITY;
                        for n in 0..=grid.steps() {
                            for &x in mesh.nodes() {
                                min = min.min(a_field(grid.time(n), x));
                            }
                        }
                        min
                    }
                };
                let set = CoefficientSet::new(a_field, field_of(eb), field_of(ec), floor, time_dependent)
                    .map_err(|e| config_err("coefficients.a", e))?
                    .with_derivatives(field_of(a_x), field_of(a_xx), field_of(b_x));
                set.check(mesh, grid).map_err(|e| config_err("coefficients", e))?;
                Ok(set)
            }
        }
    }
}

pub fn example3_coefficients() -> CoefficientSet {
    CoefficientSet::new(
        Arc::new(|_, x| 1.0 + 0.15 * (PI * x).cos()),
        Arc::new(|_, x| 0.1 * (PI * x).sin()),
        Arc::new(|t, _| 0.3 * (1.0 + t)),
        0.85,
        true,
    )
    .expect("positive floor")
    .with_derivatives(
        Arc::new(|_, x| -0.15 * PI * (PI * x).sin()),
        Arc::new(|_, x| -0.15 * PI * PI * (PI * x).cos()),
        Arc::new(|_, x| 0.1 * PI * (PI * x).cos()),
    )
}

impl ObservationSpec {
    pub fn location(&self, horizon: f64) -> Result<Location> {
        Ok(match *self {
            ObservationSpec::Fixed { x } => Location::Fixed(x),
            ObservationSpec::SineBump { center, amplitude } => {
                Location::Moving(Trajectory::sine_bump(center, amplitude, horizon)?)
            }
        })
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("length", self.length), ("horizon", self.horizon), ("epsilon", self.epsilon)];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_err(field, format!("must be positive and finite, got {v}")));
            }
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(config_err("delta", format!("must be nonnegative, got {}", self.delta)));
        }
        if self.elements < 2 {
            return Err(config_err("elements", "need at least 2 elements"));
        }
        if self.steps == 0 {
            return Err(config_err("steps", "need at least 1 time step"));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(config_err("name", format!("{:?} is not a valid file stem", self.name)));
        }
        if self.controls.is_empty() {
            return Err(config_err("controls", "at least one control side is required"));
        }
        if self.controls.len() > 1 && self.controls[0] == self.controls[1] {
            return Err(config_err("controls", "duplicate side"));
        }
        if self.observations.is_empty() {
            return Err(config_err("observations", "at least one observation is required"));
        }
        if self.targets.len() != self.observations.len() {
            return Err(config_err(
                "targets",
                format!("{} targets for {} observations", self.targets.len(), self.observations.len()),
            ));
        }
        for (i, w) in self.targets.iter().enumerate() {
            if let Waveform::Gaussian { width, .. } = w {
                if !(*width > 0.0) {
                    return Err(config_err(&format!("targets[{i}].width"), "must be positive"));
                }
            }
        }
        self.optimizer.validate().map_err(|e| config_err("optimizer", e))?;
        Ok(())
    }

    pub fn mesh(&self) -> Result<Mesh> {
        build_mesh(self.length, self.elements).map_err(|e| config_err("elements", e))
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.steps).map_err(|e| config_err("steps", e))
    }

    pub fn problem(&self) -> Result<TrackingProblem> {
        self.validate()?;
        let mesh = self.mesh()?;
        let grid = self.grid()?;
        let coeffs = self.coefficients.build(&mesh, &grid)?;
        let locations = self
            .observations
            .iter()
            .map(|o| o.location(self.horizon))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| config_err("observations", e))?;
        let observations = ObservationSet::new(locations, &mesh, &grid).map_err(|e| config_err("observations", e))?;
        let targets = self.targets.iter().map(|w| w.sample(&grid)).collect();
        TrackingProblem::new(mesh, grid, coeffs, self.controls.clone(), observations, targets, self.epsilon, self.delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "name": "demo",
        "horizon": 0.5,
        "elements": 20,
        "steps": 10,
        "controls": ["right"],
        "observations": [{"kind": "fixed", "x": 0.5}],
        "targets": [{"kind": "sinusoid", "amplitude": 1.0, "frequency": 2.0}],
        "epsilon": 0.1
    }"#;

    #[test]
    fn defaults_fill_in() {
        let c = ExperimentConfig::from_json(SAMPLE).unwrap();
        assert_eq!(c.length, 1.0);
        assert_eq!(c.delta, DEFAULT_DELTA);
        assert_eq!(c.coefficients, CoefficientSpec::default());
        assert_eq!(c.optimizer, OptimOptions::default());
    }

    #[test]
    fn round_trip() {
        let c = ExperimentConfig::from_json(SAMPLE).unwrap();
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn field_level_errors() {
        let bad = SAMPLE.replace("\"epsilon\": 0.1", "\"epsilon\": -1");
        let msg = ExperimentConfig::from_json(&bad).unwrap_err().to_string();
        assert!(msg.contains("epsilon"), "{msg}");
        let bad = SAMPLE.replace("\"steps\": 10", "\"steps\": 10, \"bogus\": 1");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(Error::Config(_))));
        let bad = SAMPLE.replace("\"x\": 0.5", "\"x\": 1.5");
        let c = ExperimentConfig::from_json(&bad).unwrap();
        let msg = c.problem().unwrap_err().to_string();
        assert!(msg.contains("observations"), "{msg}");
    }

    #[test]
    fn expression_coefficients_match_builtin() {
        let spec = CoefficientSpec::Expression {
            a: "1 + 0.15*cos(PI*x)".into(),
            b: "0.1*sin(PI*x)".into(),
            c: "0.3*(1+t)".into(),
            a0: None,
        };
        let mesh = build_mesh(1.0, 10).unwrap();
        let grid = TimeGrid::new(0.5, 5).unwrap();
        let e = spec.build(&mesh, &grid).unwrap();
        let b = example3_coefficients();
        assert!(e.time_dependent());
        assert!((e.a0() - 0.85).abs() < 1e-12);
        for (t, x) in [(0.1, 0.2), (0.4, 0.9)] {
            assert!((e.a(t, x) - b.a(t, x)).abs() < 1e-14);
            assert!((e.b(t, x) - b.b(t, x)).abs() < 1e-14);
            assert!((e.c(t, x) - b.c(t, x)).abs() < 1e-14);
            assert!((e.a_x(t, x, 1e-6) - b.a_x(t, x, 1e-6)).abs() < 1e-12);
            assert!((e.a_xx(t, x, 1e-6) - b.a_xx(t, x, 1e-6)).abs() < 1e-12);
            assert!((e.b_x(t, x, 1e-6) - b.b_x(t, x, 1e-6)).abs() < 1e-12);
        }
    }

    #[test]
    fn expression_rejects_unknown_variable() {
        let spec = CoefficientSpec::Expression { a: "1 + y".into(), b: "0".into(), c: "0".into(), a0: None };
        let mesh = build_mesh(1.0, 10).unwrap();
        let grid = TimeGrid::new(0.5, 5).unwrap();
        assert!(matches!(spec.build(&mesh, &grid), Err(Error::Config(_))));
    }

    #[test]
    fn waveforms() {
        let t = 0.3;
        assert!(
            (Waveform::Ramp { rate: 1.0 }.eval(t, 1.0) - 2.0 * Waveform::HalfRamp { rate: 1.0 }.eval(t, 1.0)).abs()
                < 1e-16
        );
        assert_eq!(Waveform::Gaussian { center: 0.25, width: 0.1 }.eval(0.25, 0.5), 1.0);
        assert!((Waveform::SquaredSine.eval(0.25, 0.5) - 1.0).abs() < 1e-15);
        assert!(Waveform::Sinusoid { amplitude: 2.0, frequency: 2.0 }.eval(0.5, 0.5).abs() < 1e-14);
    }
}
