//! Configured experiments, builtin examples and demonstrations.

mod config;
mod demos;
mod obstruction;
mod output;
mod run;

pub use config::{example3_coefficients, CoefficientSpec, ExperimentConfig, ObservationSpec, OutputOptions, Waveform};
pub use demos::{run_diffeo, run_flatness_demo, DiffeoSummary, FlatnessReport, TrajectorySpec};
pub use obstruction::{run_obstruction, ObstructionReport, ObstructionSetup, ObstructionVariant};
pub use output::{fmt_num, read_controls, write_columns, write_json, write_timeseries};
pub use run::{
    example_configs, run_example, run_tracking, solve_tracking, Artifacts, ExampleOverrides, RunSummary,
    TrackingOutcome,
};
