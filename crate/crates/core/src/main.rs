#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hum_tracking::error::{Error, Result};
use hum_tracking::experiments::{
    run_diffeo, run_example, run_flatness_demo, run_obstruction, run_tracking, write_json, ExampleOverrides,
    ExperimentConfig, ObstructionSetup, ObstructionVariant, RunSummary, TrajectorySpec,
};

/// Output root used when no `--out` is given.
const OUT_ENV: &str = "HUM_TRACK_OUT";

/// Like `println!`, but a closed stdout (e.g. `| head`) is not an error.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser)]
#[command(name = "hum-track", version, about = "Pointwise boundary tracking for 1D parabolic equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a tracking problem described by a JSON config.
    Track {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one of the builtin examples.
    Example {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=4))]
        number: u8,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        ne: Option<usize>,
        #[arg(long)]
        nt: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also dump state and adjoint space-time fields.
        #[arg(long)]
        space_time: bool,
    },
    /// Build a dual forcing with vanishing boundary flux.
    Obstruction {
        /// one-control-two-points | two-controls-three-points
        variant: String,
        #[arg(long, default_value_t = 100)]
        ne: usize,
        #[arg(long, default_value_t = 100)]
        nt: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Construct the straightening map for a moving point and dump its coefficients.
    Diffeo {
        /// constant:<value> | sine:<center>:<amplitude>
        #[arg(long)]
        traj: String,
        /// Fixed second point `k` for the double map.
        #[arg(long)]
        double: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        horizon: f64,
        #[arg(long, default_value_t = 500)]
        nt: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Series controls for polynomial targets and their residual report.
    Flatness {
        #[arg(long)]
        demo: bool,
        #[arg(long, default_value_t = 100)]
        ne: usize,
        #[arg(long, default_value_t = 1000)]
        nt: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn output_dir(out: Option<PathBuf>, leaf: &str) -> PathBuf {
    out.unwrap_or_else(|| {
        let root = std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("results"), PathBuf::from);
        root.join(leaf)
    })
}

fn print_summary(s: &RunSummary) {
    let errs: Vec<String> = s.errors.iter().map(|e| format!("{e:.6e}")).collect();
    say!(
        "{}: E = [{}], combined = {:.6e}, eps = {:e}, J = {:.6e}, iterations = {}, {} ({:.2} s)",
        s.name,
        errs.join(", "),
        s.combined_error,
        s.epsilon,
        s.objective,
        s.iterations,
        s.termination,
        s.wall_time_seconds
    );
    say!("  wrote {}", s.artifacts.timeseries.display());
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Track { config, out } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| Error::Config(format!("config: cannot read {}: {e}", config.display())))?;
            let cfg = ExperimentConfig::from_json(&text)?;
            let dir = out.or_else(|| cfg.output.dir.clone());
            let summary = run_tracking(&cfg, &output_dir(dir, &cfg.name))?;
            print_summary(&summary);
        }
        Command::Example { number, eps, ne, nt, out, space_time } => {
            let overrides = ExampleOverrides { epsilon: eps, elements: ne, steps: nt };
            let dir = output_dir(out, &format!("example{number}"));
            if space_time {
                let mut configs = hum_tracking::experiments::example_configs(number, overrides)?;
                for c in &mut configs {
                    c.output.space_time = true;
                    print_summary(&run_tracking(c, &dir)?);
                }
            } else {
                for s in run_example(number, overrides, &dir)? {
                    print_summary(&s);
                }
            }
        }
        Command::Obstruction { variant, ne, nt, out } => {
            let variant: ObstructionVariant = variant.parse()?;
            let mut setup = ObstructionSetup::standard(variant, ne);
            setup.steps = nt;
            let report = run_obstruction(variant, &setup)?;
            let dir = output_dir(out, "obstruction");
            std::fs::create_dir_all(&dir)?;
            let path = dir.join(format!("{variant}_ne{ne}.json"));
            write_json(&path, &report)?;
            say!(
                "{variant}: |f| = {:.6e}, |p_x(.,L)| = {:.6e}{}, glued mismatch = {:.6e} (relative {:.3e})",
                report.forcing_norm,
                report.flux_right,
                report.flux_left.map_or(String::new(), |v| format!(", |p_x(.,0)| = {v:.6e}")),
                report.mismatch,
                report.mismatch / report.glued_norm
            );
            say!("  wrote {}", path.display());
        }
        Command::Diffeo { traj, double, horizon, nt, out } => {
            let spec: TrajectorySpec = traj.parse()?;
            let dir = output_dir(out, "diffeo");
            let (_, s) = run_diffeo(spec, double, horizon, nt, &dir)?;
            say!(
                "{} map, exponents {:?}, targets {:?}: pin error {:.3e}, interpolation error {:.3e}, min slope {:.6}",
                s.mode,
                s.exponents,
                s.targets,
                s.pin_error,
                s.interpolation_error,
                s.min_slope
            );
            write_json(&dir.join("diffeo_summary.json"), &s)?;
            say!("  wrote {}", s.csv.display());
        }
        Command::Flatness { demo, ne, nt, out } => {
            if !demo {
                return Err(Error::Config("flatness: only --demo is available".into()));
            }
            let dir = output_dir(out, "flatness");
            let r = run_flatness_demo(&dir, ne, nt)?;
            say!(
                "series K = {}: max residual {:.3e}, anchor errors {:.3e} / {:.3e}, FE trace error (t >= T/4) {:.3e}",
                r.order,
                r.max_residual,
                r.max_anchor_error,
                r.max_anchor_slope_error,
                r.forward_trace_error
            );
            write_json(&dir.join("flatness_summary.json"), &r)?;
            say!("  wrote {} and {}", r.controls_csv.display(), r.residual_csv.display());
        }
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::InvalidArgument(_) | Error::Dimension { .. } => 2,
        Error::InvalidTrajectory(_) | Error::Coefficient(_) => 2,
        Error::Singular { .. } | Error::SmoothingRequired | Error::Construction(_) => 3,
        Error::Io(_) => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
