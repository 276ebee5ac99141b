//! Command-line driver for the post-stall motion-planning simulator:
//! seed-path planning, trajectory optimization, closed-loop simulation,
//! knot-count benchmarks, and the steady-turn trim study, all emitting
//! CSV tables and structured-text summaries.

pub mod config;
mod commands;
mod output;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use poststall::environment::HallwaySpec;
use poststall::params::AircraftParams;
use poststall::trajopt::{SolverConfig, Transcription};

/// Errors surfaced to the user; the variant decides the exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Usage or configuration problem: exit code 2.
    #[error("{0}")]
    Config(String),
    /// Domain failure (infeasible problem, planning timeout, missed
    /// expectation): exit code 1.
    #[error("{0}")]
    Domain(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Config(_) => 2,
        }
    }
}

/// Post-stall fixed-wing motion planning and control simulator.
#[derive(Debug, Parser)]
#[command(name = "poststall", version, about)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Vehicle parameter file (TOML); the built-in 24-inch aerobatic
    /// airframe when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub params: Option<PathBuf>,

    /// Corridor map file (TOML); the built-in 1.75 m corner hallway when
    /// omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub map: Option<PathBuf>,

    /// Solver settings file (TOML).
    #[arg(long = "solver-config", global = true, value_name = "PATH")]
    pub solver_config: Option<PathBuf>,

    /// Directory output files are written into (created if missing).
    #[arg(long = "out-dir", global = true, value_name = "DIR", default_value = "out")]
    pub out_dir: PathBuf,

    /// Seed for every randomized component.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

/// Transcription scheme selector shared by `optimize` and `benchmark`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Hermite-Simpson collocation.
    Hs,
    /// Backward-Euler transcription.
    Euler,
}

impl From<Method> for Transcription {
    fn from(m: Method) -> Self {
        match m {
            Method::Hs => Transcription::HermiteSimpson,
            Method::Euler => Transcription::Euler,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Replanning is instantaneous at the tick; runs are byte-reproducible.
    Lockstep,
    /// Measured solve time delays activation of each new plan.
    Realtime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Expectation {
    /// Exit nonzero unless the run reaches the goal.
    Success,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan the kinematic seed path through the map and emit it as CSV.
    Plan {
        /// Also dump a horizontal slice of the distance field at this
        /// world z (meters, z-down) as CSV.
        #[arg(long = "slice-z", value_name = "Z")]
        slice_z: Option<f64>,
    },
    /// Optimize a dynamically feasible trajectory along the seed path.
    Optimize {
        /// Number of knot intervals.
        #[arg(long, default_value_t = 10)]
        knots: usize,
        /// Transcription scheme.
        #[arg(long, value_enum, default_value_t = Method::Hs)]
        method: Method,
        /// Planning horizon covered by the trajectory, seconds.
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        /// Warm-start re-solve: file with 17 whitespace- or
        /// comma-separated numbers giving the perturbed start state.
        #[arg(long, value_name = "STATE_FILE")]
        warm: Option<PathBuf>,
    },
    /// Fly the closed receding-horizon loop on the truth model.
    Simulate {
        /// Apply tracking feedback between replans, or fly the raw
        /// optimized inputs open loop.
        #[arg(long, value_enum, default_value_t = OnOff::On)]
        feedback: OnOff,
        /// Plant mismatch: `none` (plant = model), `paper`
        /// (reverse-identified plant), or a TOML vehicle parameter file.
        #[arg(long, default_value = "none", value_name = "none|paper|PATH")]
        mismatch: String,
        /// Timing model for replan activation.
        #[arg(long, value_enum, default_value_t = Mode::Lockstep)]
        mode: Mode,
        /// Fail (exit 1) when the stated expectation is not met.
        #[arg(long, value_enum)]
        expect: Option<Expectation>,
    },
    /// Solve quality and cost versus knot count on the corner fixture.
    Benchmark {
        /// Transcription scheme.
        #[arg(long, value_enum, default_value_t = Method::Hs)]
        method: Method,
        /// Comma-separated knot counts.
        #[arg(long, value_delimiter = ',', default_value = "6,8,10,14,20")]
        knots: Vec<usize>,
        /// Trials per knot count; rows report medians.
        #[arg(long, default_value_t = 5)]
        trials: usize,
        /// Time warm re-solves from a perturbed start instead of cold
        /// solves from the path seed.
        #[arg(long)]
        warm: bool,
    },
    /// Minimum steady-turn radius versus angle-of-attack cap.
    Trim {
        /// Cap sweep in degrees as start:end:step.
        #[arg(long, default_value = "10:70:5", value_name = "LO:HI:STEP")]
        caps: String,
    },
}

/// Everything a subcommand needs after the global flags are resolved:
/// parsed configs and output plumbing.
pub struct Context {
    pub params: AircraftParams,
    pub spec: HallwaySpec,
    pub solver: SolverConfig,
    pub out_dir: PathBuf,
    pub seed: u64,
}

/// Seed-path planning constants shared by `plan`, `optimize`, and the
/// simulation defaults: corridor clearance radius, curvature bound,
/// cruise speed, curvature slowdown gain, voxel resolution, and
/// distance-field saturation.
pub(crate) const PLANNING_RADIUS: f64 = 0.55;
pub(crate) const KAPPA_MAX: f64 = 2.0;
pub(crate) const V_MAX: f64 = 4.0;
pub(crate) const KAPPA_GAIN: f64 = 1.0;
pub(crate) const RESOLUTION: f64 = 0.05;
pub(crate) const D_MAX: f64 = 5.0;

impl Context {
    fn from_globals(g: &GlobalArgs) -> Result<Self, CliError> {
        let params = match &g.params {
            Some(p) => config::load_params(p)?,
            None => AircraftParams::edge540_24in(),
        };
        let spec = match &g.map {
            Some(p) => config::load_map(p)?,
            None => HallwaySpec::corner(1.75, 2.5, 4.0),
        };
        let solver = match &g.solver_config {
            Some(p) => config::load_solver(p)?,
            // Cold solves from a kinematic seed need the inner
            // subproblems to converge before the penalty inflates.
            None => SolverConfig {
                max_outer: 30,
                max_inner: 200,
                ..SolverConfig::default()
            },
        };
        Ok(Self {
            params,
            spec,
            solver,
            out_dir: g.out_dir.clone(),
            seed: g.seed,
        })
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let ctx = Context::from_globals(&cli.global)?;
    match &cli.command {
        Command::Plan { slice_z } => commands::plan::run(&ctx, *slice_z),
        Command::Optimize {
            knots,
            method,
            horizon,
            warm,
        } => commands::optimize::run(&ctx, *knots, (*method).into(), *horizon, warm.as_deref()),
        Command::Simulate {
            feedback,
            mismatch,
            mode,
            expect,
        } => commands::simulate::run(&ctx, *feedback, mismatch, *mode, *expect),
        Command::Benchmark {
            method,
            knots,
            trials,
            warm,
        } => commands::benchmark::run(&ctx, (*method).into(), knots, *trials, *warm),
        Command::Trim { caps } => commands::trim::run(&ctx, caps),
    }
}

/// Parse `argv`, run the selected subcommand, and return the process
/// exit code: 0 on success, 1 on domain failures, 2 on usage or
/// configuration errors.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
