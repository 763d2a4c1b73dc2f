//! `attman`: eigen-structure tables, simulations and stable-manifold bundles
//! for the controlled spherical pendulum (s2) and 3D pendulum (so3).

mod error;
mod table;

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use attitude_manifolds::bundle::{export_bundle, import_bundle, write_states, BundleFormat};
use attitude_manifolds::config::{parse_state, Config};
use attitude_manifolds::integrators::{flow, step_count, Direction, DiscreteFlow, MomentumState, StepSpec, DEFAULT_STEP};
use attitude_manifolds::linearization::{a_matrix_s2, a_matrix_so3};
use attitude_manifolds::manifold::{build_seed_ball, default_stride, globalize, validate_forward, DEFAULT_RADIUS};
use attitude_manifolds::models::{equilibrium, EquilibriumId, Model, ModelKind, State};
use attitude_manifolds::spectral::{classify_equilibrium, eigen_decompose};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

const AFTER_HELP: &str = "\
Model parameters come from the built-in defaults, then the --config file,
then --param overrides, in that order. A --model flag overrides the `model`
key. Config files hold `key = value` lines; `#` starts a comment.

Exit status: 0 on success, 2 for invalid arguments or input, 1 when a
computation fails.";

#[derive(Parser, Debug)]
#[command(name = "attman", version, about, after_help = AFTER_HELP)]
struct Cli {
    /// Parameter file with `key = value` lines.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Parameter override, e.g. `kq=2` or `Rd=0,0,1,0.5`; repeatable.
    #[arg(long = "param", global = true, value_name = "KEY=VALUE")]
    params: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print eigenvalues and eigenvectors of the linearization at equilibria.
    #[command(allow_negative_numbers = true)]
    Eigs(EigsArgs),
    /// Integrate one trajectory with the variational integrator.
    #[command(allow_negative_numbers = true)]
    Simulate(SimulateArgs),
    /// Compute a stable-manifold bundle by backward integration from a seed ball.
    #[command(allow_negative_numbers = true)]
    Manifold(ManifoldArgs),
    /// Re-integrate a stored bundle state forward and report its distance to the equilibrium.
    #[command(allow_negative_numbers = true)]
    Validate(ValidateArgs),
    /// Convert a bundle between JSON lines and CSV.
    #[command(allow_negative_numbers = true)]
    Export(ExportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    S2,
    So3,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::S2 => ModelKind::S2,
            ModelArg::So3 => ModelKind::SO3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DirectionArg {
    Fwd,
    Bwd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Jsonl,
    Csv,
}

impl From<FormatArg> for BundleFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Jsonl => BundleFormat::Jsonl,
            FormatArg::Csv => BundleFormat::Csv,
        }
    }
}

#[derive(Args, Debug)]
struct EigsArgs {
    /// Model; defaults to the config's `model` key, else s2.
    #[arg(long, value_enum)]
    model: Option<ModelArg>,

    /// hanging or inverted (s2); desired, e1, e2 or e3 (so3). Default: every equilibrium of the model.
    #[arg(long)]
    equilibrium: Option<EquilibriumId>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Model; defaults to the config's `model` key, else s2.
    #[arg(long, value_enum)]
    model: Option<ModelArg>,

    /// Initial state `x,y,z:wx,wy,wz`: direction and angular velocity on s2,
    /// rotation vector and body angular velocity on so3; omit `:…` to start
    /// at rest. [default: 1,0,0 on s2, 3,0,0 on so3]
    #[arg(long)]
    state: Option<String>,

    /// Duration in seconds; must be a whole number of steps.
    #[arg(long = "T", value_name = "SECONDS", default_value_t = 10.0, value_parser = positive)]
    duration: f64,

    /// Step size in seconds.
    #[arg(long = "h", value_name = "SECONDS", default_value_t = DEFAULT_STEP, value_parser = positive)]
    h: f64,

    /// Integration direction.
    #[arg(long, value_enum, default_value_t = DirectionArg::Fwd)]
    direction: DirectionArg,

    /// Record every N-th step (the last step is always recorded).
    #[arg(long, value_name = "N", default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    stride: u64,

    /// Output file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Output format. [default: csv for a .csv path, else jsonl]
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Args, Debug)]
struct ManifoldArgs {
    /// Model; defaults to the config's `model` key, else s2.
    #[arg(long, value_enum)]
    model: Option<ModelArg>,

    /// Saddle equilibrium: inverted (s2) or e1, e2, e3 (so3). [default: inverted on s2, e1 on so3]
    #[arg(long)]
    equilibrium: Option<EquilibriumId>,

    /// Radius of the seed ball in the stable eigenspace, in (0, 0.1].
    #[arg(long, default_value_t = DEFAULT_RADIUS, value_parser = positive)]
    delta: f64,

    /// Number of seeds on the ball.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    points: u64,

    /// Backward duration in seconds; must be a whole number of steps.
    #[arg(long = "T", value_name = "SECONDS", default_value_t = 9.0, value_parser = positive)]
    duration: f64,

    /// Step size in seconds.
    #[arg(long = "h", value_name = "SECONDS", default_value_t = DEFAULT_STEP, value_parser = positive)]
    h: f64,

    /// Store every N-th step. [default: 1 on s2, 10 on so3]
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    stride: Option<u64>,

    /// Bundle path; a `<path>.meta.json` sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,

    /// Output format. [default: csv for a .csv path, else jsonl]
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Bundle written by `manifold` (its sidecar must sit next to it).
    #[arg(long)]
    bundle: PathBuf,

    /// Seed index.
    #[arg(long)]
    seed: usize,

    /// Stored backward time of the state to check.
    #[arg(long = "t", value_name = "SECONDS", value_parser = non_negative)]
    t: f64,

    /// Forward step size. [default: the bundle's step]
    #[arg(long = "h", value_name = "SECONDS", value_parser = positive)]
    h: Option<f64>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    /// Bundle to read.
    #[arg(long)]
    bundle: PathBuf,

    /// Path to write, with a new sidecar.
    #[arg(long)]
    out: PathBuf,

    /// Output format. [default: csv for a .csv path, else jsonl]
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() && x > 0.0 => Ok(x),
        Ok(_) => Err("must be a finite positive number".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() && x >= 0.0 => Ok(x),
        Ok(_) => Err("must be a finite non-negative number".into()),
        Err(e) => Err(e.to_string()),
    }
}

/// Defaults, then the config file, then `--param` overrides.
fn load_config(cli: &Cli) -> Result<Config, CliError> {
    let mut config = Config::default();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        config.merge(&Config::parse(&text).map_err(|e| CliError::from(e).context(path.display()))?);
    }
    for pair in &cli.params {
        let (k, v) = Config::parse_pair(pair).map_err(|e| CliError::from(e).context("--param"))?;
        config.set(&k, &v).map_err(|e| CliError::from(e).context("--param"))?;
    }
    Ok(config)
}

fn build_model(config: &Config, flag: Option<ModelArg>) -> Result<Model, CliError> {
    let kind = match (flag, config.model_kind()?) {
        (Some(m), _) => m.into(),
        (None, Some(k)) => k,
        (None, None) => ModelKind::S2,
    };
    Ok(config.build_model(Some(kind))?)
}

fn format_for(path: Option<&Path>, flag: Option<FormatArg>) -> BundleFormat {
    match (flag, path) {
        (Some(f), _) => f.into(),
        (None, Some(p)) => BundleFormat::from_path(p),
        (None, None) => BundleFormat::Jsonl,
    }
}

fn eigs(config: &Config, args: &EigsArgs) -> Result<(), CliError> {
    let model = build_model(config, args.model)?;
    let ids: Vec<EquilibriumId> = match args.equilibrium {
        Some(id) => {
            id.check_model(model.kind())?;
            vec![id]
        }
        None => match model.kind() {
            ModelKind::S2 => vec![EquilibriumId::Hanging, EquilibriumId::Inverted],
            ModelKind::SO3 => vec![EquilibriumId::Desired, EquilibriumId::Flip(1), EquilibriumId::Flip(2), EquilibriumId::Flip(3)],
        },
    };
    let mut out = String::new();
    for id in ids {
        let lin = match (&model, equilibrium(&model, id)?) {
            (Model::S2(p), State::S2(s)) => a_matrix_s2(&s, p),
            (Model::SO3(p), State::SO3(s)) => a_matrix_so3(&s, p),
            _ => unreachable!("equilibrium() returns states of the model"),
        };
        let e = eigen_decompose(&lin.a)?;
        let cls = classify_equilibrium(&e, lin.c.as_ref())?;
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&table::render(id, &e, &cls));
    }
    print!("{out}");
    Ok(())
}

fn spec_for(h: f64, direction: DirectionArg) -> StepSpec {
    StepSpec::new(
        h,
        match direction {
            DirectionArg::Fwd => Direction::Forward,
            DirectionArg::Bwd => Direction::Backward,
        },
    )
}

fn simulate(config: &Config, args: &SimulateArgs) -> Result<(), CliError> {
    let model = build_model(config, args.model)?;
    let kind = model.kind();
    let spec_text = args.state.clone().unwrap_or_else(|| match kind {
        ModelKind::S2 => "1,0,0".into(),
        ModelKind::SO3 => "3,0,0".into(),
    });
    let start = parse_state(kind, &spec_text).map_err(|e| CliError::from(e).context("--state"))?;
    let spec = spec_for(args.h, args.direction);
    step_count(args.duration, args.h).map_err(|e| CliError::from(e).context("--T"))?;
    let stride = args.stride as usize;
    let (times, states) = match (&model, start) {
        (Model::S2(p), State::S2(s)) => {
            p.validate_spec(&spec).map_err(|e| CliError::from(e).context("--h"))?;
            let traj = flow(p, s, args.duration, &spec, stride)?;
            (traj.times, traj.states.into_iter().map(State::S2).collect::<Vec<_>>())
        }
        (Model::SO3(p), State::SO3(s)) => {
            p.validate_spec(&spec).map_err(|e| CliError::from(e).context("--h"))?;
            let traj = flow(p, MomentumState::from_tangent(&s, p), args.duration, &spec, stride)?;
            (traj.times, traj.states.iter().map(|m| State::SO3(m.to_tangent(p))).collect())
        }
        _ => unreachable!("parse_state returns states of the model"),
    };
    let format = format_for(args.out.as_deref(), args.format);
    let written = match &args.out {
        Some(path) => File::create(path)
            .and_then(|f| write_states(kind, &times, &states, format, f))
            .map_err(|e| (path.display().to_string(), e)),
        None => write_states(kind, &times, &states, format, io::stdout().lock()).map_err(|e| ("stdout".into(), e)),
    };
    written.map_err(|(target, e)| CliError::numeric(format!("{target}: {e}")))
}

fn manifold(config: &Config, args: &ManifoldArgs) -> Result<(), CliError> {
    let model = build_model(config, args.model)?;
    let kind = model.kind();
    let id = args.equilibrium.unwrap_or(match kind {
        ModelKind::S2 => EquilibriumId::Inverted,
        ModelKind::SO3 => EquilibriumId::Flip(1),
    });
    id.check_model(kind).map_err(|e| CliError::from(e).context("--equilibrium"))?;
    let ball = build_seed_ball(&model, id, args.delta, args.points as usize)?;
    let stride = args.stride.map_or(default_stride(kind), |s| s as usize);
    step_count(args.duration, args.h).map_err(|e| CliError::from(e).context("--T"))?;
    let bundle = globalize(&ball, args.duration, &StepSpec::backward(args.h), stride)?;
    export_bundle(&bundle, &args.out, format_for(Some(&args.out), args.format))?;
    let failed: Vec<String> = bundle
        .failures()
        .map(|(seed, f)| format!("seed {seed} stopped at step {}: {}", f.step, f.message))
        .collect();
    eprintln!(
        "wrote {} seeds x {} times to {}",
        bundle.trajectories.len(),
        bundle.times.len(),
        args.out.display()
    );
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::numeric(format!("{} seeds failed:\n  {}", failed.len(), failed.join("\n  "))))
    }
}

fn validate(args: &ValidateArgs) -> Result<(), CliError> {
    let bundle = import_bundle(&args.bundle)?;
    let spec = StepSpec::forward(args.h.unwrap_or(bundle.h));
    let d = validate_forward(&bundle, args.seed, args.t, &spec)?;
    let ratio = d / bundle.delta;
    println!("seed {} t = {}: distance {d:e} = {ratio:.4} delta", args.seed, args.t);
    if (0.5..=1.5).contains(&ratio) {
        Ok(())
    } else {
        Err(CliError::numeric(format!("distance {d:e} is outside [0.5, 1.5] x delta = {:e}", bundle.delta)))
    }
}

fn export(args: &ExportArgs) -> Result<(), CliError> {
    let bundle = import_bundle(&args.bundle)?;
    export_bundle(&bundle, &args.out, format_for(Some(&args.out), args.format))?;
    Ok(())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Eigs(args) => eigs(&load_config(cli)?, args),
        Command::Simulate(args) => simulate(&load_config(cli)?, args),
        Command::Manifold(args) => manifold(&load_config(cli)?, args),
        Command::Validate(args) => validate(args),
        Command::Export(args) => export(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(io::stderr(), "error: {e}");
            ExitCode::from(e.code)
        }
    }
}
