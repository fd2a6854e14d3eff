//! Command-line front end: experiment descriptors from a JSON config file
//! and/or flags (flags win), deterministic artifacts, machine-readable
//! errors with distinct exit codes for validation (2) and numerical
//! contract (3) failures.

use clap::{Args, Parser, Subcommand};
use phaselab::runner::{self, CommandKind, ExperimentDescriptor, Params};
use phaselab::{PhaseLabError, Result};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "phaselab", version, about = "Phase-estimation numerics lab")]
struct Cli {
    /// JSON config file with {"command": ..., "parameters": {...}};
    /// command-line flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: all cores). Results are identical for any
    /// thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output artifact path (CSV or JSON depending on the command).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Channel Fisher-information figures at a dephasing level.
    Qfi(QfiArgs),
    /// Covariant phase measurement for a profile / ring size.
    Covariant(CovariantArgs),
    /// Dephasing-branch average error and limiting density.
    NoisyCovariant(NoisyArgs),
    /// Adaptive bit-by-bit protocol trials with transcripts.
    Adaptive(AdaptiveArgs),
    /// Rescaled-error histograms comparing zero noise against epsilon.
    LimitDist(LimitArgs),
    /// Scaling-exponent tables over a geometric grid of n.
    Scaling(ScalingArgs),
}

#[derive(Args, Default)]
struct QfiArgs {
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args, Default)]
struct CovariantArgs {
    /// "uniform", "sine", or a path to a two-column profile file.
    #[arg(long)]
    profile: Option<String>,
    /// "half-angle" or "full-angle".
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    /// Outcome-density grid points for the CSV.
    #[arg(long)]
    bins: Option<usize>,
}

#[derive(Args, Default)]
struct NoisyArgs {
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    window: Option<f64>,
}

#[derive(Args, Default)]
struct AdaptiveArgs {
    #[arg(long)]
    epsilon: Option<f64>,
    /// Protocol size N (n = 2^{N+1} - 1 channel uses).
    #[arg(long = "N", visible_alias = "n-exponent")]
    n_exponent: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Fixed true phase; omit to draw per trial.
    #[arg(long)]
    theta: Option<f64>,
    /// "uniform" or "on-grid" phase draw when --theta is omitted.
    #[arg(long)]
    theta_grid: Option<String>,
}

#[derive(Args, Default)]
struct LimitArgs {
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long = "N", visible_alias = "n-exponent")]
    n_exponent: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    window: Option<f64>,
}

#[derive(Args, Default)]
struct ScalingArgs {
    /// One of rld-schedule, rld-constant, covariant-sine, covariant-uniform.
    #[arg(long)]
    quantity: Option<String>,
    #[arg(long)]
    n_min: Option<usize>,
    #[arg(long)]
    n_max: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
}

fn override_opt<T>(target: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *target = value;
    }
}

fn build_descriptor(cli: &Cli) -> Result<ExperimentDescriptor> {
    let mut descriptor = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<ExperimentDescriptor>(&text)?
        }
        None => {
            let command = match &cli.command {
                Some(Command::Qfi(_)) => CommandKind::Qfi,
                Some(Command::Covariant(_)) => CommandKind::Covariant,
                Some(Command::NoisyCovariant(_)) => CommandKind::NoisyCovariant,
                Some(Command::Adaptive(_)) => CommandKind::Adaptive,
                Some(Command::LimitDist(_)) => CommandKind::LimitDist,
                Some(Command::Scaling(_)) => CommandKind::Scaling,
                None => {
                    return Err(PhaseLabError::InvalidParameter(
                        "no subcommand and no --config given".into(),
                    ))
                }
            };
            ExperimentDescriptor {
                command,
                parameters: Params::default(),
            }
        }
    };

    let p = &mut descriptor.parameters;
    match &cli.command {
        Some(Command::Qfi(a)) => {
            override_opt(&mut p.p, a.p);
            override_opt(&mut p.theta, a.theta);
            override_opt(&mut p.n, a.n);
        }
        Some(Command::Covariant(a)) => {
            override_opt(&mut p.profile, a.profile.clone());
            override_opt(&mut p.kernel, a.kernel.clone());
            override_opt(&mut p.n, a.n);
            override_opt(&mut p.bins, a.bins);
        }
        Some(Command::NoisyCovariant(a)) => {
            override_opt(&mut p.profile, a.profile.clone());
            override_opt(&mut p.kernel, a.kernel.clone());
            override_opt(&mut p.n, a.n);
            override_opt(&mut p.epsilon, a.epsilon);
            override_opt(&mut p.bins, a.bins);
            override_opt(&mut p.window, a.window);
        }
        Some(Command::Adaptive(a)) => {
            override_opt(&mut p.epsilon, a.epsilon);
            override_opt(&mut p.n_exponent, a.n_exponent);
            override_opt(&mut p.trials, a.trials);
            override_opt(&mut p.theta, a.theta);
            override_opt(&mut p.theta_grid, a.theta_grid.clone());
        }
        Some(Command::LimitDist(a)) => {
            override_opt(&mut p.epsilon, a.epsilon);
            override_opt(&mut p.n_exponent, a.n_exponent);
            override_opt(&mut p.trials, a.trials);
            override_opt(&mut p.bins, a.bins);
            override_opt(&mut p.window, a.window);
        }
        Some(Command::Scaling(a)) => {
            override_opt(&mut p.quantity, a.quantity.clone());
            override_opt(&mut p.n_min, a.n_min);
            override_opt(&mut p.n_max, a.n_max);
            override_opt(&mut p.epsilon, a.epsilon);
            override_opt(&mut p.p, a.p);
        }
        None => {}
    }
    override_opt(&mut p.seed, cli.seed);
    override_opt(
        &mut p.out,
        cli.out
            .as_ref()
            .map(|o| o.to_string_lossy().into_owned()),
    );
    Ok(descriptor)
}

fn execute(cli: &Cli) -> Result<serde_json::Value> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| PhaseLabError::InvalidParameter(format!("thread pool: {e}")))?;
    }
    let descriptor = build_descriptor(cli)?;
    runner::run(&descriptor)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(summary) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
            ExitCode::SUCCESS
        }
        Err(err) => {
            let code = runner::exit_code_for(&err);
            let doc = serde_json::json!({
                "error": err.to_string(),
                "exit_code": code,
            });
            eprintln!("{doc}");
            ExitCode::from(code as u8)
        }
    }
}
