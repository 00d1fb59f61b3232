use std::path::PathBuf;

use anyhow::{bail, Result};
use asyougo::experiment::{ExperimentCase, DEFAULT_HORIZON, DEFAULT_PATHS, FIG_ADAPTIVE, FIG_LEARNING};
use asyougo_cli::advisor::{run_interactive, AdvisorSession, Mode};
use asyougo_cli::commands::{self, Kind};
use asyougo_cli::config::Config;
use clap::{Args, Parser, Subcommand};

/// Plan and learn as-you-go relay placement along a line.
#[derive(Parser)]
#[command(name = "asyougo", version)]
struct Cli {
    /// JSON configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_PATHS)]
    paths: usize,
    #[arg(long, default_value_t = DEFAULT_HORIZON)]
    steps: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the optimal policy and print values, thresholds and metrics.
    Solve,
    /// Long-run metrics in the true environment of the policy solved under the prior.
    Metrics,
    /// Pick the measurement horizon B.
    ChooseB,
    /// Monte Carlo run of the fixed policy; CSV of running averages.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo run of the value-learning policy.
    Learn {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo run of the constraint-seeking adaptive policy.
    Adapt {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate the learning comparison curves into a directory.
    ReproduceFig3 {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Regenerate the adaptive comparison curves into a directory.
    ReproduceFig4 {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Step-by-step advice while deploying; resumes an existing session file.
    Advise {
        #[arg(long, value_enum, default_value_t = Mode::Fixed)]
        mode: Mode,
        #[arg(long)]
        session: Option<PathBuf>,
    },
}

fn print_json(v: &serde_json::Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Solve => print_json(&commands::solve(&cfg)?),
        Command::Metrics => print_json(&commands::metrics(&cfg)?),
        Command::ChooseB => print_json(&commands::choose_horizon(&cfg)?),
        Command::Simulate { run, out } => simulate(&cfg, Kind::Fixed, &run, out),
        Command::Learn { run, out } => simulate(&cfg, Kind::Learn, &run, out),
        Command::Adapt { run, out } => simulate(&cfg, Kind::Adapt, &run, out),
        Command::ReproduceFig3 { run, out } => reproduce(&FIG_LEARNING, &run, out),
        Command::ReproduceFig4 { run, out } => reproduce(&FIG_ADAPTIVE, &run, out),
        Command::Advise { mode, session } => advise(cfg, mode, cli.config.is_some(), session),
    }
}

fn simulate(cfg: &Config, kind: Kind, run: &RunArgs, out: Option<PathBuf>) -> Result<()> {
    let case: ExperimentCase = commands::case_for(cfg, kind, run.paths, run.steps)?;
    case.validate()?;
    commands::run_experiment(&case, run.seed, out.as_deref())?;
    Ok(())
}

fn reproduce(names: &[&str], run: &RunArgs, dir: PathBuf) -> Result<()> {
    print_json(&commands::reproduce(names, run.paths, run.steps, run.seed, &dir)?)
}

fn advise(cfg: Config, mode: Mode, explicit_config: bool, session: Option<PathBuf>) -> Result<()> {
    let mut s = match &session {
        Some(p) if p.exists() => {
            let s = AdvisorSession::load(p)?;
            if s.mode() != mode {
                bail!("session {} was started in {:?} mode", p.display(), s.mode());
            }
            if explicit_config && s.config != cfg {
                bail!("session {} was started with a different configuration", p.display());
            }
            eprintln!("resuming at step {} with {} relays placed", s.deployment.k + 1, s.deployment.n_relays());
            s
        }
        _ => AdvisorSession::new(cfg, mode)?,
    };
    let stdin = std::io::stdin();
    run_interactive(&mut s, stdin.lock(), std::io::stdout().lock(), session.as_deref())
}
