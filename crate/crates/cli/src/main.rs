use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use bayes_congestion::experiment::{
    run_bounds, run_solve, run_sweep, write_sweep_csv, ExperimentConfig, SweepOutcome,
};
use bayes_congestion::Error;
use clap::{Parser, Subcommand};

/// Benefit of public signalling in parallel Bayesian congestion games.
#[derive(Parser, Debug)]
#[command(name = "bcg", version)]
struct Cli {
    /// Override the Monte Carlo seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the Monte Carlo draw count.
    #[arg(long, global = true)]
    samples: Option<usize>,

    /// Output path (sweep CSV).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Print the effective config (after overrides) as TOML and exit.
    #[arg(long, global = true)]
    dump_config: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Nash and optimal flows, tolls and bound constants of a deterministic game.
    Solve { config: PathBuf },
    /// Benefit of uniform-grid signalling over a range of granularities.
    Sweep { config: PathBuf },
    /// Bound constants and bound values for the config's prior.
    Bounds { config: PathBuf },
}

impl Command {
    fn config(&self) -> &PathBuf {
        match self {
            Command::Solve { config } | Command::Sweep { config } | Command::Bounds { config } => {
                config
            }
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. }
        | Error::Parse(_)
        | Error::InvalidArgument(_)
        | Error::ShapeMismatch { .. } => 2,
        Error::Estimation(_) | Error::NoConvergence { .. } | Error::Cell { .. } => 3,
        Error::Io(_) | Error::Csv(_) => 4,
    }
}

fn kind(err: &Error) -> &'static str {
    match exit_code(err) {
        2 => "config",
        3 => "estimation",
        _ => "io",
    }
}

fn print_summary(outcome: &SweepOutcome) {
    println!(
        "{:>3}  {:>14}  {:>14}  {:>12}",
        "b", "benefit_untol", "benefit_tolled", "mc_stderr"
    );
    for r in &outcome.rows {
        match &r.error {
            Some(e) => println!("{:>3}  failed: {e}", r.b),
            None => println!(
                "{:>3}  {:>14.6}  {:>14.6}  {:>12.3e}",
                r.b,
                r.benefit_untolled,
                r.benefit_tolled,
                r.mc_stderr()
            ),
        }
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let mut config = ExperimentConfig::from_path(cli.command.config())?;
    if let Some(seed) = cli.seed {
        config.monte_carlo.seed = seed;
    }
    if let Some(samples) = cli.samples {
        config.monte_carlo.samples = samples;
    }
    if let Some(out) = &cli.out {
        config.output = Some(out.clone());
    }
    if cli.dump_config {
        print!("{}", config.to_toml()?);
        return Ok(());
    }
    let experiment = config.build()?;

    match &cli.command {
        Command::Solve { .. } => print!("{}", run_solve(&experiment)?),
        Command::Bounds { .. } => print!("{}", run_bounds(&experiment)?),
        Command::Sweep { .. } => {
            let outcome = run_sweep(&experiment)?;
            match &experiment.output {
                Some(path) => {
                    let mut file = BufWriter::new(File::create(path)?);
                    write_sweep_csv(&mut file, &experiment, &outcome)?;
                    file.flush()?;
                    print_summary(&outcome);
                    println!("wrote {}", path.display());
                }
                None => write_sweep_csv(io::stdout().lock(), &experiment, &outcome)?,
            }
            if outcome.rows.iter().any(|r| r.error.is_some()) {
                return Err(Error::Estimation("one or more sweep rows failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(io::stderr)
        .init();

    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error[{}]: {err}", kind(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}
