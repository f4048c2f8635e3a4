use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use hjlab_cli::out::RunContext;
use hjlab_cli::{commands, config, CliError};

/// Numerical laboratory for Hamilton-Jacobi equations driven by rough and
/// rapidly mixing signals: effective Hamiltonians, cell correctors, rescaled
/// simulations, ensemble statistics, convergence rates, and randomized
/// solver verification.
#[derive(Parser)]
#[command(name = "hjlab", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the configuration's RNG seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads for ensemble sampling.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Output directory (default `out/<subcommand>`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Cross-check tabulated closed forms against long-time cell solves.
    #[arg(long, global = true)]
    check: bool,
    /// Restrict `verify` to one named suite.
    #[arg(long, global = true, value_name = "NAME")]
    suite: Option<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Tabulate effective Hamiltonians from their closed forms.
    Effective,
    /// Construct and audit sawtooth cell correctors.
    Corrector,
    /// Run one rescaled realization and record snapshots.
    Simulate,
    /// Sample many realizations and compare probe laws against the limit.
    Ensemble,
    /// Measure a convergence or drift rate across epsilons.
    Rate,
    /// Run randomized solver property suites.
    Verify,
}

impl Cmd {
    fn name(self) -> &'static str {
        match self {
            Cmd::Effective => "effective",
            Cmd::Corrector => "corrector",
            Cmd::Simulate => "simulate",
            Cmd::Ensemble => "ensemble",
            Cmd::Rate => "rate",
            Cmd::Verify => "verify",
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                // Usage errors are configuration errors.
                _ => 3,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks exceeded tolerance");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let name = cli.command.name();
    let ctx = RunContext {
        out: cli.out.unwrap_or_else(|| PathBuf::from("out").join(name)),
        seed: cli.seed,
        jobs: cli.jobs,
        check: cli.check,
        suite: cli.suite,
    };
    let path = cli.config.as_deref();
    match cli.command {
        Cmd::Effective => commands::effective::run(&config::read_config(path, name)?, &ctx),
        Cmd::Corrector => commands::corrector::run(&config::read_config(path, name)?, &ctx),
        Cmd::Simulate => commands::simulate::run(&config::read_config(path, name)?, &ctx),
        Cmd::Ensemble => commands::ensemble::run(&config::read_config(path, name)?, &ctx),
        Cmd::Rate => commands::rate::run(&config::read_config(path, name)?, &ctx),
        Cmd::Verify => commands::verify::run(&config::read_config_or_default(path)?, &ctx),
    }
}
