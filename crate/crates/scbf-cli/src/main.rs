mod commands;

use clap::{Parser, Subcommand};
use scbf::config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "scbf", version, about = "Stochastic convective Brinkman-Forchheimer experiments")]
struct Cli {
    /// TOML run configuration; missing keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// First seed (overrides the config).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads for ensembles (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Output directory (overrides the config).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Print the full default configuration and exit.
    #[arg(long)]
    print_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Operator identity suites on random admissible fields.
    CheckInvariants,
    /// One trajectory with energy ledgers, CSV and snapshots.
    Simulate,
    /// Pullback ensemble on one noise path, plus the absorbing radius.
    Pullback,
    /// Attractor clouds on nested domains against the reference domain.
    Upsemi,
    /// Time averages, coupling decay and the exponential moment.
    Measure,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::CheckInvariants => "check-invariants",
            Self::Simulate => "simulate",
            Self::Pullback => "pullback",
            Self::Upsemi => "upsemi",
            Self::Measure => "measure",
        }
    }
}

/// Exit statuses.
pub enum Failure {
    /// A configured assertion did not hold.
    Assertion(String),
    Config(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Assertion(_) => 2,
            Self::Config(_) => 3,
            Self::Numerical(_) => 4,
            Self::Io(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Assertion(m) | Self::Config(m) | Self::Numerical(m) | Self::Io(m) => m,
        }
    }
}

impl From<scbf::Error> for Failure {
    fn from(e: scbf::Error) -> Self {
        use scbf::Error as E;
        match e {
            E::NumericalAbort { .. } | E::NoConvergence { .. } | E::Cfl { .. } => Self::Numerical(e.to_string()),
            E::Io(_) => Self::Io(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

fn load(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            RunConfig::parse(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if cli.print_defaults {
        print!("{}", RunConfig::default().to_toml());
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(Failure::Config("no subcommand given (try --help)".into()));
    };
    let cfg = load(cli)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    let ctx = commands::Context::new(command.name(), cfg, cli.threads)?;
    match command {
        Command::CheckInvariants => commands::check_invariants(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Pullback => commands::pullback(&ctx),
        Command::Upsemi => commands::upsemi(&ctx),
        Command::Measure => commands::measure(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            // usage errors share the config status; 2 is reserved for failed assertions
            return if usage { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("scbf: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
