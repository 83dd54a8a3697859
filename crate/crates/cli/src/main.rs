mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;

/// Relaxation and collision experiments for two-field domain walls.
#[derive(Debug, Parser)]
#[command(name = "kinklab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Relax static kink profiles and report their energies.
    Relax(RunArgs),
    /// Run one kink-antikink collision and classify the outcome.
    Collide(RunArgs),
    /// Run symmetric collisions over a list or range of velocities.
    Scan {
        #[command(flatten)]
        run: RunArgs,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Re-classify a stored collision run and regenerate its heatmap.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// key=value configuration file; defaults are used for missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long)]
    pub out: PathBuf,
    /// Override a configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Override the relaxation RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Directory written by `collide`.
    pub dir: PathBuf,
    /// Output directory (default: <dir>/analysis).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override a configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub force: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Relax(a) => commands::relax(&a),
        Command::Collide(a) => commands::collide(&a),
        Command::Scan { run, workers } => commands::scan(&run, workers),
        Command::Analyze(a) => commands::analyze(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use kinklab::evolve::EvolveError;
        use kinklab::static_solver::RelaxError;
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Evolve(EvolveError::NumericalFailure { .. }) => 3,
            CliError::Evolve(_) => 2,
            CliError::Relax(RelaxError::NotConverged { .. }) => 4,
            CliError::Relax(RelaxError::Diverged { .. }) => 3,
            CliError::Relax(_) => 2,
            CliError::Io { .. } | CliError::Parse { .. } | CliError::NotEmpty(_) | CliError::Missing(_) => 1,
        }
    }
}
