use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nehari_cli::{execute, load_config, Status, Task};

#[derive(Parser)]
#[command(
    name = "nehari",
    version,
    about = "Ground states of fractional Schrödinger equations on a periodic box"
)]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, env = "NEHARI_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the energy on the Nehari manifold.
    Solve(RunArgs),
    /// Check the Hardy, norm-equivalence and epsilon inequalities on a random corpus.
    Validate(RunArgs),
    /// Compare the ground-state level with that of the periodic part.
    Dichotomy(RunArgs),
    /// Evolve a ground state in time.
    Evolve(RunArgs),
    /// Check energy splitting of a separated two-profile bundle.
    Decompose(RunArgs),
    /// Solve for each value of one problem parameter.
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.directory`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides `solver.seed`).
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, args) = match cli.command {
        Command::Solve(a) => (Task::Solve, a),
        Command::Validate(a) => (Task::Validate, a),
        Command::Dichotomy(a) => (Task::Dichotomy, a),
        Command::Evolve(a) => (Task::Evolve, a),
        Command::Decompose(a) => (Task::Decompose, a),
        Command::Sweep(a) => (Task::Sweep, a),
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let mut cfg = match load_config(&args.config, task) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(1);
        }
    };
    if let Some(out) = args.out {
        cfg.output.directory = out;
    }
    if let Some(seed) = args.seed {
        cfg.solver.seed = seed;
    }
    match execute(task, &cfg) {
        Ok(Status::Success) => ExitCode::SUCCESS,
        Ok(Status::Inconclusive(msg)) => {
            eprintln!("inconclusive: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
