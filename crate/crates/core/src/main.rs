use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use trisolve::cli::{load_config, run, Command};

#[derive(Parser)]
#[command(name = "trisolve", version, about = "Multiple solutions of discrete semilinear Dirichlet problems")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// key = value configuration file
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output.dir` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Sub {
    /// First Dirichlet eigenpair.
    Eigen(Common),
    /// Admissible λ-interval and the sign condition on f and g.
    Check(Common),
    /// Multistart on the main problem with fixed α coefficients.
    Solve(Common),
    /// Multistart on the auxiliary problem.
    Alternative(Common),
    /// Full pipeline: alternative, α-search, minima and diagnostics.
    Explore(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Eigen(c) => (Command::Eigen, c),
        Sub::Check(c) => (Command::Check, c),
        Sub::Solve(c) => (Command::Solve, c),
        Sub::Alternative(c) => (Command::Alternative, c),
        Sub::Explore(c) => (Command::Explore, c),
    };

    if let Some(threads) = std::env::var("TRISOLVE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if threads > 0 {
            // only fails if a global pool already exists
            let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        }
    }

    let result = load_config(&common.config).and_then(|mut cfg| {
        if let Some(seed) = common.seed {
            cfg = cfg.with_seed(seed);
        }
        if let Some(out) = common.out {
            cfg = cfg.with_output_dir(std::path::absolute(out)?);
        }
        run(command, &cfg)
    });
    match result {
        Ok(outcome) => {
            println!("{}: {}", command.name(), outcome.summary);
            println!("report: {}", outcome.report.display());
            if outcome.exit_code != 0 {
                eprintln!("exit status {}", outcome.exit_code);
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
