use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use goafem_cli::{cmd_figures, cmd_run, cmd_verify, summary_table, CliError};

#[derive(Parser)]
#[command(name = "goafem", version, about = "Goal-oriented adaptive finite elements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Number of runs executed concurrently (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Directory for CSV output.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Overrides θ for every run.
    #[arg(long, global = true)]
    theta: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments of a config file.
    Run { config: PathBuf },
    /// Produce the CSV bundle of a figure (fig2 or fig3).
    Figures {
        which: String,
        /// Stop each run once the cumulative DOF count reaches this value.
        #[arg(long, default_value_t = 100_000)]
        max_dofs: usize,
    },
    /// Run a verification suite (mesh, axioms, marking, goal or all).
    Verify {
        suite: String,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors are configuration errors; help and version are not errors.
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    if cli.jobs == Some(0) {
        eprintln!("error: --jobs must be at least 1");
        return ExitCode::from(3);
    }
    let result = match &cli.command {
        Command::Run { config } => cmd_run(config, &cli.out, cli.jobs, cli.theta).map(|r| print!("{}", summary_table(&r))),
        Command::Figures { which, max_dofs } => {
            cmd_figures(which, &cli.out, cli.jobs, cli.theta, *max_dofs).map(|r| print!("{}", summary_table(&r)))
        }
        Command::Verify { suite, seed } => cmd_verify(suite, *seed).and_then(|reports| {
            for r in &reports {
                print!("{r}");
            }
            let failed: Vec<_> = reports.iter().filter(|r| !r.passed()).map(|r| r.suite.as_str()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Numerical(format!("failed suites: {}", failed.join(", "))))
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
