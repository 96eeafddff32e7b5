use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use treeverify_cli::commands;

#[derive(Parser)]
#[command(name = "treeverify", version, about = "Anytime bounds and verification queries for tree ensembles")]
struct Cli {
    /// Worker threads for batches of generated tasks.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a task and write result.json and trace.csv.
    Run {
        task: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a task with both engines under the same budgets and write metrics.json.
    Compare {
        task: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate random box-constraint tasks hitting given reachable-leaf fractions.
    GenTasks {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        count: usize,
        /// Comma-separated target fractions, used round robin.
        #[arg(long, value_delimiter = ',', required = true)]
        fractions: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Run { task, out } => commands::cmd_run(task, out, cli.jobs),
        Command::Compare { task, out } => commands::cmd_compare(task, out),
        Command::GenTasks {
            model,
            count,
            fractions,
            seed,
            out,
        } => commands::cmd_gen_tasks(model, *count, fractions, *seed, out, cli.jobs),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
