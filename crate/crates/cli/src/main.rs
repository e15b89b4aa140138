use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ergolab::error::CliError;
use ergolab::output::Summary;
use ergolab::{list_json, list_text, run_file, RunOptions};

#[derive(Parser)]
#[command(name = "ergolab", version, about = "Lyapunov drift and ergodicity experiments for 1D diffusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment or suite config.
    Run {
        config: PathBuf,
        /// Output directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for every run, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long, env = "ERGOLAB_THREADS")]
        threads: Option<usize>,
    },
    /// List experiment tags.
    List {
        #[arg(long)]
        json: bool,
    },
}

fn report(s: &Summary) {
    let ok = s.checks.iter().filter(|c| c.passed).count();
    eprintln!("[{}] {} ({}): {}/{} checks passed", s.verdict, s.name, s.experiment, ok, s.checks.len());
    for c in s.checks.iter().filter(|c| !c.passed) {
        eprintln!("  FAILED {}: {}", c.name, c.detail);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List { json } => {
            if json {
                println!("{}", list_json());
            } else {
                print!("{}", list_text());
            }
            ExitCode::SUCCESS
        }
        Command::Run { config, out, seed, threads } => {
            if let Some(t) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
                    eprintln!("error: cannot set up {t} worker threads: {e}");
                    return ExitCode::from(2);
                }
            }
            let opts = RunOptions { out, seed };
            match run_file(&config, &opts, &mut report) {
                Ok(r) => {
                    println!("{}", r.out_dir.display());
                    if r.passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    exit(&e)
                }
            }
        }
    }
}

fn exit(e: &CliError) -> ExitCode {
    ExitCode::from(e.exit_code() as u8)
}
