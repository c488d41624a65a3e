use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bilevel_ptp_cli::{batch, run, CliError, RunOptions, DEFAULT_OUT_DIR, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "bptp", version, about = "Bilevel profitable tour experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve, verify or compare one instance.
    Run {
        /// `key=value` file with defaults for the flags below.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        options: RunOptions,
    },
    /// Run every config matching a glob and write an aggregate table.
    Batch {
        /// Glob of `key=value` config files.
        pattern: String,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn env_out() -> Option<PathBuf> {
    std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, options } => {
            let base = match &config {
                Some(path) => RunOptions::from_file(path)?,
                None => RunOptions::default(),
            };
            let out_from_flag = options.out.is_some();
            let cfg = base.overridden_by(options).resolve(env_out(), out_from_flag)?;
            let outcome = run(&cfg)?;
            println!("{}", outcome.message);
        }
        Command::Batch { pattern, out } => {
            let dir = out.or_else(env_out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
            let summary = batch(&pattern, &dir)?;
            println!(
                "{} rows, {} failed configs -> {}",
                summary.rows.len(),
                summary.failures(),
                summary.csv.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bptp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
