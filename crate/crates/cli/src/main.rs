use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use decoupling_lab::config::{read_options, ConfigError, SEED_ENV};
use decoupling_lab::{execute, resolve, Command, Options};

#[derive(Parser)]
#[command(name = "decoupling-lab", version, about = "Decoupling inequality verification lab")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Run {
    /// JSON config; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    opts: Options,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run inequality suites over randomized models.
    Verify(Run),
    /// Adversarial search for decoupling constants.
    Estimate(Run),
    /// Evaluate a closed-form constant.
    Bounds(Run),
    /// Stochastic-integral moment experiments.
    Bdg(Run),
    /// CSV sweep over a space × p grid.
    Atlas(Run),
}

fn main() -> ExitCode {
    let (command, run) = match Cli::parse().command {
        Cmd::Verify(r) => (Command::Verify, r),
        Cmd::Estimate(r) => (Command::Estimate, r),
        Cmd::Bounds(r) => (Command::Bounds, r),
        Cmd::Bdg(r) => (Command::Bdg, r),
        Cmd::Atlas(r) => (Command::Atlas, r),
    };
    let cfg = (|| -> Result<_, ConfigError> {
        let file = match &run.config {
            Some(path) => read_options(path)?,
            None => Options::default(),
        };
        let env = std::env::var(SEED_ENV).ok();
        resolve(command, run.opts.over(file), env.as_deref())
    })();
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let out = match execute(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    match &cfg.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &out.body) {
                eprintln!("error: {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{}", out.body),
    }
    if out.violation {
        eprintln!("exact-mode inequality violation");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
