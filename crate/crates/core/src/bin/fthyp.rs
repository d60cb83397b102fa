use clap::{Parser, Subcommand};
use fthyp::cli::{error_exit_code, run, Command, RunOptions};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fthyp", version, about = "Finite-time hyperbolicity experiments on surface maps")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON run config; defaults to the cat map with default parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`; default `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed (overrides `seed` in the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Lyapunov exponents along an orbit.
    Lyapunov,
    /// Stable/unstable split of a matrix or of D_xTⁿ.
    Split,
    /// Finite-time stable and unstable fields on a grid.
    Fields,
    /// Finite-time stable/unstable manifold polylines.
    Manifold,
    /// Admissible chart with predicate and regularity checks.
    Rect,
    /// Bowen-ball entropy estimators.
    Entropy,
    /// Cover of a Bowen ball by admissible charts.
    Cover,
    /// Numerical checks of the supporting lemmas.
    VerifyLemmas,
    /// Entropy and Lyapunov headline report.
    Report,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Lyapunov => Command::Lyapunov,
            Cmd::Split => Command::Split,
            Cmd::Fields => Command::Fields,
            Cmd::Manifold => Command::Manifold,
            Cmd::Rect => Command::Rect,
            Cmd::Entropy => Command::Entropy,
            Cmd::Cover => Command::Cover,
            Cmd::VerifyLemmas => Command::VerifyLemmas,
            Cmd::Report => Command::Report,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let opts = RunOptions { config: cli.config, out: cli.out, seed: cli.seed, quiet: cli.quiet };
    match run(cli.command.into(), &opts) {
        Ok(outcome) => {
            if !opts.quiet {
                for f in &outcome.files {
                    println!("{}", f.display());
                }
                println!("violations: {}", outcome.report.violations);
                println!("content_hash: {}", outcome.report.content_hash);
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("fthyp: {e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}
