use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod bench;
mod check;
mod generate;
mod learn;

#[derive(Parser)]
#[command(name = "hamlearn", version, about = "Sparse Pauli Hamiltonian learning with reshaped dynamics")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a random Hamiltonian instance as JSON.
    Generate(generate::Args),
    /// Learn the coefficients of a Hamiltonian file and write a report.
    Learn(learn::Args),
    /// Run a sweep of learning runs and write one CSV row per run.
    Bench(bench::Args),
    /// Check error-metric inequalities and reshaping bounds on dense simulations.
    Check(check::Args),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match cli.cmd {
        Cmd::Generate(a) => generate::run(a).map(|_| 0),
        Cmd::Learn(a) => learn::run(a),
        Cmd::Bench(a) => bench::run(a).map(|_| 0),
        Cmd::Check(a) => check::run(a),
    };
    match out {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Writes `text` to `path`, or stdout for `-`.
pub(crate) fn write_output(path: &str, text: &str) -> anyhow::Result<()> {
    if path == "-" {
        print!("{text}");
        Ok(())
    } else {
        std::fs::write(path, text).map_err(|e| anyhow::anyhow!("writing {path}: {e}"))
    }
}
