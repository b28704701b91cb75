//! `medeeg` — command-line driver for the meditation-vs-rest EEG toolkit.
//!
//! Three subcommands cover the full workflow:
//!
//! * `medeeg synth`  — generate a synthetic cohort as EEGB files + manifest
//! * `medeeg run`    — one cross-validated experiment → report.json/.csv
//! * `medeeg sweep`  — filter-pairs × regularization grid → sweep.csv
//!
//! All three read the same configuration (JSON file and/or flags; see
//! [`config`]) and are deterministic: identical configs and input files
//! produce byte-identical outputs, down to report.json. Exit codes are
//! 0 = success, 2 = invalid input (flags, config, manifest, unsuitable
//! data), 1 = failure while computing or writing ([`error`]).
//!
//! A typical session:
//!
//! ```text
//! medeeg synth --data data/planted --seed-cohort 7 --seed-plan 1 --seed-train 2
//! medeeg run   --data data/planted --out reports/intra \
//!              --pipeline csp-lda --band alpha --mode intra \
//!              --alpha 0.1 --pairs 10 \
//!              --seed-cohort 7 --seed-plan 1 --seed-train 2
//! medeeg sweep --data data/planted --out reports/sweep \
//!              --seed-cohort 7 --seed-plan 1 --seed-train 2
//! ```

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use medeeg_cli::{commands, config, error};

#[derive(Parser)]
#[command(
    name = "medeeg",
    version,
    about = "EEG meditation-vs-rest classification: synthetic cohorts, experiments, grid sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort into the data directory
    Synth(config::ConfigArgs),
    /// Run one cross-validated experiment and write report.json/report.csv
    Run(config::ConfigArgs),
    /// Sweep filter pairs × regularization (CSP-LDA) and write sweep.csv
    Sweep(config::ConfigArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, cmd): (_, fn(&config::Settings) -> Result<(), error::CliError>) =
        match &cli.command {
            Command::Synth(a) => (a, commands::cmd_synth as _),
            Command::Run(a) => (a, commands::cmd_run as _),
            Command::Sweep(a) => (a, commands::cmd_sweep as _),
        };
    match config::resolve(args).and_then(|settings| cmd(&settings)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
