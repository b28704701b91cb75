//! Library side of the `medeeg` command-line tool.
//!
//! The binary in `main.rs` is a thin argument-parsing shell; everything it
//! does lives here so that integration tests (and anyone embedding the
//! tool) can call the same code paths directly:
//!
//! * [`config`] — JSON config file + flag overlay → validated [`config::Settings`]
//! * [`eegb`] — the fixed-layout recording container
//! * [`manifest`] — the per-directory index with SHA-256 verification
//! * [`commands`] — `synth` / `run` / `sweep` as plain functions
//! * [`report`] — deterministic report.json / report.csv / sweep.csv rendering
//! * [`error`] — the validation-vs-runtime split behind exit codes 2 and 1

pub mod commands;
pub mod config;
pub mod eegb;
pub mod error;
pub mod manifest;
pub mod report;
