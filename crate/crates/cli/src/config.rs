//! Configuration: a JSON file, a set of flags, and the rules that merge
//! them into one validated [`Settings`] value.
//!
//! Precedence is flat and predictable: **flag beats file beats default**.
//! The file is optional; so is every field in it (unknown keys are
//! rejected, so typos fail loudly instead of silently falling back to a
//! default). The only thing that *must* be supplied somewhere is the seed
//! triple — runs are deterministic functions of their configuration, and
//! the tool never reaches for wall-clock entropy on your behalf.
//!
//! A maximal config file:
//!
//! ```json
//! {
//!   "pipeline": "csp-lda",
//!   "band": "alpha",
//!   "mode": "intra",
//!   "alpha": 0.1,
//!   "pairs": 10,
//!   "k_grid": [2, 4, 8, 16, 32, 64, 128],
//!   "seeds": { "cohort": 2026, "plan": 1, "train": 2 },
//!   "paths": { "data": "data/planted", "out": "reports/planted" },
//!   "notch_hz": 50.0,
//!   "synth": {
//!     "n_subjects": 12, "n_channels": 24, "sample_rate_hz": 128.0,
//!     "minutes_per_condition": 6.0, "n_sources": 5,
//!     "class_variance_ratio": 6.0, "subject_jitter": 0.1,
//!     "noise_power": 0.1
//!   },
//!   "sweep": { "pair_counts": [2, 6, 10], "alphas": [0.1, 0.001, 0.0] },
//!   "tuning": {
//!     "lstm": { "hidden": 64, "epochs": 40, "learning_rate": 0.01, "batch_size": 32 },
//!     "nn": { "epochs": 100, "learning_rate": 0.0004, "batch_size": 32, "patience": 10 }
//!   }
//! }
//! ```
//!
//! `synth` describes the cohort that `medeeg synth` writes (its band and
//! seed come from the top-level `band` and `seeds.cohort`). `sweep` narrows
//! or widens the grid that `medeeg sweep` evaluates; passing `--alpha` or
//! `--pairs` to the sweep command collapses the corresponding axis to that
//! single value, which is how you get a one-cell sweep. `tuning` adjusts
//! network training; it is not part of the evaluated hyperparameter grid.

use std::path::PathBuf;

use clap::Args;
use medeeg_core::lstm::LstmConfig;
use medeeg_core::svdnn::{NnConfig, DESIGN_WIDTH};
use medeeg_core::synth::SynthParams;
use medeeg_core::{BandName, CvMode, Hyperparams, ModelTuning, Pipeline, RunSeeds};
use serde::Deserialize;

use crate::error::CliError;

/// Regularization strength used when none is given: the middle of the
/// swept range, strong enough to matter and weak enough not to wash out
/// the covariance structure.
pub const DEFAULT_ALPHA: f64 = 1e-1;

/// Filter pairs used when none are given (20 log-variance features).
pub const DEFAULT_PAIRS: usize = 10;

/// Default singular-count candidates: powers of two up to one third of the
/// design width, which brackets the useful range on both planted and flat
/// spectra.
pub const DEFAULT_K_GRID: [usize; 7] = [2, 4, 8, 16, 32, 64, 128];

/// Default sweep rows: 2 through 10 filter pairs.
pub const DEFAULT_SWEEP_PAIRS: [usize; 9] = [2, 3, 4, 5, 6, 7, 8, 9, 10];

/// Default sweep columns: α from 1e-1 down to 1e-10, then unregularized.
pub fn default_sweep_alphas() -> Vec<f64> {
    let mut alphas: Vec<f64> = (1..=10).map(|e| 10f64.powi(-e)).collect();
    alphas.push(0.0);
    alphas
}

/// Flags shared by every subcommand. Each one overrides the matching
/// config-file field; see the module docs for the full file format.
#[derive(Args, Debug, Default)]
pub struct ConfigArgs {
    /// JSON config file; the flags below override its values
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Pipeline: csp-lda, csp-lda-lstm or svd-nn
    #[arg(long)]
    pub pipeline: Option<Pipeline>,

    /// Analysis band: alpha, beta, low-gamma or high-gamma
    #[arg(long)]
    pub band: Option<BandName>,

    /// Protocol: "intra" (10-fold within each subject) or "inter"
    /// (leave-one-subject-out; "loso" is accepted as a synonym)
    #[arg(long)]
    pub mode: Option<String>,

    /// Tikhonov regularization strength for the CSP pipelines (0 = classical)
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Number of CSP filter pairs
    #[arg(long)]
    pub pairs: Option<usize>,

    /// Comma-separated singular-count candidates for svd-nn, e.g. 2,4,8,16
    #[arg(long = "k-grid", value_name = "LIST")]
    pub k_grid: Option<String>,

    /// Seed for cohort synthesis
    #[arg(long = "seed-cohort", value_name = "N")]
    pub seed_cohort: Option<u64>,

    /// Seed for fold assignment
    #[arg(long = "seed-plan", value_name = "N")]
    pub seed_plan: Option<u64>,

    /// Seed for model training
    #[arg(long = "seed-train", value_name = "N")]
    pub seed_train: Option<u64>,

    /// Report directory (written by run and sweep)
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Data directory (written by synth, read by run and sweep)
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
}

/// The config file, everything optional. `deny_unknown_fields` turns key
/// typos into validation errors instead of silent defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    pipeline: Option<String>,
    band: Option<String>,
    mode: Option<String>,
    alpha: Option<f64>,
    pairs: Option<usize>,
    k_grid: Option<Vec<usize>>,
    seeds: Option<SeedsSection>,
    paths: Option<PathsSection>,
    notch_hz: Option<f64>,
    synth: Option<SynthSection>,
    sweep: Option<SweepSection>,
    tuning: Option<TuningSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeedsSection {
    cohort: Option<u64>,
    plan: Option<u64>,
    train: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathsSection {
    data: Option<PathBuf>,
    out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthSection {
    n_subjects: Option<usize>,
    n_channels: Option<usize>,
    sample_rate_hz: Option<f64>,
    minutes_per_condition: Option<f64>,
    n_sources: Option<usize>,
    class_variance_ratio: Option<f64>,
    subject_jitter: Option<f64>,
    noise_power: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    pair_counts: Option<Vec<usize>>,
    alphas: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TuningSection {
    lstm: Option<LstmSection>,
    nn: Option<NnSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LstmSection {
    hidden: Option<usize>,
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct NnSection {
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
    patience: Option<usize>,
}

/// Everything a command needs, fully resolved and validated.
#[derive(Debug, Clone)]
pub struct Settings {
    pub pipeline: Pipeline,
    pub band: BandName,
    pub mode: CvMode,
    pub hyper: Hyperparams,
    pub seeds: RunSeeds,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    /// Mains-hum notch applied before the bandpass when set; off by default
    /// (synthetic cohorts have no line interference to remove).
    pub notch_hz: Option<f64>,
    pub synth: SynthParams,
    pub sweep_alphas: Vec<f64>,
    pub sweep_pairs: Vec<usize>,
    pub tuning: ModelTuning,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn parse_mode(s: &str) -> Result<CvMode, CliError> {
    match s {
        "intra" => Ok(CvMode::IntraSubject10Fold),
        "inter" | "loso" => Ok(CvMode::LeaveOneSubjectOut),
        other => Err(invalid(format!(
            "unknown mode '{other}' (expected intra, inter or loso)"
        ))),
    }
}

fn parse_k_grid_flag(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| invalid(format!("--k-grid: '{tok}' is not a positive integer")))
        })
        .collect()
}

/// Merge file, flags and defaults into validated [`Settings`].
pub fn resolve(args: &ConfigArgs) -> Result<Settings, CliError> {
    let file: ConfigFile = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| invalid(format!("malformed config {}: {e}", path.display())))?
        }
        None => ConfigFile::default(),
    };

    let pipeline = match (&args.pipeline, &file.pipeline) {
        (Some(p), _) => *p,
        (None, Some(s)) => s.parse::<Pipeline>().map_err(invalid)?,
        (None, None) => Pipeline::CspLda,
    };
    let band = match (&args.band, &file.band) {
        (Some(b), _) => *b,
        (None, Some(s)) => s.parse::<BandName>().map_err(invalid)?,
        (None, None) => BandName::Alpha,
    };
    let mode = match (&args.mode, &file.mode) {
        (Some(s), _) => parse_mode(s)?,
        (None, Some(s)) => parse_mode(s)?,
        (None, None) => CvMode::IntraSubject10Fold,
    };

    let seeds_file = file.seeds.unwrap_or_default();
    let seed = |flag: Option<u64>, field: Option<u64>, name: &str, flag_name: &str| {
        flag.or(field).ok_or_else(|| {
            invalid(format!(
                "seeds are required: set seeds.{name} in the config or pass --{flag_name}"
            ))
        })
    };
    let seeds = RunSeeds {
        cohort: seed(args.seed_cohort, seeds_file.cohort, "cohort", "seed-cohort")?,
        plan: seed(args.seed_plan, seeds_file.plan, "plan", "seed-plan")?,
        train: seed(args.seed_train, seeds_file.train, "train", "seed-train")?,
    };

    let alpha = args.alpha.or(file.alpha).unwrap_or(DEFAULT_ALPHA);
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(invalid(format!("alpha must be finite and ≥ 0, got {alpha}")));
    }
    let pairs = args.pairs.or(file.pairs).unwrap_or(DEFAULT_PAIRS);
    if pairs == 0 {
        return Err(invalid("pairs must be at least 1"));
    }
    let k_grid = match (&args.k_grid, &file.k_grid) {
        (Some(s), _) => parse_k_grid_flag(s)?,
        (None, Some(v)) => v.clone(),
        (None, None) => DEFAULT_K_GRID.to_vec(),
    };
    if k_grid.is_empty() {
        return Err(invalid("k_grid must list at least one candidate"));
    }
    if let Some(&bad) = k_grid.iter().find(|&&k| k == 0 || k > DESIGN_WIDTH) {
        return Err(invalid(format!(
            "k_grid entries must lie in 1..={DESIGN_WIDTH}, got {bad}"
        )));
    }

    let hyper = match pipeline {
        Pipeline::CspLda => Hyperparams::CspLda { alpha, n_pairs: pairs },
        Pipeline::CspLdaLstm => Hyperparams::CspLdaLstm { alpha, n_pairs: pairs },
        Pipeline::SvdNn => Hyperparams::SvdNn { k_grid: k_grid.clone() },
    };

    let paths = file.paths.unwrap_or_default();
    let data_dir = args
        .data
        .clone()
        .or(paths.data)
        .unwrap_or_else(|| PathBuf::from("data"));
    let out_dir = args
        .out
        .clone()
        .or(paths.out)
        .unwrap_or_else(|| PathBuf::from("reports"));

    let synth_file = file.synth.unwrap_or_default();
    let base = SynthParams::default();
    let synth = SynthParams {
        n_subjects: synth_file.n_subjects.unwrap_or(base.n_subjects),
        n_channels: synth_file.n_channels.unwrap_or(base.n_channels),
        sample_rate_hz: synth_file.sample_rate_hz.unwrap_or(base.sample_rate_hz),
        minutes_per_condition: synth_file
            .minutes_per_condition
            .unwrap_or(base.minutes_per_condition),
        n_sources: synth_file.n_sources.unwrap_or(base.n_sources),
        class_variance_ratio: synth_file
            .class_variance_ratio
            .unwrap_or(base.class_variance_ratio),
        subject_jitter: synth_file.subject_jitter.unwrap_or(base.subject_jitter),
        noise_power: synth_file.noise_power.unwrap_or(base.noise_power),
        band: band.definition(),
        seed: seeds.cohort,
    };

    if let Some(f0) = file.notch_hz {
        if !f0.is_finite() || f0 <= 0.0 {
            return Err(invalid(format!("notch_hz must be a positive frequency, got {f0}")));
        }
    }

    // A single --alpha or --pairs collapses the sweep grid on that axis.
    let sweep_section = file.sweep.unwrap_or_default();
    let sweep_alphas = match args.alpha {
        Some(a) => vec![a],
        None => sweep_section.alphas.unwrap_or_else(default_sweep_alphas),
    };
    let sweep_pairs = match args.pairs {
        Some(p) => vec![p],
        None => sweep_section
            .pair_counts
            .unwrap_or_else(|| DEFAULT_SWEEP_PAIRS.to_vec()),
    };
    if sweep_alphas.is_empty() || sweep_pairs.is_empty() {
        return Err(invalid("sweep grid must have at least one α and one pair count"));
    }
    if let Some(&bad) = sweep_pairs.iter().find(|&&p| p == 0) {
        return Err(invalid(format!("sweep pair counts must be ≥ 1, got {bad}")));
    }
    if let Some(&bad) = sweep_alphas.iter().find(|&&a| !a.is_finite() || a < 0.0) {
        return Err(invalid(format!("sweep alphas must be finite and ≥ 0, got {bad}")));
    }

    let tuning_file = file.tuning.unwrap_or_default();
    let lstm_file = tuning_file.lstm.unwrap_or_default();
    let nn_file = tuning_file.nn.unwrap_or_default();
    let base = ModelTuning::default();
    let tuning = ModelTuning {
        lstm: LstmConfig {
            hidden: lstm_file.hidden.unwrap_or(base.lstm.hidden),
            epochs: lstm_file.epochs.unwrap_or(base.lstm.epochs),
            learning_rate: lstm_file.learning_rate.unwrap_or(base.lstm.learning_rate),
            batch_size: lstm_file.batch_size.unwrap_or(base.lstm.batch_size),
            ..base.lstm
        },
        nn: NnConfig {
            epochs: nn_file.epochs.unwrap_or(base.nn.epochs),
            learning_rate: nn_file.learning_rate.unwrap_or(base.nn.learning_rate),
            batch_size: nn_file.batch_size.unwrap_or(base.nn.batch_size),
            patience: nn_file.patience.unwrap_or(base.nn.patience),
            ..base.nn
        },
    };

    Ok(Settings {
        pipeline,
        band,
        mode,
        hyper,
        seeds,
        data_dir,
        out_dir,
        notch_hz: file.notch_hz,
        synth,
        sweep_alphas,
        sweep_pairs,
        tuning,
    })
}
