//! Exit-code discipline.
//!
//! Every failure surfaces as one of two kinds, mirrored directly onto the
//! process exit code so scripts can distinguish "your inputs are wrong"
//! from "the computation fell over":
//!
//! * **Validation** (exit 2) — bad flags, unreadable or malformed config,
//!   manifest problems, hash mismatches, cohorts too small for the chosen
//!   protocol. Nothing has been written when these are raised.
//! * **Runtime** (exit 1) — failures after validation: numerical
//!   breakdown inside a fold, or i/o errors while writing reports.
//!
//! Exit 0 means the command ran and its outputs are complete.

use medeeg_core::CvError;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(msg) | CliError::Runtime(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<crate::manifest::ManifestError> for CliError {
    /// Everything the manifest loader can report is an input problem.
    fn from(e: crate::manifest::ManifestError) -> Self {
        CliError::Validation(e.to_string())
    }
}

/// Split cross-validation failures by phase: shortage of data or an
/// inconsistent plan is the caller's input, anything past that point is a
/// runtime failure.
pub fn classify_cv(e: CvError) -> CliError {
    match e {
        CvError::TooFewEpochs { .. }
        | CvError::TooFewSubjects(_)
        | CvError::InvalidPlan(_)
        | CvError::EmptyGrid => CliError::Validation(e.to_string()),
        other => CliError::Runtime(other.to_string()),
    }
}
