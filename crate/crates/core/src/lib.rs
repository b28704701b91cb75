//! Core algorithms for classifying meditation vs. rest EEG recordings.
//!
//! The crate covers the full experimental path: zero-phase IIR band filtering
//! ([`dsp`]), Jacobi-based eigensolvers and SVD ([`numerics`]), common spatial
//! patterns with Tikhonov regularization ([`csp`]), Fisher discriminant
//! classification ([`lda`]), an LSTM over per-sub-epoch discriminant scores
//! ([`lstm`]), an SVD-subspace feature extractor with a small feed-forward
//! network ([`svdnn`]), cross-validation protocols and reports ([`cv`]), and a
//! synthetic cohort generator for end-to-end validation ([`synth`]).
//!
//! All randomness is drawn from explicitly seeded ChaCha streams; every
//! training routine and solver is deterministic given its inputs and seeds.

pub mod adam;
pub mod csp;
pub mod cv;
pub mod dsp;
pub mod lda;
pub mod lstm;
pub mod numerics;
pub mod seeds;
pub mod svdnn;
pub mod synth;
pub mod types;

pub use csp::{class_covariance, fit_csp, log_variance_features, ClassCovariance, CspError, SpatialFilterBank};
pub use cv::{
    carve_validation, grid_sweep, plan_experiment, plan_intra, plan_loso, run_experiment,
    CvError, CvMode, CvReport, ExperimentPlan, FoldPlan, Hyperparams, ModelTuning, Pipeline,
    RunSeeds, SweepTable,
};
pub use lda::{fit_lda, LdaError, LdaModel};
pub use numerics::{gen_sym_eig, svd, sym_eig, EigenResult, NumericsError, SvdResult};
pub use types::{
    band_definitions, slice_epochs, BandDef, BandName, CohortDataset, Condition, CoreError, Epoch,
    EpochSet, Recording, SubjectRecordings,
};
