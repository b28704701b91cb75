//! Cross-validation harnesses for the three pipelines.
//!
//! Two protocols are provided. *Intra-subject* runs a stratified 10-fold
//! cross-validation inside each subject's own recordings and pools the fold
//! accuracies across subjects. *Leave-one-subject-out* (LOSO) holds out one
//! subject per fold and trains on everyone else, which probes whether spatial
//! patterns transfer across head geometries.
//!
//! Every component with fitted state — CSP filter banks, LDA discriminants,
//! singular bases, networks — is fitted inside the fold's training split and
//! nowhere else. An explicit audit compares the lineage ids of training and
//! test epochs on every fold and refuses to produce a report when they
//! overlap; derived data (sub-epochs, design-matrix rows) inherits its parent
//! epoch's lineage, so the check covers those too.
//!
//! Randomness is budgeted through [`RunSeeds`]: fold assignment draws on the
//! plan seed, model initialization and shuffling on per-fold seeds derived
//! from the train seed and the fold's position. Nothing depends on thread
//! scheduling — folds run in parallel and are merged in fold order — so a
//! report is a pure function of (cohort, hyperparameters, plan, seeds).

use crate::csp::{self, ClassCovariance, CspError, SpatialFilterBank};
use crate::lda::{self, LdaError};
use crate::lstm::{self, LstmConfig, LstmError};
use crate::seeds::derive_seed;
use crate::svdnn::{self, NnConfig, SvdNnError};
use crate::types::{BandDef, CohortDataset, Condition, CoreError, Epoch, EpochSet};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

/// Number of folds in the intra-subject protocol.
pub const INTRA_FOLDS: usize = 10;

/// Minimum epochs per class for stratified planning and validation carving.
pub const MIN_EPOCHS_PER_CLASS: usize = 10;

/// Fraction of a training fold carved off as the validation set.
pub const VALIDATION_FRACTION: f64 = 0.10;

#[derive(Debug, Error)]
pub enum CvError {
    #[error(
        "{condition:?} has only {available} epochs of length {epoch_len}; \
         stratified folding needs at least {required} per class"
    )]
    TooFewEpochs {
        condition: Condition,
        available: usize,
        required: usize,
        epoch_len: usize,
    },
    #[error("leave-one-subject-out needs at least 2 subjects, got {0}")]
    TooFewSubjects(usize),
    #[error("fold plan does not fit the data: {0}")]
    InvalidPlan(String),
    #[error("leakage audit failed on fold {fold}: {detail}")]
    Leakage { fold: String, detail: String },
    #[error("hyperparameter grid must be non-empty")]
    EmptyGrid,
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Csp(#[from] CspError),
    #[error(transparent)]
    Lda(#[from] LdaError),
    #[error(transparent)]
    Lstm(#[from] LstmError),
    #[error(transparent)]
    SvdNn(#[from] SvdNnError),
}

/// The three classification architectures the harness can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    CspLda,
    CspLdaLstm,
    SvdNn,
}

impl Pipeline {
    /// Epoch length (in samples at 128 Hz) each pipeline ingests: 2 s
    /// windows for the CSP front ends, 1 s windows for the design matrix.
    pub fn epoch_len(self) -> usize {
        match self {
            Pipeline::CspLda | Pipeline::CspLdaLstm => 256,
            Pipeline::SvdNn => 128,
        }
    }
}

impl std::fmt::Display for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Pipeline::CspLda => "csp-lda",
            Pipeline::CspLdaLstm => "csp-lda-lstm",
            Pipeline::SvdNn => "svd-nn",
        })
    }
}

impl std::str::FromStr for Pipeline {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csp-lda" => Ok(Pipeline::CspLda),
            "csp-lda-lstm" => Ok(Pipeline::CspLdaLstm),
            "svd-nn" => Ok(Pipeline::SvdNn),
            other => Err(format!(
                "unknown pipeline '{other}' (expected csp-lda, csp-lda-lstm or svd-nn)"
            )),
        }
    }
}

/// Cross-validation protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CvMode {
    #[serde(rename = "intra")]
    IntraSubject10Fold,
    #[serde(rename = "loso")]
    LeaveOneSubjectOut,
}

impl std::fmt::Display for CvMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CvMode::IntraSubject10Fold => "intra",
            CvMode::LeaveOneSubjectOut => "loso",
        })
    }
}

impl std::str::FromStr for CvMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "intra" => Ok(CvMode::IntraSubject10Fold),
            "loso" => Ok(CvMode::LeaveOneSubjectOut),
            other => Err(format!("unknown mode '{other}' (expected intra or loso)")),
        }
    }
}

/// Pipeline-specific hyperparameters; the variant implies the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pipeline", rename_all = "kebab-case")]
pub enum Hyperparams {
    CspLda { alpha: f64, n_pairs: usize },
    CspLdaLstm { alpha: f64, n_pairs: usize },
    SvdNn { k_grid: Vec<usize> },
}

impl Hyperparams {
    pub fn pipeline(&self) -> Pipeline {
        match self {
            Hyperparams::CspLda { .. } => Pipeline::CspLda,
            Hyperparams::CspLdaLstm { .. } => Pipeline::CspLdaLstm,
            Hyperparams::SvdNn { .. } => Pipeline::SvdNn,
        }
    }
}

/// Training-time knobs that are not part of the evaluated hyperparameter
/// grid: network sizes, epoch counts, learning rates. The `seed` fields
/// inside are ignored — the harness derives one seed per fold.
#[derive(Debug, Clone, Default)]
pub struct ModelTuning {
    pub lstm: LstmConfig,
    pub nn: NnConfig,
}

/// The random-number budget of one experiment, kept separate so that fold
/// assignment, model training, and cohort synthesis can be varied (or held
/// fixed) independently. `cohort` is carried for the record only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub cohort: u64,
    pub plan: u64,
    pub train: u64,
}

/// Fold assignment for one cross-validation group.
///
/// `folds[f]` lists the indices tested in fold `f`; everything else is that
/// fold's training split. For the intra-subject mode the indices address one
/// subject's epoch set; for LOSO they address subjects in cohort order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub mode: CvMode,
    pub seed: u64,
    pub folds: Vec<Vec<usize>>,
}

/// A full experiment's worth of fold plans, tied to the epoch length it was
/// stratified over (plans are only valid for pipelines with the same window).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub epoch_len: usize,
    pub mode: CvMode,
    /// One plan per subject in intra mode; a single LOSO plan otherwise.
    pub plans: Vec<FoldPlan>,
}

/// Which singular count the first round picked for one cross-validation
/// group (a subject in intra mode, the whole cohort in LOSO).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KSelection {
    pub group: String,
    pub selected_k: usize,
}

/// Outcome of one cross-validated experiment. Accuracies are percentages;
/// `sd_accuracy_pct` is the population standard deviation over folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub pipeline: Pipeline,
    pub mode: CvMode,
    pub band: BandDef,
    pub hyperparams: Hyperparams,
    pub seeds: RunSeeds,
    pub fold_ids: Vec<String>,
    pub per_fold_accuracy_pct: Vec<f64>,
    pub mean_accuracy_pct: f64,
    pub sd_accuracy_pct: f64,
    /// Filled by the SVD pipeline: the frozen singular count per group.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected_k: Option<Vec<KSelection>>,
    /// Always true in a produced report — a failed audit aborts the run —
    /// and kept in the output as an explicit record that the check ran.
    pub leakage_audit_passed: bool,
}

/// Grid-sweep output in the appendix layout: rows are filter-pair counts,
/// columns are regularization strengths, `cells` is row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub pair_counts: Vec<usize>,
    pub alphas: Vec<f64>,
    pub cells: Vec<CvReport>,
}

impl SweepTable {
    pub fn cell(&self, pair_idx: usize, alpha_idx: usize) -> &CvReport {
        &self.cells[pair_idx * self.alphas.len() + alpha_idx]
    }
}

/// Stratified 10-fold assignment over one subject's epochs.
///
/// Each class is shuffled independently and dealt round-robin — rest epochs
/// ascending over folds, meditation epochs descending — so both the per-fold
/// class counts and the per-fold totals stay within one epoch of even.
pub fn plan_intra(subject: &EpochSet, seed: u64) -> Result<FoldPlan, CvError> {
    let (rest, med) = subject.class_counts();
    for (condition, available) in [(Condition::Rest, rest), (Condition::Meditation, med)] {
        if available < MIN_EPOCHS_PER_CLASS {
            return Err(CvError::TooFewEpochs {
                condition,
                available,
                required: MIN_EPOCHS_PER_CLASS,
                epoch_len: subject.epoch_len(),
            });
        }
    }

    let mut rest_idx = Vec::with_capacity(rest);
    let mut med_idx = Vec::with_capacity(med);
    for (i, epoch) in subject.epochs().iter().enumerate() {
        match epoch.label {
            Condition::Rest => rest_idx.push(i),
            Condition::Meditation => med_idx.push(i),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rest_idx.shuffle(&mut rng);
    med_idx.shuffle(&mut rng);

    let mut folds = vec![Vec::new(); INTRA_FOLDS];
    for (i, idx) in rest_idx.into_iter().enumerate() {
        folds[i % INTRA_FOLDS].push(idx);
    }
    for (i, idx) in med_idx.into_iter().enumerate() {
        folds[INTRA_FOLDS - 1 - (i % INTRA_FOLDS)].push(idx);
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(FoldPlan {
        mode: CvMode::IntraSubject10Fold,
        seed,
        folds,
    })
}

/// One fold per subject: fold `f` tests subject `f` and trains on the rest.
pub fn plan_loso(cohort: &CohortDataset) -> Result<FoldPlan, CvError> {
    let n = cohort.n_subjects();
    if n < 2 {
        return Err(CvError::TooFewSubjects(n));
    }
    Ok(FoldPlan {
        mode: CvMode::LeaveOneSubjectOut,
        seed: 0,
        folds: (0..n).map(|s| vec![s]).collect(),
    })
}

/// Build the full plan for an experiment: per-subject stratified folds in
/// intra mode (each subject's assignment drawn from its own derived seed),
/// or the deterministic LOSO rotation.
pub fn plan_experiment(
    cohort: &CohortDataset,
    pipeline: Pipeline,
    mode: CvMode,
    seed: u64,
) -> Result<ExperimentPlan, CvError> {
    let epoch_len = pipeline.epoch_len();
    let plans = match mode {
        CvMode::IntraSubject10Fold => (0..cohort.n_subjects())
            .map(|s| {
                let set = cohort.epoch_set(s, epoch_len)?;
                plan_intra(&set, derive_seed(seed, s as u64))
            })
            .collect::<Result<Vec<_>, CvError>>()?,
        CvMode::LeaveOneSubjectOut => vec![plan_loso(cohort)?],
    };
    Ok(ExperimentPlan {
        epoch_len,
        mode,
        plans,
    })
}

/// Stratified split of a training fold into a reduced training part and a
/// validation part (`fraction` of each class, rounded to nearest). `labels`
/// runs parallel to `train_fold`. Both outputs preserve ascending order.
pub fn carve_validation(
    train_fold: &[usize],
    labels: &[u8],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), CvError> {
    assert_eq!(
        train_fold.len(),
        labels.len(),
        "one label per training index"
    );
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (&idx, &label) in train_fold.iter().zip(labels) {
        by_class[usize::from(label)].push(idx);
    }
    for (class, members) in by_class.iter().enumerate() {
        if members.len() < MIN_EPOCHS_PER_CLASS {
            return Err(CvError::TooFewEpochs {
                condition: Condition::from_label(class as u8).unwrap(),
                available: members.len(),
                required: MIN_EPOCHS_PER_CLASS,
                epoch_len: 0,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for members in &mut by_class {
        members.shuffle(&mut rng);
        let n_val = (fraction * members.len() as f64).round() as usize;
        val.extend(members.iter().take(n_val).copied());
        train.extend(members.iter().skip(n_val).copied());
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

// ---------------------------------------------------------------------------
// Fold enumeration and auditing
// ---------------------------------------------------------------------------

/// One unit of evaluation work: which epochs to train on and which to test,
/// as (subject, epoch) addresses into the per-subject epoch sets.
struct FoldTask {
    /// "s03/f07" in intra mode, the held-out subject id in LOSO.
    id: String,
    /// Position in the experiment; seeds derive from this, so results do not
    /// depend on execution order.
    counter: u64,
    train: Vec<(usize, usize)>,
    test: Vec<(usize, usize)>,
    /// Index of the group this fold belongs to (subject in intra, 0 in
    /// LOSO); the frozen singular count is shared group-wide.
    group: usize,
}

/// Validate a plan against the actual epoch sets and flatten it into fold
/// tasks. Checks that the folds of every group partition its index space.
fn enumerate_folds(
    cohort: &CohortDataset,
    sets: &[EpochSet],
    plan: &ExperimentPlan,
) -> Result<Vec<FoldTask>, CvError> {
    let mut tasks = Vec::new();
    match plan.mode {
        CvMode::IntraSubject10Fold => {
            if plan.plans.len() != sets.len() {
                return Err(CvError::InvalidPlan(format!(
                    "{} fold plans for {} subjects",
                    plan.plans.len(),
                    sets.len()
                )));
            }
            for (s, (set, fold_plan)) in sets.iter().zip(&plan.plans).enumerate() {
                check_partition(&fold_plan.folds, set.len(), &format!("subject {s}"))?;
                let subject_id = &cohort.subjects()[s].subject_id;
                for (f, test_idx) in fold_plan.folds.iter().enumerate() {
                    let test_set: HashSet<usize> = test_idx.iter().copied().collect();
                    let train = (0..set.len())
                        .filter(|i| !test_set.contains(i))
                        .map(|i| (s, i))
                        .collect();
                    tasks.push(FoldTask {
                        id: format!("{subject_id}/f{f:02}"),
                        counter: tasks.len() as u64,
                        train,
                        test: test_idx.iter().map(|&i| (s, i)).collect(),
                        group: s,
                    });
                }
            }
        }
        CvMode::LeaveOneSubjectOut => {
            let fold_plan = plan
                .plans
                .first()
                .ok_or_else(|| CvError::InvalidPlan("no LOSO fold plan".into()))?;
            check_partition(&fold_plan.folds, sets.len(), "cohort")?;
            for (f, held_out) in fold_plan.folds.iter().enumerate() {
                let held: HashSet<usize> = held_out.iter().copied().collect();
                let mut train = Vec::new();
                let mut test = Vec::new();
                for (s, set) in sets.iter().enumerate() {
                    let target = if held.contains(&s) {
                        &mut test
                    } else {
                        &mut train
                    };
                    target.extend((0..set.len()).map(|i| (s, i)));
                }
                let id = if held_out.len() == 1 {
                    cohort.subjects()[held_out[0]].subject_id.clone()
                } else {
                    format!("f{f:02}")
                };
                tasks.push(FoldTask {
                    id,
                    counter: f as u64,
                    train,
                    test,
                    group: 0,
                });
            }
        }
    }
    Ok(tasks)
}

/// Every index in 0..len must be tested exactly once across the folds.
fn check_partition(folds: &[Vec<usize>], len: usize, what: &str) -> Result<(), CvError> {
    let mut seen = vec![0usize; len];
    for fold in folds {
        for &idx in fold {
            if idx >= len {
                return Err(CvError::InvalidPlan(format!(
                    "{what}: test index {idx} out of range ({len} epochs)"
                )));
            }
            seen[idx] += 1;
        }
    }
    if let Some(idx) = seen.iter().position(|&c| c != 1) {
        return Err(CvError::InvalidPlan(format!(
            "{what}: index {idx} is tested {} times (expected exactly once)",
            seen[idx]
        )));
    }
    Ok(())
}

/// The per-fold audit: no epoch lineage may appear on both sides. Derived
/// data inherits the parent's lineage id, so disjointness here rules out
/// leakage through sub-epochs and design-matrix rows as well.
fn audit_fold(task: &FoldTask, sets: &[EpochSet]) -> Result<(), CvError> {
    let lineage = |&(s, i): &(usize, usize)| sets[s].epochs()[i].lineage_id();
    let train: HashSet<String> = task.train.iter().map(lineage).collect();
    for item in &task.test {
        let id = lineage(item);
        if train.contains(&id) {
            return Err(CvError::Leakage {
                fold: task.id.clone(),
                detail: format!("epoch {id} appears in both train and test"),
            });
        }
    }
    if task.test.is_empty() {
        return Err(CvError::Leakage {
            fold: task.id.clone(),
            detail: "empty test split".into(),
        });
    }
    Ok(())
}

fn accuracy_pct(predicted: &[u8], expected: &[u8]) -> f64 {
    let hits = predicted
        .iter()
        .zip(expected)
        .filter(|(p, e)| p == e)
        .count();
    100.0 * hits as f64 / expected.len() as f64
}

fn mean_and_population_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

// ---------------------------------------------------------------------------
// CSP-LDA (cached covariance path, shared with the grid sweep)
// ---------------------------------------------------------------------------

/// Per-epoch second-moment matrices, precomputed once per cohort. The class
/// covariance of any training split and the log-variance feature of any
/// epoch are both quadratic-form reads of these, so neither the sweep nor
/// the fold loop ever touches raw samples again.
struct MomentCache {
    /// `moments[s][e]` = X·Xᵀ of epoch e of subject s (unnormalized).
    moments: Vec<Vec<Array2<f64>>>,
    traces: Vec<Vec<f64>>,
    labels: Vec<Vec<u8>>,
    epoch_len: usize,
}

impl MomentCache {
    fn build(sets: &[EpochSet]) -> MomentCache {
        let mut moments = Vec::with_capacity(sets.len());
        let mut traces = Vec::with_capacity(sets.len());
        let mut labels = Vec::with_capacity(sets.len());
        for set in sets {
            let per_epoch: Vec<Array2<f64>> = set
                .epochs()
                .par_iter()
                .map(|e| e.data.dot(&e.data.t()))
                .collect();
            traces.push(per_epoch.iter().map(|m| m.diag().sum()).collect());
            labels.push(set.epochs().iter().map(|e| e.label.label()).collect());
            moments.push(per_epoch);
        }
        MomentCache {
            moments,
            traces,
            labels,
            epoch_len: sets.first().map_or(0, |s| s.epoch_len()),
        }
    }

    /// Mean trace-normalized covariance over the items with `label`.
    fn class_covariance(
        &self,
        items: &[(usize, usize)],
        label: u8,
    ) -> Result<ClassCovariance, CvError> {
        let mut acc: Option<Array2<f64>> = None;
        let mut count = 0usize;
        for &(s, e) in items {
            if self.labels[s][e] != label {
                continue;
            }
            let trace = self.traces[s][e];
            if trace <= 0.0 {
                return Err(CvError::Csp(CspError::DegenerateEpoch { index: e }));
            }
            let normalized = &self.moments[s][e] / trace;
            match acc.as_mut() {
                None => acc = Some(normalized),
                Some(sum) => *sum += &normalized,
            }
            count += 1;
        }
        let mut matrix = acc.ok_or(CvError::Csp(CspError::EmptyClass))?;
        matrix /= count as f64;
        Ok(ClassCovariance {
            matrix,
            n_epochs: count,
        })
    }

    /// Log-variance features of `items` under `bank`, plus their labels.
    fn features(
        &self,
        items: &[(usize, usize)],
        bank: &SpatialFilterBank,
    ) -> (Array2<f64>, Vec<u8>) {
        let n_filters = bank.n_filters();
        let len = self.epoch_len as f64;
        let mut features = Array2::<f64>::zeros((items.len(), n_filters));
        let mut labels = Vec::with_capacity(items.len());
        for (row, &(s, e)) in items.iter().enumerate() {
            let m = &self.moments[s][e];
            for (j, w) in bank.filters.columns().into_iter().enumerate() {
                let var = w.dot(&m.dot(&w)) / len;
                features[[row, j]] = var.max(csp::VARIANCE_FLOOR).ln();
            }
            labels.push(self.labels[s][e]);
        }
        (features, labels)
    }
}

fn csp_lda_fold(
    cache: &MomentCache,
    task: &FoldTask,
    alpha: f64,
    n_pairs: usize,
) -> Result<f64, CvError> {
    let meditation = cache.class_covariance(&task.train, 1)?;
    let rest = cache.class_covariance(&task.train, 0)?;
    let bank = csp::fit_csp(&meditation, &rest, alpha, n_pairs)?;
    let (train_x, train_y) = cache.features(&task.train, &bank);
    let model = lda::fit_lda(train_x.view(), &train_y)?;
    let (test_x, test_y) = cache.features(&task.test, &bank);
    Ok(accuracy_pct(&model.classify_batch(test_x.view()), &test_y))
}

// ---------------------------------------------------------------------------
// CSP-LDA-LSTM
// ---------------------------------------------------------------------------

fn subset_from_items(sets: &[EpochSet], items: &[(usize, usize)]) -> Result<EpochSet, CvError> {
    let epochs: Vec<Epoch> = items
        .iter()
        .map(|&(s, e)| sets[s].epochs()[e].clone())
        .collect();
    Ok(EpochSet::new(epochs)?)
}

fn lstm_fold(
    sets: &[EpochSet],
    task: &FoldTask,
    alpha: f64,
    n_pairs: usize,
    tuning: &ModelTuning,
    train_seed: u64,
) -> Result<f64, CvError> {
    let train_set = subset_from_items(sets, &task.train)?;
    let test_set = subset_from_items(sets, &task.test)?;

    // The spatial front end and the projection to scalars are fitted on the
    // training fold's sub-epochs; the same fitted pair then turns both folds
    // into scalar sequences.
    let sub_train = lstm::split_sub_epochs(&train_set)?;
    let meditation = csp::class_covariance(
        sub_train
            .epochs()
            .iter()
            .filter(|e| e.label == Condition::Meditation),
    )?;
    let rest = csp::class_covariance(
        sub_train
            .epochs()
            .iter()
            .filter(|e| e.label == Condition::Rest),
    )?;
    let bank = csp::fit_csp(&meditation, &rest, alpha, n_pairs)?;

    let mut sub_x = Array2::<f64>::zeros((sub_train.len(), bank.n_filters()));
    let mut sub_y = Vec::with_capacity(sub_train.len());
    for (row, epoch) in sub_train.epochs().iter().enumerate() {
        let f = csp::log_variance_features(&bank, epoch)?;
        sub_x.row_mut(row).assign(&f);
        sub_y.push(epoch.label.label());
    }
    let projector = lda::fit_lda(sub_x.view(), &sub_y)?;

    let train_seqs = lstm::build_sequences(&train_set, &bank, &projector)?;
    let cfg = LstmConfig {
        seed: train_seed,
        ..tuning.lstm.clone()
    };
    let model = lstm::train_lstm(&train_seqs, &cfg)?;

    let test_seqs = lstm::build_sequences(&test_set, &bank, &projector)?;
    let mut predicted = Vec::with_capacity(test_seqs.len());
    let mut expected = Vec::with_capacity(test_seqs.len());
    for seq in &test_seqs {
        predicted.push(model.classify(seq)?);
        expected.push(seq.label);
    }
    Ok(accuracy_pct(&predicted, &expected))
}

// ---------------------------------------------------------------------------
// SVD-NN
// ---------------------------------------------------------------------------

/// Design-matrix view of one cross-validation group (a subject in intra
/// mode, the whole cohort in LOSO): the stacked rows, per-epoch labels, and
/// the full Gram matrix. A fold's training Gram matrix is `gram_all` minus
/// the test epochs' contribution, which sidesteps recomputing the product
/// for every fold.
struct GroupDesign {
    dm: svdnn::DesignMatrix,
    labels: Vec<u8>,
    gram_all: Array2<f64>,
    /// Maps (subject, epoch) to the epoch's row block in `dm`.
    index_of: std::collections::HashMap<(usize, usize), usize>,
}

impl GroupDesign {
    fn build(sets: &[EpochSet], members: Vec<(usize, usize)>) -> Result<GroupDesign, CvError> {
        let set = subset_from_items(sets, &members)?;
        let labels = set.epochs().iter().map(|e| e.label.label()).collect();
        let dm = svdnn::build_design_matrix(&set, svdnn::DESIGN_WIDTH)?;
        let gram_all = dm.matrix.t().dot(&dm.matrix);
        let index_of = members
            .iter()
            .enumerate()
            .map(|(pos, &item)| (item, pos))
            .collect();
        Ok(GroupDesign {
            dm,
            labels,
            gram_all,
            index_of,
        })
    }

    /// Gram matrix of the group minus the listed epochs.
    fn gram_without(&self, excluded: &[usize]) -> Array2<f64> {
        let rpe = self.dm.rows_per_epoch();
        let mut gram = self.gram_all.clone();
        for &pos in excluded {
            let block = self
                .dm
                .matrix
                .slice(ndarray::s![pos * rpe..(pos + 1) * rpe, ..]);
            gram -= &block.t().dot(&block);
        }
        gram
    }

    fn positions(&self, items: &[(usize, usize)]) -> Vec<usize> {
        items.iter().map(|item| self.index_of[item]).collect()
    }

    fn take_rows(
        features: &Array2<f64>,
        positions: &[usize],
        labels: &[u8],
    ) -> (Array2<f64>, Vec<u8>) {
        let mut x = Array2::<f64>::zeros((positions.len(), features.ncols()));
        let mut y = Vec::with_capacity(positions.len());
        for (row, &pos) in positions.iter().enumerate() {
            x.row_mut(row).assign(&features.row(pos));
            y.push(labels[pos]);
        }
        (x, y)
    }
}

/// Round-1 singular-count selection for one group: carve a validation set
/// from the first fold's training split and score the candidate grid on it.
/// The winner is frozen for every remaining fold.
fn select_group_k(
    design: &GroupDesign,
    first_fold_train: &[usize],
    k_grid: &[usize],
    tuning: &ModelTuning,
    carve_seed: u64,
    train_seed: u64,
) -> Result<usize, CvError> {
    if k_grid.is_empty() {
        return Err(CvError::EmptyGrid);
    }
    let labels: Vec<u8> = first_fold_train
        .iter()
        .map(|&pos| design.labels[pos])
        .collect();
    let (train_pos, val_pos) =
        carve_validation(first_fold_train, &labels, VALIDATION_FRACTION, carve_seed)?;

    let rpe = design.dm.rows_per_epoch();
    let slice_dm = |positions: &[usize]| {
        let mut matrix = Array2::<f64>::zeros((positions.len() * rpe, svdnn::DESIGN_WIDTH));
        for (i, &pos) in positions.iter().enumerate() {
            matrix
                .slice_mut(ndarray::s![i * rpe..(i + 1) * rpe, ..])
                .assign(&design.dm.matrix.slice(ndarray::s![
                    pos * rpe..(pos + 1) * rpe,
                    ..
                ]));
        }
        svdnn::DesignMatrix {
            matrix,
            row_owner: (0..positions.len()).flat_map(|i| std::iter::repeat(i).take(rpe)).collect(),
            width: svdnn::DESIGN_WIDTH,
            n_epochs: positions.len(),
        }
    };
    let train_dm = slice_dm(&train_pos);
    let val_dm = slice_dm(&val_pos);
    let train_labels: Vec<u8> = train_pos.iter().map(|&p| design.labels[p]).collect();
    let val_labels: Vec<u8> = val_pos.iter().map(|&p| design.labels[p]).collect();

    let cfg = NnConfig {
        seed: train_seed,
        ..tuning.nn.clone()
    };
    Ok(svdnn::select_k(
        &train_dm,
        &train_labels,
        &val_dm,
        &val_labels,
        k_grid,
        &cfg,
    )?)
}

fn svdnn_fold(
    design: &GroupDesign,
    task: &FoldTask,
    k: usize,
    tuning: &ModelTuning,
    carve_seed: u64,
    train_seed: u64,
) -> Result<f64, CvError> {
    let train_pos = design.positions(&task.train);
    let test_pos = design.positions(&task.test);

    // Basis from this fold's training rows only: subtract the test epochs'
    // contribution from the group Gram matrix and decompose what remains.
    // The basis fit is unsupervised, so the carved-out validation epochs may
    // stay in it; the network below never trains on them.
    let gram_train = design.gram_without(&test_pos);
    let basis = svdnn::basis_from_gram(&gram_train, k)?;
    let features = svdnn::all_epoch_features(&design.dm, &basis);

    let labels: Vec<u8> = train_pos.iter().map(|&p| design.labels[p]).collect();
    let (fit_pos, val_pos) =
        carve_validation(&train_pos, &labels, VALIDATION_FRACTION, carve_seed)?;

    let (train_x, train_y) = GroupDesign::take_rows(&features, &fit_pos, &design.labels);
    let (val_x, val_y) = GroupDesign::take_rows(&features, &val_pos, &design.labels);
    let (test_x, test_y) = GroupDesign::take_rows(&features, &test_pos, &design.labels);

    let cfg = NnConfig {
        seed: train_seed,
        ..tuning.nn.clone()
    };
    let model = svdnn::train_nn(
        train_x.view(),
        &train_y,
        &cfg,
        Some((val_x.view(), &val_y)),
    )?;
    let probs = svdnn::predict_nn_batch(&model, test_x.view())?;
    let predicted: Vec<u8> = probs.iter().map(|&p| u8::from(p > 0.5)).collect();
    Ok(accuracy_pct(&predicted, &test_y))
}

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

/// Run one cross-validated experiment and aggregate the fold accuracies.
///
/// The pipeline is implied by the hyperparameter variant and the frequency
/// band rides on the cohort (its recordings are already filtered). All
/// fitted state is fold-local; see the module docs for the seed budget and
/// the leakage audit.
pub fn run_experiment(
    cohort: &CohortDataset,
    hyper: &Hyperparams,
    plan: &ExperimentPlan,
    seeds: RunSeeds,
    tuning: &ModelTuning,
) -> Result<CvReport, CvError> {
    let pipeline = hyper.pipeline();
    if plan.epoch_len != pipeline.epoch_len() {
        return Err(CvError::InvalidPlan(format!(
            "plan was stratified over {}-sample epochs but {} uses {}-sample epochs",
            plan.epoch_len,
            pipeline,
            pipeline.epoch_len()
        )));
    }
    let sets = (0..cohort.n_subjects())
        .map(|s| cohort.epoch_set(s, plan.epoch_len))
        .collect::<Result<Vec<_>, CoreError>>()?;
    let tasks = enumerate_folds(cohort, &sets, plan)?;
    for task in &tasks {
        audit_fold(task, &sets)?;
    }

    let carve_seed = |counter: u64| derive_seed(seeds.plan, 0x1_0000 + counter);
    let train_seed = |counter: u64| derive_seed(seeds.train, counter);

    let mut selected_k = None;
    let accuracies: Vec<f64> = match hyper {
        Hyperparams::CspLda { alpha, n_pairs } => {
            let cache = MomentCache::build(&sets);
            tasks
                .par_iter()
                .map(|task| csp_lda_fold(&cache, task, *alpha, *n_pairs))
                .collect::<Result<_, _>>()?
        }
        Hyperparams::CspLdaLstm { alpha, n_pairs } => tasks
            .par_iter()
            .map(|task| {
                lstm_fold(&sets, task, *alpha, *n_pairs, tuning, train_seed(task.counter))
            })
            .collect::<Result<_, _>>()?,
        Hyperparams::SvdNn { k_grid } => {
            // Group the folds (per subject in intra mode, one group in
            // LOSO), pick k on each group's first fold, then freeze it.
            let n_groups = tasks.iter().map(|t| t.group).max().unwrap_or(0) + 1;
            let mut groups: Vec<GroupDesign> = Vec::with_capacity(n_groups);
            for g in 0..n_groups {
                let members: Vec<(usize, usize)> = match plan.mode {
                    CvMode::IntraSubject10Fold => {
                        (0..sets[g].len()).map(|e| (g, e)).collect()
                    }
                    CvMode::LeaveOneSubjectOut => sets
                        .iter()
                        .enumerate()
                        .flat_map(|(s, set)| (0..set.len()).map(move |e| (s, e)))
                        .collect(),
                };
                groups.push(GroupDesign::build(&sets, members)?);
            }

            let mut selections = Vec::with_capacity(n_groups);
            let mut frozen = vec![0usize; n_groups];
            for g in 0..n_groups {
                let first = tasks
                    .iter()
                    .find(|t| t.group == g)
                    .expect("every group has folds");
                let train_pos = groups[g].positions(&first.train);
                let chosen = select_group_k(
                    &groups[g],
                    &train_pos,
                    k_grid,
                    tuning,
                    carve_seed(0x2_0000 + g as u64),
                    derive_seed(seeds.train, 0x2_0000 + g as u64),
                )?;
                frozen[g] = chosen;
                let group_name = match plan.mode {
                    CvMode::IntraSubject10Fold => cohort.subjects()[g].subject_id.clone(),
                    CvMode::LeaveOneSubjectOut => "cohort".to_string(),
                };
                selections.push(KSelection {
                    group: group_name,
                    selected_k: chosen,
                });
            }
            selected_k = Some(selections);

            tasks
                .par_iter()
                .map(|task| {
                    svdnn_fold(
                        &groups[task.group],
                        task,
                        frozen[task.group],
                        tuning,
                        carve_seed(task.counter),
                        train_seed(task.counter),
                    )
                })
                .collect::<Result<_, _>>()?
        }
    };

    let (mean, sd) = mean_and_population_sd(&accuracies);
    Ok(CvReport {
        pipeline,
        mode: plan.mode,
        band: cohort.band,
        hyperparams: hyper.clone(),
        seeds,
        fold_ids: tasks.into_iter().map(|t| t.id).collect(),
        per_fold_accuracy_pct: accuracies,
        mean_accuracy_pct: mean,
        sd_accuracy_pct: sd,
        selected_k,
        leakage_audit_passed: true,
    })
}

/// Evaluate CSP-LDA over the full (α, pair-count) grid with one shared
/// covariance cache: the per-epoch moment matrices do not depend on either
/// grid axis, so each cell only pays for its own eigenproblems and its LDA.
pub fn grid_sweep(
    cohort: &CohortDataset,
    alphas: &[f64],
    pair_counts: &[usize],
    plan: &ExperimentPlan,
    seeds: RunSeeds,
) -> Result<SweepTable, CvError> {
    if alphas.is_empty() || pair_counts.is_empty() {
        return Err(CvError::EmptyGrid);
    }
    if plan.epoch_len != Pipeline::CspLda.epoch_len() {
        return Err(CvError::InvalidPlan(format!(
            "sweep needs a plan over {}-sample epochs, got {}",
            Pipeline::CspLda.epoch_len(),
            plan.epoch_len
        )));
    }
    let sets = (0..cohort.n_subjects())
        .map(|s| cohort.epoch_set(s, plan.epoch_len))
        .collect::<Result<Vec<_>, CoreError>>()?;
    let tasks = enumerate_folds(cohort, &sets, plan)?;
    for task in &tasks {
        audit_fold(task, &sets)?;
    }
    let cache = MomentCache::build(&sets);

    let cells: Vec<CvReport> = pair_counts
        .iter()
        .flat_map(|&n_pairs| alphas.iter().map(move |&alpha| (n_pairs, alpha)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(n_pairs, alpha)| {
            let accuracies: Vec<f64> = tasks
                .iter()
                .map(|task| csp_lda_fold(&cache, task, alpha, n_pairs))
                .collect::<Result<_, _>>()?;
            let (mean, sd) = mean_and_population_sd(&accuracies);
            Ok(CvReport {
                pipeline: Pipeline::CspLda,
                mode: plan.mode,
                band: cohort.band,
                hyperparams: Hyperparams::CspLda { alpha, n_pairs },
                seeds,
                fold_ids: tasks.iter().map(|t| t.id.clone()).collect(),
                per_fold_accuracy_pct: accuracies,
                mean_accuracy_pct: mean,
                sd_accuracy_pct: sd,
                selected_k: None,
                leakage_audit_passed: true,
            })
        })
        .collect::<Result<_, CvError>>()?;

    Ok(SweepTable {
        pair_counts: pair_counts.to_vec(),
        alphas: alphas.to_vec(),
        cells,
    })
}
