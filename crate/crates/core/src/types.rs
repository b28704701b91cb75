//! Shared domain types: conditions, frequency bands, recordings, epochs.
//!
//! A [`Recording`] is one subject in one condition: a channels × samples
//! matrix at a fixed sample rate. [`slice_epochs`] cuts it into fixed-length
//! windows ([`Epoch`]s) whose per-channel mean is removed at construction —
//! every downstream consumer (covariance estimation, variance features,
//! design matrices) assumes zero-mean windows. A [`CohortDataset`] bundles the
//! band-filtered recordings of several subjects for the cross-validation
//! drivers.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("recording has {got} samples, need at least {needed}")]
    TooShort { needed: usize, got: usize },
    #[error("epoch length and stride must be at least 1")]
    ZeroWindow,
    #[error("recording contains a non-finite sample")]
    NonFinite,
    #[error("sample rate must be positive, got {0}")]
    InvalidSampleRate(f64),
    #[error("recording must have at least one channel and one sample")]
    EmptyRecording,
    #[error("epoch set must contain at least one epoch")]
    EmptySet,
    #[error("epochs in a set must share channel count and length")]
    HeterogeneousEpochs,
    #[error("subject {subject}: rest/meditation sample counts {rest}/{meditation} are too imbalanced")]
    ClassImbalance {
        subject: String,
        rest: usize,
        meditation: usize,
    },
    #[error("cohort must contain at least one subject")]
    EmptyCohort,
    #[error("subject index {index} out of range ({len} subjects)")]
    SubjectOutOfRange { index: usize, len: usize },
}

/// Experimental condition of a recording. `Rest` is class 0 and `Meditation`
/// class 1 throughout the crate and in the on-disk formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    Rest,
    Meditation,
}

impl Condition {
    /// Numeric class label: 0 for rest, 1 for meditation.
    pub fn label(self) -> u8 {
        match self {
            Condition::Rest => 0,
            Condition::Meditation => 1,
        }
    }

    pub fn from_label(label: u8) -> Option<Self> {
        match label {
            0 => Some(Condition::Rest),
            1 => Some(Condition::Meditation),
            _ => None,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Rest => write!(f, "rest"),
            Condition::Meditation => write!(f, "meditation"),
        }
    }
}

/// The four analysis bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BandName {
    Alpha,
    Beta,
    LowGamma,
    HighGamma,
}

impl fmt::Display for BandName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BandName::Alpha => "alpha",
            BandName::Beta => "beta",
            BandName::LowGamma => "low-gamma",
            BandName::HighGamma => "high-gamma",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for BandName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alpha" => Ok(BandName::Alpha),
            "beta" => Ok(BandName::Beta),
            "low-gamma" => Ok(BandName::LowGamma),
            "high-gamma" => Ok(BandName::HighGamma),
            other => Err(format!(
                "unknown band '{other}' (expected alpha, beta, low-gamma or high-gamma)"
            )),
        }
    }
}

/// One frequency band: a half-open interval of pass frequencies in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandDef {
    pub name: BandName,
    pub lo_hz: f64,
    pub hi_hz: f64,
}

/// The band table used everywhere: alpha 8–13 Hz, beta 13–25 Hz, low gamma
/// 25–45 Hz, high gamma 45–64 Hz.
pub fn band_definitions() -> [BandDef; 4] {
    [
        BandDef {
            name: BandName::Alpha,
            lo_hz: 8.0,
            hi_hz: 13.0,
        },
        BandDef {
            name: BandName::Beta,
            lo_hz: 13.0,
            hi_hz: 25.0,
        },
        BandDef {
            name: BandName::LowGamma,
            lo_hz: 25.0,
            hi_hz: 45.0,
        },
        BandDef {
            name: BandName::HighGamma,
            lo_hz: 45.0,
            hi_hz: 64.0,
        },
    ]
}

impl BandName {
    pub fn definition(self) -> BandDef {
        band_definitions()
            .into_iter()
            .find(|b| b.name == self)
            .expect("band table covers every name")
    }
}

/// A continuous multi-channel recording of one subject in one condition.
#[derive(Debug, Clone)]
pub struct Recording {
    pub subject_id: String,
    pub condition: Condition,
    pub sample_rate_hz: f64,
    /// channels × samples
    pub data: Array2<f64>,
}

impl Recording {
    pub fn new(
        subject_id: impl Into<String>,
        condition: Condition,
        sample_rate_hz: f64,
        data: Array2<f64>,
    ) -> Result<Self, CoreError> {
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(CoreError::InvalidSampleRate(sample_rate_hz));
        }
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(CoreError::EmptyRecording);
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(CoreError::NonFinite);
        }
        Ok(Recording {
            subject_id: subject_id.into(),
            condition,
            sample_rate_hz,
            data,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }
}

/// A fixed-length window cut from a recording, mean-centered per channel.
#[derive(Debug, Clone)]
pub struct Epoch {
    /// channels × epoch_len, each channel summing to (numerically) zero.
    pub data: Array2<f64>,
    pub label: Condition,
    pub subject_id: String,
    /// Ordinal of the window within its source recording.
    pub parent_index: usize,
}

impl Epoch {
    /// Build an epoch from a raw window, removing each channel's mean.
    pub fn from_window(
        window: ArrayView2<f64>,
        label: Condition,
        subject_id: impl Into<String>,
        parent_index: usize,
    ) -> Epoch {
        let mut data = window.to_owned();
        for mut ch in data.rows_mut() {
            let mean = ch.sum() / ch.len() as f64;
            ch.mapv_inplace(|x| x - mean);
        }
        Epoch {
            data,
            label,
            subject_id: subject_id.into(),
            parent_index,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    /// Stable identifier used by the cross-validation leakage audit. Two
    /// epochs share an id only if they cover the same window of the same
    /// subject's recording.
    pub fn sample_id(&self) -> String {
        format!(
            "{}:{}:{}:{}",
            self.subject_id,
            self.label.label(),
            self.parent_index,
            self.len()
        )
    }

    /// Identifier of the source window, ignoring epoch length. Sub-epochs
    /// cut from a parent window keep the parent's `parent_index`, so their
    /// lineage ids coincide with the parent's — which is exactly what the
    /// leakage audit needs to rule out train/test overlap through derived
    /// data.
    pub fn lineage_id(&self) -> String {
        format!(
            "{}:{}:{}",
            self.subject_id,
            self.label.label(),
            self.parent_index
        )
    }
}

/// A homogeneous collection of epochs (same channel count and length).
#[derive(Debug, Clone)]
pub struct EpochSet {
    epochs: Vec<Epoch>,
    n_channels: usize,
    epoch_len: usize,
}

impl EpochSet {
    pub fn new(epochs: Vec<Epoch>) -> Result<Self, CoreError> {
        let first = epochs.first().ok_or(CoreError::EmptySet)?;
        let n_channels = first.n_channels();
        let epoch_len = first.len();
        if epochs
            .iter()
            .any(|e| e.n_channels() != n_channels || e.len() != epoch_len)
        {
            return Err(CoreError::HeterogeneousEpochs);
        }
        Ok(EpochSet {
            epochs,
            n_channels,
            epoch_len,
        })
    }

    pub fn epochs(&self) -> &[Epoch] {
        &self.epochs
    }

    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn epoch_len(&self) -> usize {
        self.epoch_len
    }

    /// (rest, meditation) epoch counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let med = self
            .epochs
            .iter()
            .filter(|e| e.label == Condition::Meditation)
            .count();
        (self.epochs.len() - med, med)
    }

    /// New set containing the epochs at `indices`, cloned in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<EpochSet, CoreError> {
        let epochs = indices
            .iter()
            .map(|&i| self.epochs[i].clone())
            .collect::<Vec<_>>();
        EpochSet::new(epochs)
    }

    /// Concatenate two sets with identical geometry.
    pub fn concat(mut self, other: EpochSet) -> Result<EpochSet, CoreError> {
        if self.n_channels != other.n_channels || self.epoch_len != other.epoch_len {
            return Err(CoreError::HeterogeneousEpochs);
        }
        self.epochs.extend(other.epochs);
        Ok(self)
    }
}

/// Cut a recording into epochs of `epoch_len` samples, advancing by `stride`
/// (use `stride == epoch_len` for non-overlapping windows). Trailing samples
/// that do not fill a whole window are dropped. Each epoch is mean-centered
/// per channel and labeled with the recording's condition.
pub fn slice_epochs(
    rec: &Recording,
    epoch_len: usize,
    stride: usize,
) -> Result<EpochSet, CoreError> {
    if epoch_len == 0 || stride == 0 {
        return Err(CoreError::ZeroWindow);
    }
    let samples = rec.n_samples();
    if samples < epoch_len {
        return Err(CoreError::TooShort {
            needed: epoch_len,
            got: samples,
        });
    }
    let count = (samples - epoch_len) / stride + 1;
    let mut epochs = Vec::with_capacity(count);
    for k in 0..count {
        let start = k * stride;
        let window = rec.data.slice(ndarray::s![.., start..start + epoch_len]);
        epochs.push(Epoch::from_window(
            window,
            rec.condition,
            rec.subject_id.clone(),
            k,
        ));
    }
    EpochSet::new(epochs)
}

/// One subject's pair of band-filtered recordings.
#[derive(Debug, Clone)]
pub struct SubjectRecordings {
    pub subject_id: String,
    pub rest: Recording,
    pub meditation: Recording,
}

/// A cohort of subjects, all filtered to the same band.
///
/// Construction enforces near-balanced class material per subject: the
/// rest/meditation sample-count ratio must stay within [0.8, 1.25].
#[derive(Debug, Clone)]
pub struct CohortDataset {
    pub band: BandDef,
    subjects: Vec<SubjectRecordings>,
}

impl CohortDataset {
    pub fn new(band: BandDef, subjects: Vec<SubjectRecordings>) -> Result<Self, CoreError> {
        if subjects.is_empty() {
            return Err(CoreError::EmptyCohort);
        }
        for s in &subjects {
            let r = s.rest.n_samples();
            let m = s.meditation.n_samples();
            let ratio = r as f64 / m as f64;
            if !(0.8..=1.25).contains(&ratio) {
                return Err(CoreError::ClassImbalance {
                    subject: s.subject_id.clone(),
                    rest: r,
                    meditation: m,
                });
            }
        }
        Ok(CohortDataset { band, subjects })
    }

    pub fn subjects(&self) -> &[SubjectRecordings] {
        &self.subjects
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    /// Slice one subject's two recordings into non-overlapping epochs of
    /// `epoch_len` and return them as a single set: rest epochs first, then
    /// meditation.
    pub fn epoch_set(&self, subject: usize, epoch_len: usize) -> Result<EpochSet, CoreError> {
        let s = self
            .subjects
            .get(subject)
            .ok_or(CoreError::SubjectOutOfRange {
                index: subject,
                len: self.subjects.len(),
            })?;
        let rest = slice_epochs(&s.rest, epoch_len, epoch_len)?;
        let med = slice_epochs(&s.meditation, epoch_len, epoch_len)?;
        rest.concat(med)
    }
}
