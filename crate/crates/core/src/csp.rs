//! Common spatial patterns with Tikhonov regularization.
//!
//! A spatial filter `w` scores how strongly one class's band power projects
//! along `w` relative to the other's:
//!
//! ```text
//! J(w) = wᵀ C_i w / (wᵀ C_j w + α wᵀ w)
//! ```
//!
//! where `C_i`, `C_j` are the two class covariance matrices and `α ≥ 0` the
//! regularization weight (`α = 0` recovers classical CSP). Maximizers are the
//! top generalized eigenvectors of the pencil `(C_i, C_j + αI)`; a filter bank
//! takes `n_pairs` filters from each role assignment so that both classes get
//! directions in which they dominate.

use crate::numerics::{self, NumericsError};
use crate::types::Epoch;
use ndarray::{Array1, Array2, ArrayView1};
use thiserror::Error;

/// Variance floor for log-variance features: a projection with (numerically)
/// zero power contributes `ln(1e-12)` instead of `-∞`.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CspError {
    #[error("cannot estimate a covariance from zero epochs")]
    EmptyClass,
    #[error("epoch {index} has zero total power after centering")]
    DegenerateEpoch { index: usize },
    #[error("covariance dimensions differ: {a} vs {b} channels")]
    DimensionMismatch { a: usize, b: usize },
    #[error("{pairs} filter pairs need {} filters but only {channels} channels exist", 2 * pairs)]
    TooManyPairs { pairs: usize, channels: usize },
    #[error("regularization weight must be finite and ≥ 0, got {0}")]
    InvalidAlpha(f64),
    #[error("covariance pencil is singular at alpha = {alpha}; raise alpha or supply full-rank data")]
    RankDeficient { alpha: f64 },
    #[error("epoch has {got} channels, filter bank expects {expected}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("numerical failure: {0}")]
    Numerics(NumericsError),
}

/// Per-class second-moment estimate: the average over epochs of
/// `X Xᵀ / tr(X Xᵀ)`. The per-epoch trace normalization removes amplitude
/// differences between epochs so that every window contributes equally.
#[derive(Debug, Clone)]
pub struct ClassCovariance {
    /// channels × channels, symmetric PSD, unit trace.
    pub matrix: Array2<f64>,
    pub n_epochs: usize,
}

/// A fitted CSP filter bank.
///
/// Columns `0..n_pairs` of `filters` maximize `J` with class 1 (meditation)
/// in the numerator; columns `n_pairs..2·n_pairs` maximize the role-swapped
/// objective. `objective_values[k]` is `J` evaluated at filter `k`
/// (descending within each half). Filters are unit-norm with their
/// largest-magnitude entry positive.
#[derive(Debug, Clone)]
pub struct SpatialFilterBank {
    /// channels × 2·n_pairs
    pub filters: Array2<f64>,
    pub objective_values: Vec<f64>,
    pub n_pairs: usize,
    pub alpha: f64,
}

impl SpatialFilterBank {
    pub fn n_channels(&self) -> usize {
        self.filters.nrows()
    }

    pub fn n_filters(&self) -> usize {
        self.filters.ncols()
    }
}

/// Average normalized covariance of a set of (already centered) epochs.
pub fn class_covariance<'a, I>(epochs: I) -> Result<ClassCovariance, CspError>
where
    I: IntoIterator<Item = &'a Epoch>,
{
    let mut acc: Option<Array2<f64>> = None;
    let mut count = 0usize;
    for (index, epoch) in epochs.into_iter().enumerate() {
        let cov = normalized_epoch_covariance(epoch).ok_or(CspError::DegenerateEpoch { index })?;
        match acc.as_mut() {
            None => acc = Some(cov),
            Some(sum) => {
                if sum.nrows() != cov.nrows() {
                    return Err(CspError::DimensionMismatch {
                        a: sum.nrows(),
                        b: cov.nrows(),
                    });
                }
                *sum += &cov;
            }
        }
        count += 1;
    }
    let mut matrix = acc.ok_or(CspError::EmptyClass)?;
    matrix.mapv_inplace(|x| x / count as f64);
    Ok(ClassCovariance {
        matrix,
        n_epochs: count,
    })
}

/// `X Xᵀ / tr(X Xᵀ)` for one epoch; `None` when the epoch carries no power.
pub(crate) fn normalized_epoch_covariance(epoch: &Epoch) -> Option<Array2<f64>> {
    let x = &epoch.data;
    let mut cov = x.dot(&x.t());
    let trace: f64 = cov.diag().sum();
    if trace <= 0.0 {
        return None;
    }
    cov.mapv_inplace(|v| v / trace);
    Some(cov)
}

/// The regularized CSP objective `wᵀ C_num w / (wᵀ C_den w + α wᵀ w)`.
pub fn objective(
    c_num: &Array2<f64>,
    c_den: &Array2<f64>,
    alpha: f64,
    w: ArrayView1<f64>,
) -> f64 {
    let num = w.dot(&c_num.dot(&w));
    let den = w.dot(&c_den.dot(&w)) + alpha * w.dot(&w);
    num / den
}

/// Fit a TR-CSP filter bank from the two class covariances.
///
/// Filters `0..n_pairs` solve the pencil `(C₁, C₀ + αI)`, the rest solve the
/// role-swapped pencil `(C₀, C₁ + αI)`. With `α = 0` and full-rank
/// covariances this degenerates to classical CSP; a singular denominator at
/// `α = 0` is reported as [`CspError::RankDeficient`].
pub fn fit_csp(
    meditation: &ClassCovariance,
    rest: &ClassCovariance,
    alpha: f64,
    n_pairs: usize,
) -> Result<SpatialFilterBank, CspError> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(CspError::InvalidAlpha(alpha));
    }
    let channels = meditation.matrix.nrows();
    if rest.matrix.nrows() != channels {
        return Err(CspError::DimensionMismatch {
            a: channels,
            b: rest.matrix.nrows(),
        });
    }
    if n_pairs == 0 || 2 * n_pairs > channels {
        return Err(CspError::TooManyPairs {
            pairs: n_pairs,
            channels,
        });
    }

    let mut filters = Array2::<f64>::zeros((channels, 2 * n_pairs));
    let mut objective_values = Vec::with_capacity(2 * n_pairs);

    let halves = [
        (&meditation.matrix, &rest.matrix),
        (&rest.matrix, &meditation.matrix),
    ];
    for (half, (c_num, c_den)) in halves.into_iter().enumerate() {
        let mut pencil_b = c_den.clone();
        for i in 0..channels {
            pencil_b[[i, i]] += alpha;
        }
        let eig = numerics::gen_sym_eig(c_num.view(), pencil_b.view()).map_err(|e| match e {
            NumericsError::NotPositiveDefinite { .. } => CspError::RankDeficient { alpha },
            other => CspError::Numerics(other),
        })?;
        for k in 0..n_pairs {
            let mut w = eig.vectors.column(k).to_owned();
            let norm = w.dot(&w).sqrt();
            w.mapv_inplace(|v| v / norm);
            // Sign convention: largest-magnitude entry positive.
            let mut best = 0usize;
            let mut best_abs = -1.0;
            for (i, v) in w.iter().enumerate() {
                if v.abs() > best_abs {
                    best_abs = v.abs();
                    best = i;
                }
            }
            if w[best] < 0.0 {
                w.mapv_inplace(|v| -v);
            }
            let j = objective(c_num, c_den, alpha, w.view());
            filters.column_mut(half * n_pairs + k).assign(&w);
            objective_values.push(j);
        }
    }

    Ok(SpatialFilterBank {
        filters,
        objective_values,
        n_pairs,
        alpha,
    })
}

/// Log-variance feature vector of one epoch under a filter bank: for each
/// filter `w`, `ln(Var(wᵀX))`, floored at `ln(VARIANCE_FLOOR)`.
pub fn log_variance_features(
    bank: &SpatialFilterBank,
    epoch: &Epoch,
) -> Result<Array1<f64>, CspError> {
    if epoch.n_channels() != bank.n_channels() {
        return Err(CspError::ChannelMismatch {
            expected: bank.n_channels(),
            got: epoch.n_channels(),
        });
    }
    // Epochs are centered, so the variance of the projection is its mean
    // square: wᵀ (X Xᵀ / L) w.
    let projected = bank.filters.t().dot(&epoch.data); // filters × samples
    let len = epoch.len() as f64;
    let features = projected
        .rows()
        .into_iter()
        .map(|row| {
            let var = row.iter().map(|v| v * v).sum::<f64>() / len;
            var.max(VARIANCE_FLOOR).ln()
        })
        .collect::<Vec<f64>>();
    Ok(Array1::from(features))
}
