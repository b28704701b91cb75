//! Fisher linear discriminant analysis for binary classification.
//!
//! Fits a projection direction `d = (S_pooled + εI)⁻¹ (μ₁ − μ₀)` from labeled
//! feature vectors and thresholds the scalar projection at the midpoint of
//! the projected class means. The ridge term `ε = 1e-6 · tr(S_pooled)/dim`
//! keeps the solve well posed when features are nearly collinear.

use crate::numerics::{self, NumericsError};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LdaError {
    #[error("training data contains only one class")]
    SingleClass,
    #[error("feature matrix has {rows} rows but {labels} labels were supplied")]
    DimensionMismatch { rows: usize, labels: usize },
    #[error("labels must be 0 or 1, got {0}")]
    InvalidLabel(u8),
    #[error("features contain non-finite values")]
    NonFinite,
    #[error("class means coincide; no discriminant direction exists")]
    DegenerateMeans,
    #[error("numerical failure: {0}")]
    Numerics(#[from] NumericsError),
}

/// A fitted linear discriminant: unit-norm direction plus decision threshold.
///
/// The direction is oriented so class 1 projects above class 0; `classify`
/// maps projections strictly above the threshold to 1 and everything else
/// (including exact ties) to 0.
#[derive(Debug, Clone)]
pub struct LdaModel {
    pub direction: Array1<f64>,
    pub threshold: f64,
}

impl LdaModel {
    /// Scalar projection of one feature vector onto the discriminant axis.
    pub fn project(&self, features: ArrayView1<f64>) -> f64 {
        self.direction.dot(&features)
    }

    /// Predicted label: 1 iff the projection exceeds the threshold.
    pub fn classify(&self, features: ArrayView1<f64>) -> u8 {
        u8::from(self.project(features) > self.threshold)
    }

    /// Predicted labels for a batch, one row per sample.
    pub fn classify_batch(&self, features: ArrayView2<f64>) -> Vec<u8> {
        features
            .rows()
            .into_iter()
            .map(|row| self.classify(row))
            .collect()
    }
}

/// Fit an LDA model from a feature matrix (one row per sample) and 0/1 labels.
pub fn fit_lda(features: ArrayView2<f64>, labels: &[u8]) -> Result<LdaModel, LdaError> {
    let (rows, dim) = features.dim();
    if rows != labels.len() {
        return Err(LdaError::DimensionMismatch {
            rows,
            labels: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(LdaError::InvalidLabel(bad));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(LdaError::NonFinite);
    }
    let n1 = labels.iter().filter(|&&l| l == 1).count();
    let n0 = rows - n1;
    if n0 == 0 || n1 == 0 {
        return Err(LdaError::SingleClass);
    }

    let mut mu = [Array1::<f64>::zeros(dim), Array1::<f64>::zeros(dim)];
    for (row, &label) in features.rows().into_iter().zip(labels) {
        mu[label as usize] += &row;
    }
    mu[0].mapv_inplace(|v| v / n0 as f64);
    mu[1].mapv_inplace(|v| v / n1 as f64);

    // Pooled within-class scatter, normalized by n − 2 when possible.
    let mut scatter = Array2::<f64>::zeros((dim, dim));
    for (row, &label) in features.rows().into_iter().zip(labels) {
        let centered = &row - &mu[label as usize];
        for i in 0..dim {
            for j in 0..dim {
                scatter[[i, j]] += centered[i] * centered[j];
            }
        }
    }
    if rows > 2 {
        scatter.mapv_inplace(|v| v / (rows - 2) as f64);
    }

    let trace: f64 = scatter.diag().sum();
    // With one sample per class the scatter is exactly zero; an absolute
    // floor keeps the ridge solve defined and the direction follows the
    // mean difference.
    let epsilon = if trace > 0.0 {
        1e-6 * trace / dim as f64
    } else {
        1e-12
    };
    let mut ridged = scatter;
    for i in 0..dim {
        ridged[[i, i]] += epsilon;
    }

    let delta = &mu[1] - &mu[0];
    let chol = numerics::cholesky(ridged.view())?;
    let mut direction = numerics::cholesky_solve(&chol, &delta);
    let norm = direction.dot(&direction).sqrt();
    if norm == 0.0 {
        return Err(LdaError::DegenerateMeans);
    }
    direction.mapv_inplace(|v| v / norm);

    // (S+εI)⁻¹ is positive definite, so δᵀ(S+εI)⁻¹δ > 0 and class 1 already
    // projects above class 0; no extra orientation step is needed.
    let p1 = direction.dot(&mu[1]);
    let p0 = direction.dot(&mu[0]);
    debug_assert!(p1 >= p0);
    let threshold = 0.5 * (p1 + p0);

    Ok(LdaModel {
        direction,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// n samples per class in `dim` dimensions, class means ±`offset`·𝟙.
    fn two_blobs(
        n: usize,
        dim: usize,
        offset: f64,
        rng: &mut ChaCha8Rng,
    ) -> (Array2<f64>, Vec<u8>) {
        let mut features = Array2::<f64>::zeros((2 * n, dim));
        let mut labels = Vec::with_capacity(2 * n);
        for s in 0..2 * n {
            let label = u8::from(s >= n);
            let center = if label == 1 { offset } else { -offset };
            for d in 0..dim {
                let g: f64 = rng.sample(StandardNormal);
                features[[s, d]] = center + g;
            }
            labels.push(label);
        }
        (features, labels)
    }

    #[test]
    fn one_dimensional_symmetric_classes_threshold_near_zero() {
        // Midpoint of two sample means of 2000 N(±1, 1) draws each: the
        // standard error is ≈ 0.016, so |threshold| ≤ 0.05 is a ≈ 3σ bound.
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let (features, labels) = two_blobs(2000, 1, 1.0, &mut rng);
        let model = fit_lda(features.view(), &labels).unwrap();
        assert!(model.threshold.abs() <= 0.05, "threshold {}", model.threshold);
        assert_abs_diff_eq!(model.direction[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn direction_has_unit_norm_and_means_project_to_their_sides() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let (features, labels) = two_blobs(50, 4, 0.8, &mut rng);
        let model = fit_lda(features.view(), &labels).unwrap();
        assert_abs_diff_eq!(model.direction.dot(&model.direction), 1.0, epsilon = 1e-12);

        let mean_of = |label: u8| -> Array1<f64> {
            let rows: Vec<_> = labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == label)
                .map(|(i, _)| features.row(i).to_owned())
                .collect();
            let mut m = Array1::zeros(4);
            for r in &rows {
                m += r;
            }
            m / rows.len() as f64
        };
        assert_eq!(model.classify(mean_of(1).view()), 1);
        assert_eq!(model.classify(mean_of(0).view()), 0);
    }

    #[test]
    fn well_separated_blobs_classify_perfectly() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let (features, labels) = two_blobs(200, 3, 3.0, &mut rng);
        let model = fit_lda(features.view(), &labels).unwrap();
        let predicted = model.classify_batch(features.view());
        let correct = predicted
            .iter()
            .zip(&labels)
            .filter(|(p, l)| p == l)
            .count();
        assert!(correct as f64 / labels.len() as f64 >= 0.99);
    }

    #[test]
    fn identical_distributions_score_near_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let (train, labels) = two_blobs(250, 2, 0.0, &mut rng);
        let model = fit_lda(train.view(), &labels).unwrap();
        let (test, test_labels) = two_blobs(250, 2, 0.0, &mut rng);
        let predicted = model.classify_batch(test.view());
        let acc = predicted
            .iter()
            .zip(&test_labels)
            .filter(|(p, l)| p == l)
            .count() as f64
            / test_labels.len() as f64;
        assert!((0.4..=0.6).contains(&acc), "accuracy {acc}");
    }

    #[test]
    fn predictions_survive_invertible_affine_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        let (features, labels) = two_blobs(40, 5, 0.7, &mut rng);
        let model = fit_lda(features.view(), &labels).unwrap();
        let base = model.classify_batch(features.view());

        // Well-conditioned random map plus translation.
        let mut m = Array2::from_shape_fn((5, 5), |_| 0.3 * rng.gen_range(-1.0..1.0f64));
        for i in 0..5 {
            m[[i, i]] += 2.0;
        }
        let shift = Array1::from_shape_fn(5, |_| rng.gen_range(-2.0..2.0f64));
        let mut mapped = features.dot(&m.t());
        for mut row in mapped.rows_mut() {
            row += &shift;
        }
        let remapped_model = fit_lda(mapped.view(), &labels).unwrap();
        let mapped_pred = remapped_model.classify_batch(mapped.view());
        assert_eq!(base, mapped_pred);
    }

    #[test]
    fn projection_is_linear() {
        let model = LdaModel {
            direction: array![0.6, 0.8],
            threshold: 0.0,
        };
        let x = array![1.0, -2.0];
        let y = array![0.5, 3.0];
        let combo = &x * 2.0 + &y * -0.5;
        let expected = 2.0 * model.project(x.view()) - 0.5 * model.project(y.view());
        assert_abs_diff_eq!(model.project(combo.view()), expected, epsilon = 1e-12);
    }

    #[test]
    fn exact_tie_resolves_to_class_zero() {
        let model = LdaModel {
            direction: array![1.0, 0.0],
            threshold: 0.5,
        };
        assert_eq!(model.classify(array![0.5, 9.0].view()), 0);
        assert_eq!(model.classify(array![0.5 + 1e-9, 0.0].view()), 1);
    }

    #[test]
    fn one_sample_per_class_puts_threshold_at_the_midpoint() {
        let features = array![[0.0], [2.0]];
        let model = fit_lda(features.view(), &[0, 1]).unwrap();
        assert_abs_diff_eq!(model.threshold, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(model.direction[0], 1.0, epsilon = 1e-12);
        assert_eq!(model.classify(array![1.5].view()), 1);
        assert_eq!(model.classify(array![0.5].view()), 0);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let features = array![[0.0], [1.0]];
        assert!(matches!(
            fit_lda(features.view(), &[0]),
            Err(LdaError::DimensionMismatch { rows: 2, labels: 1 })
        ));
        assert!(matches!(
            fit_lda(features.view(), &[0, 2]),
            Err(LdaError::InvalidLabel(2))
        ));
        assert!(matches!(
            fit_lda(features.view(), &[0, 0]),
            Err(LdaError::SingleClass)
        ));
        let bad = array![[f64::NAN], [1.0]];
        assert!(matches!(
            fit_lda(bad.view(), &[0, 1]),
            Err(LdaError::NonFinite)
        ));
    }
}
