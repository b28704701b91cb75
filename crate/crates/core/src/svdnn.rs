//! SVD-subspace features with a shallow feed-forward classifier.
//!
//! The pipeline reshapes a set of epochs into a wide design matrix, finds the
//! top-k right singular directions of the *training* rows, coordinates every
//! row in that k-dimensional subspace, averages the row coordinates per epoch
//! into one k-dimensional feature vector, and trains a small two-hidden-layer
//! network (ReLU, ReLU, logistic) on those features. The subspace dimension
//! `k` is chosen on a validation split and then frozen.
//!
//! Row construction: each channels×L epoch is flattened sample-major (all
//! channels of sample 0, then sample 1, …), epoch vectors are stacked, and
//! the stack is re-cut into `width`-column rows. The default width of 384
//! divides 24-channel, 128-sample epochs into exactly 8 rows; combinations
//! that do not divide evenly are rejected rather than zero-padded.
//!
//! # Serialized form
//!
//! [`encode_nn`] stores the network and its basis in one little-endian blob:
//!
//! ```text
//! magic "MSNN" | version u16 | input_dim u32 | layer1 u32 | layer2 u32 |
//! n_params u32 | basis_width u32 | basis_k u32 | epochs u32 | batch u32 |
//! patience u32 | seed u64 | learning_rate f32 | final_loss f32 |
//! params (n_params × f32) | sigma (basis_k × f32) |
//! v_k (basis_width·basis_k × f32, row-major)
//! ```

use crate::adam::Adam;
use crate::numerics::{self, NumericsError};
use crate::types::EpochSet;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Default design-matrix width.
pub const DESIGN_WIDTH: usize = 384;

const BLOB_MAGIC: &[u8; 4] = b"MSNN";
const BLOB_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum SvdNnError {
    #[error("epoch size {elements} does not divide by width {width} (remainder {remainder})")]
    NotDivisible {
        elements: usize,
        width: usize,
        remainder: usize,
    },
    #[error("k = {k} outside the valid range 1..={max}")]
    KOutOfRange { k: usize, max: usize },
    #[error("epoch index {index} has no rows in this design matrix")]
    UnknownEpoch { index: usize },
    #[error("the candidate grid is empty")]
    EmptyGrid,
    #[error("training labels contain only one class")]
    SingleClass,
    #[error("training loss became non-finite during epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("feature dimension {got} does not match the model's input {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{epochs} epochs but {labels} labels")]
    LabelCount { epochs: usize, labels: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("numerical failure: {0}")]
    Numerics(#[from] NumericsError),
    #[error("model blob rejected: {0}")]
    BadBlob(String),
}

/// Epochs reshaped into fixed-width rows, with row→epoch ownership.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    /// rows × width.
    pub matrix: Array2<f64>,
    /// Owning epoch index of each row.
    pub row_owner: Vec<usize>,
    pub width: usize,
    pub n_epochs: usize,
}

impl DesignMatrix {
    pub fn rows_per_epoch(&self) -> usize {
        self.matrix.nrows() / self.n_epochs
    }
}

/// Truncated right-singular basis of a design matrix.
#[derive(Debug, Clone)]
pub struct SvdBasis {
    /// width × k, column-orthonormal.
    pub v_k: Array2<f64>,
    /// Top-k singular values, descending.
    pub sigma: Vec<f64>,
    pub k: usize,
}

impl SvdBasis {
    /// The same basis restricted to its first `k` directions.
    pub fn truncated(&self, k: usize) -> Result<SvdBasis, SvdNnError> {
        if k == 0 || k > self.k {
            return Err(SvdNnError::KOutOfRange { k, max: self.k });
        }
        Ok(SvdBasis {
            v_k: self.v_k.slice(ndarray::s![.., ..k]).to_owned(),
            sigma: self.sigma[..k].to_vec(),
            k,
        })
    }
}

/// Reshape an epoch set into a design matrix of `width`-column rows.
pub fn build_design_matrix(set: &EpochSet, width: usize) -> Result<DesignMatrix, SvdNnError> {
    if width == 0 {
        return Err(SvdNnError::InvalidConfig("width must be ≥ 1".into()));
    }
    let channels = set.n_channels();
    let epoch_len = set.epoch_len();
    let elements = channels * epoch_len;
    if elements % width != 0 {
        return Err(SvdNnError::NotDivisible {
            elements,
            width,
            remainder: elements % width,
        });
    }
    let rows_per_epoch = elements / width;
    let n_epochs = set.len();
    let mut matrix = Array2::<f64>::zeros((n_epochs * rows_per_epoch, width));
    let mut row_owner = Vec::with_capacity(n_epochs * rows_per_epoch);
    for (e, epoch) in set.epochs().iter().enumerate() {
        for r in 0..rows_per_epoch {
            {
                let mut row = matrix.row_mut(e * rows_per_epoch + r);
                for q in 0..width {
                    // Sample-major flattening: element j of the epoch vector
                    // is channel j % C at sample j / C.
                    let j = r * width + q;
                    row[q] = epoch.data[[j % channels, j / channels]];
                }
            }
            row_owner.push(e);
        }
    }
    Ok(DesignMatrix {
        matrix,
        row_owner,
        width,
        n_epochs,
    })
}

/// Top-k right-singular basis of the design matrix rows.
///
/// The right singular vectors of `X` are the eigenvectors of the Gram matrix
/// `XᵀX` and the singular values are the square roots of its eigenvalues, so
/// the decomposition runs on the (width × width) Gram matrix rather than the
/// full row stack — the basis never needs the left factor, and the Gram
/// product collapses the row count before the expensive eigensolve. The
/// squaring costs precision only near the noise floor (σ below ~1e-8 of the
/// largest), far from where a truncation cut is ever placed.
pub fn fit_basis(dm: &DesignMatrix, k: usize) -> Result<SvdBasis, SvdNnError> {
    let max = dm.matrix.nrows().min(dm.width);
    if k == 0 || k > max {
        return Err(SvdNnError::KOutOfRange { k, max });
    }
    let gram = dm.matrix.t().dot(&dm.matrix);
    basis_from_gram(&gram, k)
}

/// `fit_basis` with the Gram product already in hand. Cross-validation folds
/// reuse this: the full-dataset Gram matrix minus one fold's contribution is
/// the training Gram matrix, which avoids recomputing the product per fold.
pub(crate) fn basis_from_gram(gram: &Array2<f64>, k: usize) -> Result<SvdBasis, SvdNnError> {
    let eig = numerics::sym_eig(gram.view())?;
    let v_k = eig.vectors.slice(ndarray::s![.., ..k]).to_owned();
    // Tiny negative eigenvalues are roundoff from the subtraction/product.
    let sigma = eig.values.iter().take(k).map(|&l| l.max(0.0).sqrt()).collect();
    Ok(SvdBasis { v_k, sigma, k })
}

/// Feature vector of one epoch: the mean of its rows' subspace coordinates.
pub fn epoch_features(
    dm: &DesignMatrix,
    basis: &SvdBasis,
    epoch_index: usize,
) -> Result<Array1<f64>, SvdNnError> {
    if epoch_index >= dm.n_epochs {
        return Err(SvdNnError::UnknownEpoch { index: epoch_index });
    }
    let rows_per_epoch = dm.rows_per_epoch();
    let start = epoch_index * rows_per_epoch;
    let block = dm.matrix.slice(ndarray::s![start..start + rows_per_epoch, ..]);
    let projected = block.dot(&basis.v_k); // rows_per_epoch × k
    Ok(projected.mean_axis(Axis(0)).unwrap())
}

/// Features for every epoch at once (one row per epoch). Batches the whole
/// projection into a single matrix product.
pub fn all_epoch_features(dm: &DesignMatrix, basis: &SvdBasis) -> Array2<f64> {
    let projected = dm.matrix.dot(&basis.v_k); // rows × k
    let rows_per_epoch = dm.rows_per_epoch();
    let mut features = Array2::<f64>::zeros((dm.n_epochs, basis.k));
    for (r, row) in projected.rows().into_iter().enumerate() {
        let mut dst = features.row_mut(dm.row_owner[r]);
        dst += &row;
    }
    features.mapv_inplace(|v| v / rows_per_epoch as f64);
    features
}

/// First hidden layer width as a function of the input dimension.
pub fn layer1_width(k: usize) -> usize {
    if k > 128 {
        64
    } else {
        32
    }
}

/// Network training hyperparameters. `patience` counts validation epochs
/// without improvement before early stopping; it only applies when a
/// validation set is supplied.
#[derive(Debug, Clone, PartialEq)]
pub struct NnConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for NnConfig {
    fn default() -> NnConfig {
        NnConfig {
            epochs: 100,
            learning_rate: 4e-4,
            batch_size: 32,
            patience: 10,
            seed: 0,
        }
    }
}

/// A trained feed-forward classifier: input → layer1 (ReLU) → layer2 (ReLU)
/// → logistic.
#[derive(Debug, Clone)]
pub struct NnModel {
    pub input_dim: usize,
    pub layer1: usize,
    pub layer2: usize,
    /// Flat parameters: W1 (layer1×input, row-major), b1, W2 (layer2×layer1),
    /// b2, w3 (layer2), b3.
    pub params: Vec<f64>,
    /// Mean training BCE at the returned parameters.
    pub final_loss: f64,
    /// Number of training epochs actually run (< `config.epochs` when early
    /// stopping triggered).
    pub epochs_run: usize,
    pub config: NnConfig,
}

#[derive(Debug, Clone, Copy)]
struct NnLayout {
    input: usize,
    l1: usize,
    l2: usize,
}

impl NnLayout {
    fn n_params(&self) -> usize {
        self.l1 * self.input + self.l1 + self.l2 * self.l1 + self.l2 + self.l2 + 1
    }

    fn w1(&self) -> std::ops::Range<usize> {
        0..self.l1 * self.input
    }

    fn b1(&self) -> std::ops::Range<usize> {
        let s = self.l1 * self.input;
        s..s + self.l1
    }

    fn w2(&self) -> std::ops::Range<usize> {
        let s = self.l1 * self.input + self.l1;
        s..s + self.l2 * self.l1
    }

    fn b2(&self) -> std::ops::Range<usize> {
        let s = self.l1 * self.input + self.l1 + self.l2 * self.l1;
        s..s + self.l2
    }

    fn w3(&self) -> std::ops::Range<usize> {
        let e = self.n_params() - 1;
        e - self.l2..e
    }

    fn b3(&self) -> usize {
        self.n_params() - 1
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

struct NnForward {
    a1: Array2<f64>,
    a2: Array2<f64>,
    logits: Array1<f64>,
}

fn nn_forward(params: &[f64], layout: &NnLayout, xs: ArrayView2<f64>) -> NnForward {
    let w1 = ArrayView2::from_shape((layout.l1, layout.input), &params[layout.w1()]).unwrap();
    let w2 = ArrayView2::from_shape((layout.l2, layout.l1), &params[layout.w2()]).unwrap();
    let b1 = &params[layout.b1()];
    let b2 = &params[layout.b2()];
    let w3 = &params[layout.w3()];
    let b3 = params[layout.b3()];

    let mut a1 = xs.dot(&w1.t());
    for mut row in a1.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v + b1[j]).max(0.0);
        }
    }
    let mut a2 = a1.dot(&w2.t());
    for mut row in a2.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v + b2[j]).max(0.0);
        }
    }
    let logits = Array1::from_shape_fn(xs.nrows(), |b| {
        let mut z = b3;
        for j in 0..layout.l2 {
            z += a2[[b, j]] * w3[j];
        }
        z
    });
    NnForward { a1, a2, logits }
}

fn mean_bce(logits: &Array1<f64>, labels: &[u8]) -> f64 {
    logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| softplus(z) - f64::from(y) * z)
        .sum::<f64>()
        / labels.len() as f64
}

/// Mean BCE of a parameter vector on a feature batch; the gradient-check
/// counterpart of [`nn_loss_and_gradient`].
pub fn nn_loss(
    params: &[f64],
    dims: (usize, usize, usize),
    xs: ArrayView2<f64>,
    labels: &[u8],
) -> f64 {
    let layout = NnLayout {
        input: dims.0,
        l1: dims.1,
        l2: dims.2,
    };
    assert_eq!(params.len(), layout.n_params(), "parameter vector size");
    assert_eq!(xs.nrows(), labels.len(), "batch size");
    mean_bce(&nn_forward(params, &layout, xs).logits, labels)
}

/// Mean BCE and its full parameter gradient by backpropagation.
pub fn nn_loss_and_gradient(
    params: &[f64],
    dims: (usize, usize, usize),
    xs: ArrayView2<f64>,
    labels: &[u8],
) -> (f64, Vec<f64>) {
    let layout = NnLayout {
        input: dims.0,
        l1: dims.1,
        l2: dims.2,
    };
    assert_eq!(params.len(), layout.n_params(), "parameter vector size");
    assert_eq!(xs.nrows(), labels.len(), "batch size");
    let batch = xs.nrows();
    let fwd = nn_forward(params, &layout, xs);
    let loss = mean_bce(&fwd.logits, labels);

    let mut grad = vec![0.0; layout.n_params()];
    let w3 = &params[layout.w3()];
    let w2 = ArrayView2::from_shape((layout.l2, layout.l1), &params[layout.w2()]).unwrap();

    let dlogit = Array1::from_shape_fn(batch, |b| {
        (sigmoid(fwd.logits[b]) - f64::from(labels[b])) / batch as f64
    });

    // Head.
    {
        let g = &mut grad[layout.w3()];
        for b in 0..batch {
            for j in 0..layout.l2 {
                g[j] += dlogit[b] * fwd.a2[[b, j]];
            }
        }
    }
    grad[layout.b3()] = dlogit.sum();

    // Layer 2: gradient passes only where the ReLU was active.
    let dz2 = Array2::from_shape_fn((batch, layout.l2), |(b, j)| {
        if fwd.a2[[b, j]] > 0.0 {
            dlogit[b] * w3[j]
        } else {
            0.0
        }
    });
    {
        let dw2 = dz2.t().dot(&fwd.a1);
        let g = &mut grad[layout.w2()];
        for (dst, src) in g.iter_mut().zip(dw2.iter()) {
            *dst = *src;
        }
        let db2 = dz2.sum_axis(Axis(0));
        let g = &mut grad[layout.b2()];
        for j in 0..layout.l2 {
            g[j] = db2[j];
        }
    }

    // Layer 1.
    let da1 = dz2.dot(&w2);
    let dz1 = Array2::from_shape_fn((batch, layout.l1), |(b, j)| {
        if fwd.a1[[b, j]] > 0.0 {
            da1[[b, j]]
        } else {
            0.0
        }
    });
    {
        let dw1 = dz1.t().dot(&xs);
        let g = &mut grad[layout.w1()];
        for (dst, src) in g.iter_mut().zip(dw1.iter()) {
            *dst = *src;
        }
        let db1 = dz1.sum_axis(Axis(0));
        let g = &mut grad[layout.b1()];
        for j in 0..layout.l1 {
            g[j] = db1[j];
        }
    }

    (loss, grad)
}

/// Xavier-uniform initialization: every weight within
/// ±√(6/(fan_in+fan_out)), biases zero.
fn init_nn_params(layout: &NnLayout, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut params = vec![0.0; layout.n_params()];
    let bounds = [
        (layout.w1(), layout.input, layout.l1),
        (layout.w2(), layout.l1, layout.l2),
        (layout.w3(), layout.l2, 1),
    ];
    for (range, fan_in, fan_out) in bounds {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in &mut params[range] {
            *v = rng.gen_range(-bound..bound);
        }
    }
    params
}

/// Train the two-hidden-layer classifier. The first layer has 64 units when
/// the input dimension exceeds 128 and 32 otherwise; the second always has
/// 8. With a validation set, training stops after `patience` epochs without
/// a validation-loss improvement and the best-validation parameters are
/// returned.
pub fn train_nn(
    features: ArrayView2<f64>,
    labels: &[u8],
    cfg: &NnConfig,
    validation: Option<(ArrayView2<f64>, &[u8])>,
) -> Result<NnModel, SvdNnError> {
    let (n, input) = features.dim();
    if n != labels.len() {
        return Err(SvdNnError::LabelCount {
            epochs: n,
            labels: labels.len(),
        });
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(SvdNnError::InvalidConfig(
            "epochs and batch size must be ≥ 1".into(),
        ));
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate > 0.0) {
        return Err(SvdNnError::InvalidConfig(format!(
            "learning rate must be positive, got {}",
            cfg.learning_rate
        )));
    }
    let n1 = labels.iter().filter(|&&l| l == 1).count();
    if n1 == 0 || n1 == n {
        return Err(SvdNnError::SingleClass);
    }
    if let Some((val_x, val_y)) = &validation {
        if val_x.nrows() != val_y.len() {
            return Err(SvdNnError::LabelCount {
                epochs: val_x.nrows(),
                labels: val_y.len(),
            });
        }
        if val_x.ncols() != input {
            return Err(SvdNnError::DimensionMismatch {
                expected: input,
                got: val_x.ncols(),
            });
        }
    }

    let layout = NnLayout {
        input,
        l1: layer1_width(input),
        l2: 8,
    };
    let dims = (layout.input, layout.l1, layout.l2);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = init_nn_params(&layout, &mut rng);
    let mut opt = Adam::new(layout.n_params(), cfg.learning_rate);

    let mut best_params = params.clone();
    let mut best_val = f64::INFINITY;
    let mut stagnant = 0usize;
    let mut epochs_run = 0usize;

    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch_x = features.select(Axis(0), chunk);
            let batch_y: Vec<u8> = chunk.iter().map(|&i| labels[i]).collect();
            let (loss, grad) = nn_loss_and_gradient(&params, dims, batch_x.view(), &batch_y);
            if !loss.is_finite() {
                return Err(SvdNnError::NonFiniteLoss { epoch: epoch + 1 });
            }
            opt.step(&mut params, &grad);
        }
        epochs_run = epoch + 1;
        if let Some((val_x, val_y)) = &validation {
            let val_loss = nn_loss(&params, dims, *val_x, val_y);
            if val_loss < best_val {
                best_val = val_loss;
                best_params.copy_from_slice(&params);
                stagnant = 0;
            } else {
                stagnant += 1;
                if stagnant >= cfg.patience {
                    break;
                }
            }
        }
    }

    let final_params = if validation.is_some() {
        best_params
    } else {
        params
    };
    let final_loss = nn_loss(&final_params, dims, features, labels);
    Ok(NnModel {
        input_dim: input,
        layer1: layout.l1,
        layer2: layout.l2,
        params: final_params,
        final_loss,
        epochs_run,
        config: cfg.clone(),
    })
}

/// Class-1 probability of one feature vector.
pub fn predict_nn(model: &NnModel, feature: ArrayView1<f64>) -> Result<f64, SvdNnError> {
    if feature.len() != model.input_dim {
        return Err(SvdNnError::DimensionMismatch {
            expected: model.input_dim,
            got: feature.len(),
        });
    }
    let batch = feature.insert_axis(Axis(0));
    Ok(predict_nn_batch(model, batch)?[0])
}

/// Class-1 probabilities for a feature matrix (one row per sample).
pub fn predict_nn_batch(
    model: &NnModel,
    features: ArrayView2<f64>,
) -> Result<Vec<f64>, SvdNnError> {
    if features.ncols() != model.input_dim {
        return Err(SvdNnError::DimensionMismatch {
            expected: model.input_dim,
            got: features.ncols(),
        });
    }
    let layout = NnLayout {
        input: model.input_dim,
        l1: model.layer1,
        l2: model.layer2,
    };
    let fwd = nn_forward(&model.params, &layout, features);
    Ok(fwd.logits.iter().map(|&z| sigmoid(z)).collect())
}

impl NnModel {
    /// Hard label: 1 iff the class-1 probability exceeds ½ (ties → 0).
    pub fn classify(&self, feature: ArrayView1<f64>) -> Result<u8, SvdNnError> {
        Ok(u8::from(predict_nn(self, feature)? > 0.5))
    }
}

fn accuracy(predicted: &[u8], labels: &[u8]) -> f64 {
    let correct = predicted.iter().zip(labels).filter(|(p, l)| p == l).count();
    correct as f64 / labels.len() as f64
}

/// Choose the subspace dimension on a validation split: for each candidate
/// `k` (fitted from the training rows only), train a network and keep the
/// `k` with the best validation accuracy; ties go to the smaller `k`.
pub fn select_k(
    train: &DesignMatrix,
    train_labels: &[u8],
    val: &DesignMatrix,
    val_labels: &[u8],
    grid: &[usize],
    cfg: &NnConfig,
) -> Result<usize, SvdNnError> {
    if grid.is_empty() {
        return Err(SvdNnError::EmptyGrid);
    }
    if train.n_epochs != train_labels.len() {
        return Err(SvdNnError::LabelCount {
            epochs: train.n_epochs,
            labels: train_labels.len(),
        });
    }
    if val.n_epochs != val_labels.len() {
        return Err(SvdNnError::LabelCount {
            epochs: val.n_epochs,
            labels: val_labels.len(),
        });
    }
    let max = train.matrix.nrows().min(train.width);
    let k_max = *grid.iter().max().unwrap();
    if grid.iter().any(|&k| k == 0 || k > max) {
        let bad = *grid.iter().find(|&&k| k == 0 || k > max).unwrap();
        return Err(SvdNnError::KOutOfRange { k: bad, max });
    }

    // One SVD serves the whole grid: every candidate basis is a truncation
    // of the widest one.
    let full = fit_basis(train, k_max)?;
    let mut candidates: Vec<usize> = grid.to_vec();
    candidates.sort_unstable();
    candidates.dedup();

    let mut best: Option<(usize, f64)> = None;
    for &k in &candidates {
        let basis = full.truncated(k)?;
        let train_feats = all_epoch_features(train, &basis);
        let val_feats = all_epoch_features(val, &basis);
        let model = train_nn(
            train_feats.view(),
            train_labels,
            cfg,
            Some((val_feats.view(), val_labels)),
        )?;
        let probs = predict_nn_batch(&model, val_feats.view())?;
        let predicted: Vec<u8> = probs.iter().map(|&p| u8::from(p > 0.5)).collect();
        let acc = accuracy(&predicted, val_labels);
        // Strict improvement required: with ascending candidates this
        // resolves accuracy ties toward the smaller k.
        if best.map_or(true, |(_, best_acc)| acc > best_acc) {
            best = Some((k, acc));
        }
    }
    Ok(best.unwrap().0)
}

fn push_u16(buf: &mut Vec<u8>, v: u16) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_f32(buf: &mut Vec<u8>, v: f32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

/// Serialize a trained network together with the basis that produced its
/// input features (f32 precision).
pub fn encode_nn(model: &NnModel, basis: &SvdBasis) -> Vec<u8> {
    let width = basis.v_k.nrows();
    let mut buf = Vec::with_capacity(64 + 4 * (model.params.len() + basis.k * (width + 1)));
    buf.extend_from_slice(BLOB_MAGIC);
    push_u16(&mut buf, BLOB_VERSION);
    push_u32(&mut buf, model.input_dim as u32);
    push_u32(&mut buf, model.layer1 as u32);
    push_u32(&mut buf, model.layer2 as u32);
    push_u32(&mut buf, model.params.len() as u32);
    push_u32(&mut buf, width as u32);
    push_u32(&mut buf, basis.k as u32);
    push_u32(&mut buf, model.config.epochs as u32);
    push_u32(&mut buf, model.config.batch_size as u32);
    push_u32(&mut buf, model.config.patience as u32);
    buf.extend_from_slice(&model.config.seed.to_le_bytes());
    push_f32(&mut buf, model.config.learning_rate as f32);
    push_f32(&mut buf, model.final_loss as f32);
    for &p in &model.params {
        push_f32(&mut buf, p as f32);
    }
    for &s in &basis.sigma {
        push_f32(&mut buf, s as f32);
    }
    for &v in basis.v_k.iter() {
        push_f32(&mut buf, v as f32);
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SvdNnError> {
        if self.pos + n > self.bytes.len() {
            return Err(SvdNnError::BadBlob(format!(
                "truncated: needed {} bytes at offset {}, have {}",
                n,
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, SvdNnError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, SvdNnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, SvdNnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, SvdNnError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Restore a network and its basis from an `MSNN` blob.
pub fn decode_nn(bytes: &[u8]) -> Result<(NnModel, SvdBasis), SvdNnError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != BLOB_MAGIC {
        return Err(SvdNnError::BadBlob("bad magic, expected MSNN".into()));
    }
    let version = r.u16()?;
    if version != BLOB_VERSION {
        return Err(SvdNnError::BadBlob(format!(
            "unsupported version {version}"
        )));
    }
    let input_dim = r.u32()? as usize;
    let layer1 = r.u32()? as usize;
    let layer2 = r.u32()? as usize;
    let n_params = r.u32()? as usize;
    let width = r.u32()? as usize;
    let k = r.u32()? as usize;
    let layout = NnLayout {
        input: input_dim,
        l1: layer1,
        l2: layer2,
    };
    if n_params != layout.n_params() {
        return Err(SvdNnError::BadBlob(format!(
            "parameter count {} does not match architecture {}-{}-{} (expected {})",
            n_params,
            input_dim,
            layer1,
            layer2,
            layout.n_params()
        )));
    }
    let epochs = r.u32()? as usize;
    let batch_size = r.u32()? as usize;
    let patience = r.u32()? as usize;
    let seed = r.u64()?;
    let learning_rate = f64::from(r.f32()?);
    let final_loss = f64::from(r.f32()?);
    let mut params = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        params.push(f64::from(r.f32()?));
    }
    let mut sigma = Vec::with_capacity(k);
    for _ in 0..k {
        sigma.push(f64::from(r.f32()?));
    }
    let mut v_k = Array2::<f64>::zeros((width, k));
    for i in 0..width {
        for j in 0..k {
            v_k[[i, j]] = f64::from(r.f32()?);
        }
    }
    if r.pos != bytes.len() {
        return Err(SvdNnError::BadBlob(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok((
        NnModel {
            input_dim,
            layer1,
            layer2,
            params,
            final_loss,
            epochs_run: epochs,
            config: NnConfig {
                epochs,
                learning_rate,
                batch_size,
                patience,
                seed,
            },
        },
        SvdBasis { v_k, sigma, k },
    ))
}
