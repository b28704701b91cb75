//! Single-layer LSTM over scalar sequences.
//!
//! This is the sequence stage of the CSP-LDA-LSTM pipeline: each 256-sample
//! epoch is cut into four 64-sample sub-epochs, every sub-epoch is reduced to
//! one scalar (CSP log-variance features → LDA projection), and the resulting
//! length-4 sequences feed a 200-unit LSTM with a logistic output head,
//! trained with backpropagation through time, Adam, and binary cross-entropy.
//!
//! Training is deliberately minimal: full-precision f64 math, seeded
//! shuffling, no dropout or clipping. All heavy steps are batched
//! matrix-matrix products so a single core handles the cross-validation
//! volume.
//!
//! # Serialized form
//!
//! [`encode_lstm`] emits a versioned little-endian blob:
//!
//! ```text
//! magic "MLSM" | version u16 | hidden u32 | n_params u32 |
//! epochs u32 | batch u32 | seed u64 | learning_rate f32 |
//! params (n_params × f32)
//! ```
//!
//! Parameters are quantized to f32; the training loss curve is not stored.

use crate::adam::Adam;
use crate::csp::{log_variance_features, CspError, SpatialFilterBank};
use crate::lda::LdaModel;
use crate::types::{Epoch, EpochSet};
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Sub-epoch length for sequence construction: a 256-sample window becomes
/// four sub-epochs of this many samples.
pub const SUB_EPOCH_LEN: usize = 64;

const BLOB_MAGIC: &[u8; 4] = b"MLSM";
const BLOB_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum LstmError {
    #[error("epoch length {epoch_len} is not divisible by the sub-epoch length {sub_len}")]
    LengthNotDivisible { epoch_len: usize, sub_len: usize },
    #[error("no sequences to train on")]
    EmptyTrainingSet,
    #[error("training sequences contain only one class")]
    SingleClass,
    #[error("sequence length {got} differs from expected {expected}")]
    UnequalLengths { expected: usize, got: usize },
    #[error("sequence values must be finite")]
    NonFiniteInput,
    #[error("training loss became non-finite during epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("feature computation failed: {0}")]
    Feature(#[from] CspError),
    #[error("model blob rejected: {0}")]
    BadBlob(String),
}

/// One training/evaluation item: the per-sub-epoch scalars of a single
/// parent window, in time order.
#[derive(Debug, Clone)]
pub struct ScalarSequence {
    pub values: Vec<f64>,
    /// 0 = rest, 1 = meditation.
    pub label: u8,
    pub subject_id: String,
}

/// Training hyperparameters. Defaults follow the reference pipeline:
/// 200 hidden units, 20 epochs, Adam at 0.001, batches of 32.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for LstmConfig {
    fn default() -> LstmConfig {
        LstmConfig {
            hidden: 200,
            epochs: 20,
            learning_rate: 1e-3,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// A trained LSTM classifier over scalar sequences.
#[derive(Debug, Clone)]
pub struct LstmModel {
    pub hidden: usize,
    /// Flat parameter vector; see [`Layout`] for the block order.
    pub params: Vec<f64>,
    /// Mean training loss before training (index 0) and after each epoch.
    /// Empty on models restored from a serialized blob.
    pub loss_curve: Vec<f64>,
    pub config: LstmConfig,
}

/// Block offsets inside the flat parameter vector. Gates are ordered
/// input, forget, cell candidate, output; per gate the input weight block
/// has `hidden` entries (scalar input), the recurrent block `hidden²`, the
/// bias block `hidden`. The output head (`hidden` weights + 1 bias) sits at
/// the end.
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub hidden: usize,
}

impl Layout {
    pub fn n_params(&self) -> usize {
        let h = self.hidden;
        4 * h * h + 9 * h + 1
    }

    fn wx(&self, gate: usize) -> std::ops::Range<usize> {
        let h = self.hidden;
        gate * h..(gate + 1) * h
    }

    fn wh(&self, gate: usize) -> std::ops::Range<usize> {
        let h = self.hidden;
        let base = 4 * h;
        base + gate * h * h..base + (gate + 1) * h * h
    }

    fn bias(&self, gate: usize) -> std::ops::Range<usize> {
        let h = self.hidden;
        let base = 4 * h + 4 * h * h;
        base + gate * h..base + (gate + 1) * h
    }

    fn w_out(&self) -> std::ops::Range<usize> {
        let h = self.hidden;
        let base = 8 * h + 4 * h * h;
        base..base + h
    }

    fn b_out(&self) -> usize {
        self.n_params() - 1
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// ln(1 + eᶻ), stable for large |z|.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Everything the backward pass needs from one forward sweep.
struct ForwardStash {
    // Indexed by timestep; each entry is batch × hidden.
    i: Vec<Array2<f64>>,
    f: Vec<Array2<f64>>,
    g: Vec<Array2<f64>>,
    o: Vec<Array2<f64>>,
    c: Vec<Array2<f64>>,
    tanh_c: Vec<Array2<f64>>,
    h: Vec<Array2<f64>>,
    logits: Array1<f64>,
}

/// Gate pre-activations for timestep `t`: x_t ⊗ w_x + h_prev·W_hᵀ + b.
fn gate_pre(
    params: &[f64],
    layout: &Layout,
    gate: usize,
    x_t: &Array1<f64>,
    h_prev: &Array2<f64>,
) -> Array2<f64> {
    let h = layout.hidden;
    let wh = ArrayView2::from_shape((h, h), &params[layout.wh(gate)]).unwrap();
    let wx = &params[layout.wx(gate)];
    let bias = &params[layout.bias(gate)];
    let mut pre = h_prev.dot(&wh.t());
    for (b, mut row) in pre.rows_mut().into_iter().enumerate() {
        let x = x_t[b];
        for (j, v) in row.iter_mut().enumerate() {
            *v += x * wx[j] + bias[j];
        }
    }
    pre
}

fn forward(params: &[f64], layout: &Layout, xs: ArrayView2<f64>) -> ForwardStash {
    let (batch, steps) = xs.dim();
    let h = layout.hidden;
    let mut stash = ForwardStash {
        i: Vec::with_capacity(steps),
        f: Vec::with_capacity(steps),
        g: Vec::with_capacity(steps),
        o: Vec::with_capacity(steps),
        c: Vec::with_capacity(steps),
        tanh_c: Vec::with_capacity(steps),
        h: Vec::with_capacity(steps),
        logits: Array1::zeros(batch),
    };
    let mut h_prev = Array2::<f64>::zeros((batch, h));
    let mut c_prev = Array2::<f64>::zeros((batch, h));
    for t in 0..steps {
        let x_t = xs.column(t).to_owned();
        let i = gate_pre(params, layout, 0, &x_t, &h_prev).mapv_into(sigmoid);
        let f = gate_pre(params, layout, 1, &x_t, &h_prev).mapv_into(sigmoid);
        let g = gate_pre(params, layout, 2, &x_t, &h_prev).mapv_into(f64::tanh);
        let o = gate_pre(params, layout, 3, &x_t, &h_prev).mapv_into(sigmoid);
        let c = &f * &c_prev + &i * &g;
        let tanh_c = c.mapv(f64::tanh);
        let h_t = &o * &tanh_c;
        stash.i.push(i);
        stash.f.push(f);
        stash.g.push(g);
        stash.o.push(o);
        stash.c.push(c.clone());
        stash.tanh_c.push(tanh_c);
        stash.h.push(h_t.clone());
        h_prev = h_t;
        c_prev = c;
    }
    let w_out = &params[layout.w_out()];
    let b_out = params[layout.b_out()];
    for b in 0..batch {
        let mut z = b_out;
        for j in 0..h {
            z += h_prev[[b, j]] * w_out[j];
        }
        stash.logits[b] = z;
    }
    stash
}

/// Lean forward pass that keeps only the rolling state; returns logits.
fn forward_logits(params: &[f64], layout: &Layout, xs: ArrayView2<f64>) -> Array1<f64> {
    let (batch, steps) = xs.dim();
    let h = layout.hidden;
    let mut h_prev = Array2::<f64>::zeros((batch, h));
    let mut c_prev = Array2::<f64>::zeros((batch, h));
    for t in 0..steps {
        let x_t = xs.column(t).to_owned();
        let i = gate_pre(params, layout, 0, &x_t, &h_prev).mapv_into(sigmoid);
        let f = gate_pre(params, layout, 1, &x_t, &h_prev).mapv_into(sigmoid);
        let g = gate_pre(params, layout, 2, &x_t, &h_prev).mapv_into(f64::tanh);
        let o = gate_pre(params, layout, 3, &x_t, &h_prev).mapv_into(sigmoid);
        c_prev = &f * &c_prev + &i * &g;
        h_prev = &o * &c_prev.mapv(f64::tanh);
    }
    let w_out = &params[layout.w_out()];
    let b_out = params[layout.b_out()];
    Array1::from_shape_fn(batch, |b| {
        let mut z = b_out;
        for j in 0..h {
            z += h_prev[[b, j]] * w_out[j];
        }
        z
    })
}

fn mean_bce_from_logits(logits: &Array1<f64>, labels: &[u8]) -> f64 {
    let n = labels.len() as f64;
    logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| softplus(z) - f64::from(y) * z)
        .sum::<f64>()
        / n
}

/// Mean binary cross-entropy of a parameter vector on a batch of sequences
/// (rows of `xs`). Exposed so external checks can compare the analytic
/// gradient against finite differences.
pub fn sequence_loss(
    params: &[f64],
    hidden: usize,
    xs: ArrayView2<f64>,
    labels: &[u8],
) -> f64 {
    let layout = Layout { hidden };
    assert_eq!(params.len(), layout.n_params(), "parameter vector size");
    assert_eq!(xs.nrows(), labels.len(), "batch size");
    let logits = forward_logits(params, &layout, xs);
    mean_bce_from_logits(&logits, labels)
}

/// Mean BCE loss and its gradient with respect to every parameter,
/// via backpropagation through time.
pub fn loss_and_gradient(
    params: &[f64],
    hidden: usize,
    xs: ArrayView2<f64>,
    labels: &[u8],
) -> (f64, Vec<f64>) {
    let layout = Layout { hidden };
    assert_eq!(params.len(), layout.n_params(), "parameter vector size");
    assert_eq!(xs.nrows(), labels.len(), "batch size");
    let (batch, steps) = xs.dim();
    let h = layout.hidden;
    let stash = forward(params, &layout, xs);
    let loss = mean_bce_from_logits(&stash.logits, labels);

    let mut grad = vec![0.0; layout.n_params()];
    let probs = stash.logits.mapv(sigmoid);
    let dlogit = Array1::from_shape_fn(batch, |b| {
        (probs[b] - f64::from(labels[b])) / batch as f64
    });

    let h_last = &stash.h[steps - 1];
    {
        let w_out_grad = &mut grad[layout.w_out()];
        for b in 0..batch {
            for j in 0..h {
                w_out_grad[j] += dlogit[b] * h_last[[b, j]];
            }
        }
    }
    grad[layout.b_out()] = dlogit.sum();

    let w_out = &params[layout.w_out()];
    let mut dh = Array2::from_shape_fn((batch, h), |(b, j)| dlogit[b] * w_out[j]);
    let mut dc = Array2::<f64>::zeros((batch, h));
    let zeros = Array2::<f64>::zeros((batch, h));

    for t in (0..steps).rev() {
        let (i, f, g, o) = (&stash.i[t], &stash.f[t], &stash.g[t], &stash.o[t]);
        let tanh_c = &stash.tanh_c[t];
        let c_prev = if t > 0 { &stash.c[t - 1] } else { &zeros };
        let h_prev = if t > 0 { &stash.h[t - 1] } else { &zeros };

        let d_o = &dh * tanh_c * o * &o.mapv(|v| 1.0 - v);
        dc = dc + &dh * o * &tanh_c.mapv(|v| 1.0 - v * v);
        let d_i = &dc * g * i * &i.mapv(|v| 1.0 - v);
        let d_f = &dc * c_prev * f * &f.mapv(|v| 1.0 - v);
        let d_g = &dc * i * &g.mapv(|v| 1.0 - v * v);

        let x_t = xs.column(t);
        let mut dh_prev = Array2::<f64>::zeros((batch, h));
        for (gate, dpre) in [d_i, d_f, d_g, d_o].iter().enumerate() {
            {
                let wx_grad = &mut grad[layout.wx(gate)];
                for b in 0..batch {
                    let x = x_t[b];
                    for j in 0..h {
                        wx_grad[j] += dpre[[b, j]] * x;
                    }
                }
            }
            {
                let dwh = dpre.t().dot(h_prev); // hidden × hidden
                let wh_grad = &mut grad[layout.wh(gate)];
                for (dst, src) in wh_grad.iter_mut().zip(dwh.iter()) {
                    *dst += src;
                }
            }
            {
                let db = dpre.sum_axis(Axis(0));
                let b_grad = &mut grad[layout.bias(gate)];
                for j in 0..h {
                    b_grad[j] += db[j];
                }
            }
            let wh = ArrayView2::from_shape((h, h), &params[layout.wh(gate)]).unwrap();
            dh_prev = dh_prev + dpre.dot(&wh);
        }
        dc = dc * f;
        dh = dh_prev;
    }

    (loss, grad)
}

/// Seeded initialization: gate weights uniform within ±1/√fan_in, biases
/// zero except the forget gate's (+1, the usual remedy against early
/// vanishing memories).
fn init_params(layout: &Layout, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let h = layout.hidden;
    let mut params = vec![0.0; layout.n_params()];
    let rec_bound = 1.0 / (h as f64).sqrt();
    for gate in 0..4 {
        for v in &mut params[layout.wx(gate)] {
            *v = rng.gen_range(-1.0..1.0);
        }
        for v in &mut params[layout.wh(gate)] {
            *v = rng.gen_range(-rec_bound..rec_bound);
        }
    }
    for v in &mut params[layout.bias(1)] {
        *v = 1.0;
    }
    for v in &mut params[layout.w_out()] {
        *v = rng.gen_range(-rec_bound..rec_bound);
    }
    params
}

fn sequences_to_matrix(seqs: &[ScalarSequence]) -> Result<(Array2<f64>, Vec<u8>), LstmError> {
    if seqs.is_empty() {
        return Err(LstmError::EmptyTrainingSet);
    }
    let steps = seqs[0].values.len();
    if steps == 0 {
        return Err(LstmError::UnequalLengths {
            expected: 1,
            got: 0,
        });
    }
    let mut xs = Array2::<f64>::zeros((seqs.len(), steps));
    let mut labels = Vec::with_capacity(seqs.len());
    for (row, seq) in seqs.iter().enumerate() {
        if seq.values.len() != steps {
            return Err(LstmError::UnequalLengths {
                expected: steps,
                got: seq.values.len(),
            });
        }
        if seq.values.iter().any(|v| !v.is_finite()) {
            return Err(LstmError::NonFiniteInput);
        }
        for (col, &v) in seq.values.iter().enumerate() {
            xs[[row, col]] = v;
        }
        labels.push(seq.label);
    }
    Ok((xs, labels))
}

/// Train an LSTM classifier on uniform-length scalar sequences.
pub fn train_lstm(seqs: &[ScalarSequence], cfg: &LstmConfig) -> Result<LstmModel, LstmError> {
    if cfg.hidden == 0 || cfg.batch_size == 0 {
        return Err(LstmError::InvalidConfig(
            "hidden size and batch size must be ≥ 1".into(),
        ));
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate > 0.0) {
        return Err(LstmError::InvalidConfig(format!(
            "learning rate must be positive, got {}",
            cfg.learning_rate
        )));
    }
    let (xs, labels) = sequences_to_matrix(seqs)?;
    let n1 = labels.iter().filter(|&&l| l == 1).count();
    if n1 == 0 || n1 == labels.len() {
        return Err(LstmError::SingleClass);
    }

    let layout = Layout { hidden: cfg.hidden };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = init_params(&layout, &mut rng);
    let mut opt = Adam::new(layout.n_params(), cfg.learning_rate);

    let full_loss = |params: &[f64]| {
        mean_bce_from_logits(&forward_logits(params, &layout, xs.view()), &labels)
    };
    let mut loss_curve = vec![full_loss(&params)];

    let mut order: Vec<usize> = (0..seqs.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch_xs = xs.select(Axis(0), chunk);
            let batch_labels: Vec<u8> = chunk.iter().map(|&i| labels[i]).collect();
            let (_, grad) =
                loss_and_gradient(&params, cfg.hidden, batch_xs.view(), &batch_labels);
            opt.step(&mut params, &grad);
        }
        let loss = full_loss(&params);
        if !loss.is_finite() {
            return Err(LstmError::NonFiniteLoss { epoch: epoch + 1 });
        }
        loss_curve.push(loss);
    }

    Ok(LstmModel {
        hidden: cfg.hidden,
        params,
        loss_curve,
        config: cfg.clone(),
    })
}

/// Probability that one sequence belongs to class 1.
pub fn predict_lstm(model: &LstmModel, seq: &ScalarSequence) -> Result<f64, LstmError> {
    Ok(predict_batch(model, std::slice::from_ref(seq))?[0])
}

/// Class-1 probabilities for a batch of uniform-length sequences.
pub fn predict_batch(model: &LstmModel, seqs: &[ScalarSequence]) -> Result<Vec<f64>, LstmError> {
    let (xs, _) = sequences_to_matrix(seqs)?;
    let layout = Layout {
        hidden: model.hidden,
    };
    let logits = forward_logits(&model.params, &layout, xs.view());
    Ok(logits.iter().map(|&z| sigmoid(z)).collect())
}

impl LstmModel {
    /// Hard label: 1 iff the class-1 probability exceeds ½ (ties → 0).
    pub fn classify(&self, seq: &ScalarSequence) -> Result<u8, LstmError> {
        Ok(u8::from(predict_lstm(self, seq)? > 0.5))
    }
}

/// Split every epoch of a set into consecutive `SUB_EPOCH_LEN`-sample
/// sub-epochs (re-centered per channel). Sub-epochs inherit the parent's
/// label, subject and window index, so lineage ids trace back to the parent.
pub fn split_sub_epochs(set: &EpochSet) -> Result<EpochSet, LstmError> {
    let epoch_len = set.epoch_len();
    if epoch_len % SUB_EPOCH_LEN != 0 {
        return Err(LstmError::LengthNotDivisible {
            epoch_len,
            sub_len: SUB_EPOCH_LEN,
        });
    }
    let steps = epoch_len / SUB_EPOCH_LEN;
    let mut subs = Vec::with_capacity(set.len() * steps);
    for epoch in set.epochs() {
        for t in 0..steps {
            let window = epoch
                .data
                .slice(s![.., t * SUB_EPOCH_LEN..(t + 1) * SUB_EPOCH_LEN]);
            subs.push(Epoch::from_window(
                window,
                epoch.label,
                epoch.subject_id.clone(),
                epoch.parent_index,
            ));
        }
    }
    EpochSet::new(subs).map_err(|e| LstmError::InvalidConfig(e.to_string()))
}

/// Turn each epoch into one scalar sequence: per sub-epoch, CSP log-variance
/// features projected to a scalar by the fitted LDA. The bank and LDA must
/// come from training-fold sub-epochs only; this function just applies them.
pub fn build_sequences(
    set: &EpochSet,
    bank: &SpatialFilterBank,
    lda: &LdaModel,
) -> Result<Vec<ScalarSequence>, LstmError> {
    let epoch_len = set.epoch_len();
    if epoch_len % SUB_EPOCH_LEN != 0 {
        return Err(LstmError::LengthNotDivisible {
            epoch_len,
            sub_len: SUB_EPOCH_LEN,
        });
    }
    let steps = epoch_len / SUB_EPOCH_LEN;
    let mut seqs = Vec::with_capacity(set.len());
    for epoch in set.epochs() {
        let mut values = Vec::with_capacity(steps);
        for t in 0..steps {
            let window = epoch
                .data
                .slice(s![.., t * SUB_EPOCH_LEN..(t + 1) * SUB_EPOCH_LEN]);
            let sub = Epoch::from_window(
                window,
                epoch.label,
                epoch.subject_id.clone(),
                epoch.parent_index,
            );
            let features = log_variance_features(bank, &sub)?;
            values.push(lda.project(features.view()));
        }
        seqs.push(ScalarSequence {
            values,
            label: epoch.label.label(),
            subject_id: epoch.subject_id.clone(),
        });
    }
    Ok(seqs)
}

fn push_u16(buf: &mut Vec<u8>, v: u16) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

/// Serialize a model to the `MLSM` blob format (f32 parameter precision).
pub fn encode_lstm(model: &LstmModel) -> Vec<u8> {
    let mut buf = Vec::with_capacity(32 + 4 * model.params.len());
    buf.extend_from_slice(BLOB_MAGIC);
    push_u16(&mut buf, BLOB_VERSION);
    push_u32(&mut buf, model.hidden as u32);
    push_u32(&mut buf, model.params.len() as u32);
    push_u32(&mut buf, model.config.epochs as u32);
    push_u32(&mut buf, model.config.batch_size as u32);
    buf.extend_from_slice(&model.config.seed.to_le_bytes());
    buf.extend_from_slice(&(model.config.learning_rate as f32).to_le_bytes());
    for &p in &model.params {
        buf.extend_from_slice(&(p as f32).to_le_bytes());
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LstmError> {
        if self.pos + n > self.bytes.len() {
            return Err(LstmError::BadBlob(format!(
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

    fn u16(&mut self) -> Result<u16, LstmError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, LstmError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, LstmError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, LstmError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Restore a model from its `MLSM` blob. The loss curve is not stored and
/// comes back empty.
pub fn decode_lstm(bytes: &[u8]) -> Result<LstmModel, LstmError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != BLOB_MAGIC {
        return Err(LstmError::BadBlob("bad magic, expected MLSM".into()));
    }
    let version = r.u16()?;
    if version != BLOB_VERSION {
        return Err(LstmError::BadBlob(format!(
            "unsupported version {version}"
        )));
    }
    let hidden = r.u32()? as usize;
    let n_params = r.u32()? as usize;
    let layout = Layout { hidden };
    if n_params != layout.n_params() {
        return Err(LstmError::BadBlob(format!(
            "parameter count {} does not match hidden size {} (expected {})",
            n_params,
            hidden,
            layout.n_params()
        )));
    }
    let epochs = r.u32()? as usize;
    let batch_size = r.u32()? as usize;
    let seed = r.u64()?;
    let learning_rate = f64::from(r.f32()?);
    let mut params = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        params.push(f64::from(r.f32()?));
    }
    if r.pos != bytes.len() {
        return Err(LstmError::BadBlob(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(LstmModel {
        hidden,
        params,
        loss_curve: Vec::new(),
        config: LstmConfig {
            hidden,
            epochs,
            learning_rate,
            batch_size,
            seed,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Condition;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;

    fn constant_sequences(n: usize, value: f64, label: u8) -> Vec<ScalarSequence> {
        (0..n)
            .map(|k| ScalarSequence {
                values: vec![value; 4],
                label,
                subject_id: format!("s{k}"),
            })
            .collect()
    }

    fn quick_config(hidden: usize, seed: u64) -> LstmConfig {
        LstmConfig {
            hidden,
            seed,
            ..LstmConfig::default()
        }
    }

    #[test]
    fn gradients_match_central_finite_differences() {
        let hidden = 2;
        let layout = Layout { hidden };
        let step = 1e-5;
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let mut params: Vec<f64> = (0..layout.n_params())
                .map(|_| rng.gen_range(-0.5..0.5))
                .collect();
            let xs = Array2::from_shape_fn((4, 3), |_| rng.gen_range(-1.0..1.0));
            let labels: Vec<u8> = (0..4).map(|_| u8::from(rng.gen_bool(0.5))).collect();

            let (_, analytic) = loss_and_gradient(&params, hidden, xs.view(), &labels);
            for p in 0..layout.n_params() {
                let orig = params[p];
                params[p] = orig + step;
                let up = sequence_loss(&params, hidden, xs.view(), &labels);
                params[p] = orig - step;
                let down = sequence_loss(&params, hidden, xs.view(), &labels);
                params[p] = orig;
                let numeric = (up - down) / (2.0 * step);
                let denom = analytic[p].abs().max(numeric.abs()).max(1e-8);
                let rel = (analytic[p] - numeric).abs() / denom;
                assert!(
                    rel <= 1e-4,
                    "seed {seed} param {p}: analytic {} vs numeric {numeric}",
                    analytic[p]
                );
            }
        }
    }

    #[test]
    fn separable_sequences_train_to_high_accuracy() {
        let mut seqs = constant_sequences(200, 1.0, 1);
        seqs.extend(constant_sequences(200, -1.0, 0));
        let model = train_lstm(&seqs, &quick_config(16, 7)).unwrap();

        let correct = seqs
            .iter()
            .filter(|s| model.classify(s).unwrap() == s.label)
            .count();
        assert!(correct as f64 / seqs.len() as f64 >= 0.99);

        // Training must actually reduce the loss from its initial value…
        assert!(model.loss_curve[1] < model.loss_curve[0]);
        // …and the positive class should end up confidently positive.
        let mean_p: f64 = seqs[..200]
            .iter()
            .map(|s| predict_lstm(&model, s).unwrap())
            .sum::<f64>()
            / 200.0;
        assert!(mean_p >= 0.9, "mean class-1 probability {mean_p}");
    }

    #[test]
    fn identical_sequences_with_mixed_labels_sit_at_chance() {
        let mut seqs = constant_sequences(50, 0.3, 1);
        seqs.extend(constant_sequences(50, 0.3, 0));
        let model = train_lstm(&seqs, &quick_config(8, 3)).unwrap();
        let correct = seqs
            .iter()
            .filter(|s| model.classify(s).unwrap() == s.label)
            .count();
        let acc = correct as f64 / seqs.len() as f64;
        assert!((0.4..=0.6).contains(&acc), "accuracy {acc}");
    }

    #[test]
    fn zero_parameters_predict_exactly_half() {
        let layout = Layout { hidden: 5 };
        let model = LstmModel {
            hidden: 5,
            params: vec![0.0; layout.n_params()],
            loss_curve: Vec::new(),
            config: quick_config(5, 0),
        };
        let seq = ScalarSequence {
            values: vec![2.0, -3.0, 0.5, 1.0],
            label: 1,
            subject_id: "s".into(),
        };
        assert_abs_diff_eq!(predict_lstm(&model, &seq).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(model.classify(&seq).unwrap(), 0, "tie resolves to class 0");
    }

    #[test]
    fn probabilities_stay_strictly_inside_unit_interval() {
        let layout = Layout { hidden: 4 };
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let params: Vec<f64> = (0..layout.n_params())
            .map(|_| rng.gen_range(-3.0..3.0))
            .collect();
        let model = LstmModel {
            hidden: 4,
            params,
            loss_curve: Vec::new(),
            config: quick_config(4, 0),
        };
        for _ in 0..50 {
            let seq = ScalarSequence {
                values: (0..4).map(|_| rng.gen_range(-10.0..10.0)).collect(),
                label: 0,
                subject_id: "s".into(),
            };
            let p = predict_lstm(&model, &seq).unwrap();
            assert!(p > 0.0 && p < 1.0, "probability {p}");
        }
    }

    #[test]
    fn gate_activations_stay_in_their_squash_ranges() {
        let hidden = 3;
        let layout = Layout { hidden };
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let params: Vec<f64> = (0..layout.n_params())
            .map(|_| rng.gen_range(-2.0..2.0))
            .collect();
        let xs = Array2::from_shape_fn((6, 4), |_| rng.gen_range(-5.0..5.0));
        let stash = forward(&params, &layout, xs.view());
        for t in 0..4 {
            for v in stash.i[t].iter().chain(&stash.f[t]).chain(&stash.o[t]) {
                assert!(*v > 0.0 && *v < 1.0);
            }
            for v in &stash.g[t] {
                assert!(*v > -1.0 && *v < 1.0);
            }
        }
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let mut seqs = constant_sequences(30, 1.0, 1);
        seqs.extend(constant_sequences(30, -1.0, 0));
        let a = train_lstm(&seqs, &quick_config(6, 11)).unwrap();
        let b = train_lstm(&seqs, &quick_config(6, 11)).unwrap();
        assert!(a
            .params
            .iter()
            .zip(&b.params)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = train_lstm(&seqs, &quick_config(6, 12)).unwrap();
        assert!(a.params.iter().zip(&c.params).any(|(x, y)| x != y));
    }

    #[test]
    fn training_input_validation() {
        assert!(matches!(
            train_lstm(&[], &quick_config(4, 0)),
            Err(LstmError::EmptyTrainingSet)
        ));
        let one_class = constant_sequences(10, 1.0, 1);
        assert!(matches!(
            train_lstm(&one_class, &quick_config(4, 0)),
            Err(LstmError::SingleClass)
        ));
        let mut ragged = constant_sequences(2, 1.0, 1);
        ragged.push(ScalarSequence {
            values: vec![0.0; 3],
            label: 0,
            subject_id: "s".into(),
        });
        assert!(matches!(
            train_lstm(&ragged, &quick_config(4, 0)),
            Err(LstmError::UnequalLengths { expected: 4, got: 3 })
        ));
        let mut bad = constant_sequences(1, 1.0, 1);
        bad.push(ScalarSequence {
            values: vec![f64::NAN; 4],
            label: 0,
            subject_id: "s".into(),
        });
        assert!(matches!(
            train_lstm(&bad, &quick_config(4, 0)),
            Err(LstmError::NonFiniteInput)
        ));
    }

    fn identity_pipeline(channels: usize) -> (SpatialFilterBank, LdaModel) {
        let bank = SpatialFilterBank {
            filters: Array2::eye(channels),
            objective_values: vec![1.0; channels],
            n_pairs: channels / 2,
            alpha: 0.0,
        };
        let lda = LdaModel {
            direction: ndarray::Array1::from_elem(channels, 1.0 / (channels as f64).sqrt()),
            threshold: 0.0,
        };
        (bank, lda)
    }

    fn periodic_epoch_set(n_epochs: usize, epoch_len: usize) -> EpochSet {
        // Period-64 waveform, so every 64-sample sub-epoch is identical.
        let epochs: Vec<Epoch> = (0..n_epochs)
            .map(|k| {
                let data = Array2::from_shape_fn((2, epoch_len), |(c, t)| {
                    ((t % SUB_EPOCH_LEN) as f64 * 0.2 + c as f64) .sin()
                });
                Epoch::from_window(
                    data.view(),
                    if k % 2 == 0 {
                        Condition::Rest
                    } else {
                        Condition::Meditation
                    },
                    "subj",
                    k,
                )
            })
            .collect();
        EpochSet::new(epochs).unwrap()
    }

    #[test]
    fn sequences_have_one_entry_per_sub_epoch() {
        let set = periodic_epoch_set(50, 256);
        let (bank, lda) = identity_pipeline(2);
        let seqs = build_sequences(&set, &bank, &lda).unwrap();
        assert_eq!(seqs.len(), 50, "one sequence per epoch");
        for (seq, epoch) in seqs.iter().zip(set.epochs()) {
            assert_eq!(seq.values.len(), 4, "256 samples → four sub-epochs");
            assert_eq!(seq.label, epoch.label.label());
            // Period-64 input ⇒ all four sub-epochs identical ⇒ constant
            // sequence.
            for v in &seq.values[1..] {
                assert_abs_diff_eq!(*v, seq.values[0], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn indivisible_epoch_length_is_rejected() {
        let set = periodic_epoch_set(4, 100);
        let (bank, lda) = identity_pipeline(2);
        assert!(matches!(
            build_sequences(&set, &bank, &lda),
            Err(LstmError::LengthNotDivisible { epoch_len: 100, sub_len: 64 })
        ));
        assert!(matches!(
            split_sub_epochs(&set),
            Err(LstmError::LengthNotDivisible { .. })
        ));
    }

    #[test]
    fn sub_epochs_keep_lineage_and_multiply_counts() {
        let set = periodic_epoch_set(6, 256);
        let subs = split_sub_epochs(&set).unwrap();
        assert_eq!(subs.len(), 24);
        assert_eq!(subs.epoch_len(), SUB_EPOCH_LEN);
        // Four sub-epochs share each parent's lineage id.
        for (k, parent) in set.epochs().iter().enumerate() {
            for t in 0..4 {
                assert_eq!(subs.epochs()[4 * k + t].lineage_id(), parent.lineage_id());
            }
        }
    }

    #[test]
    fn blob_round_trip_preserves_f32_parameters() {
        let mut seqs = constant_sequences(20, 1.0, 1);
        seqs.extend(constant_sequences(20, -1.0, 0));
        let model = train_lstm(&seqs, &quick_config(3, 5)).unwrap();
        let blob = encode_lstm(&model);
        let restored = decode_lstm(&blob).unwrap();
        assert_eq!(restored.hidden, model.hidden);
        assert_eq!(restored.config.epochs, model.config.epochs);
        assert_eq!(restored.config.batch_size, model.config.batch_size);
        assert_eq!(restored.config.seed, model.config.seed);
        // The blob stores f32s, so the restored learning rate is quantized.
        assert_eq!(
            restored.config.learning_rate,
            f64::from(model.config.learning_rate as f32)
        );
        for (orig, restored) in model.params.iter().zip(&restored.params) {
            assert_eq!(*restored, f64::from(*orig as f32));
        }
        // Stable fixed point: re-encoding the restored model is bit-identical.
        assert_eq!(encode_lstm(&restored), blob);
    }

    #[test]
    fn malformed_blobs_are_rejected() {
        assert!(matches!(
            decode_lstm(b"????rest"),
            Err(LstmError::BadBlob(_))
        ));
        let mut seqs = constant_sequences(4, 1.0, 1);
        seqs.extend(constant_sequences(4, -1.0, 0));
        let model = train_lstm(&seqs, &quick_config(2, 5)).unwrap();
        let blob = encode_lstm(&model);
        assert!(matches!(
            decode_lstm(&blob[..blob.len() - 3]),
            Err(LstmError::BadBlob(_))
        ));
        let mut trailing = blob.clone();
        trailing.push(0);
        assert!(matches!(decode_lstm(&trailing), Err(LstmError::BadBlob(_))));
    }
}
