//! The learned spectral representation: a single-layer SeLU perceptron over
//! the resampled spectrum, co-trained with a throwaway linear classifier.
//!
//! `σ = ψ(W λ̃ + b)` with `ψ` the SeLU non-linearity. Training needs no real
//! data: a corpus of Erdős–Rényi and stochastic-block-model graphs is
//! generated on the fly and a 2-class softmax head is fitted jointly with
//! `(W, b)` by minimizing cross-entropy with mini-batch SGD. The head is
//! discarded after training; `(W, b)` is the representation.

use crate::rng::{self, derive_seed, seeded_rng};
use crate::spectrum::{collection_interpolated_spectra, EigsConfig, InterpolatedSpectrum};
use crate::synthetic::{generate_training_corpus, CorpusConfig};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// SeLU scale constant.
pub const SELU_SCALE: f64 = 1.050_700_987_355_480_5;
/// SeLU alpha constant.
pub const SELU_ALPHA: f64 = 1.673_263_242_354_377_2;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("input length {got} does not match the model grid size {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Synthetic(#[from] crate::synthetic::SyntheticError),
    #[error(transparent)]
    Spectrum(#[from] crate::spectrum::SpectrumError),
    #[error("cannot access model file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed model file: {0}")]
    Format(String),
}

/// Element-wise SeLU: `scale * x` for positive `x`, scaled shifted
/// exponential otherwise. Continuous and strictly increasing.
pub fn selu(x: f64) -> f64 {
    if x > 0.0 {
        SELU_SCALE * x
    } else {
        SELU_SCALE * SELU_ALPHA * (x.exp() - 1.0)
    }
}

fn selu_derivative(x: f64) -> f64 {
    if x > 0.0 {
        SELU_SCALE
    } else {
        SELU_SCALE * SELU_ALPHA * x.exp()
    }
}

/// Perceptron parameters `θ = (W, b)`: `W` is `N×M`, `b` has length `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SgrParams {
    w: DMatrix<f64>,
    b: DVector<f64>,
}

impl SgrParams {
    pub fn new(w: DMatrix<f64>, b: DVector<f64>) -> Self {
        assert_eq!(w.nrows(), b.len(), "weight rows must match bias length");
        Self { w, b }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn random(repr_dim: usize, grid_size: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let limit = (6.0 / (repr_dim + grid_size) as f64).sqrt();
        let w = DMatrix::from_fn(repr_dim, grid_size, |_, _| {
            limit * rng::symmetric_f64(&mut rng)
        });
        Self { w, b: DVector::zeros(repr_dim) }
    }

    pub fn zeros(repr_dim: usize, grid_size: usize) -> Self {
        Self { w: DMatrix::zeros(repr_dim, grid_size), b: DVector::zeros(repr_dim) }
    }

    /// Input grid size `M`.
    pub fn grid_size(&self) -> usize {
        self.w.ncols()
    }

    /// Representation dimension `N`.
    pub fn repr_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn bias(&self) -> &DVector<f64> {
        &self.b
    }

    fn check_input(&self, lam: &InterpolatedSpectrum) -> Result<(), ModelError> {
        if lam.grid_size() != self.grid_size() {
            return Err(ModelError::DimensionMismatch {
                expected: self.grid_size(),
                got: lam.grid_size(),
            });
        }
        Ok(())
    }

    fn pre_activation(&self, lam: &DVector<f64>) -> DVector<f64> {
        &self.w * lam + &self.b
    }
}

/// The graph representation `σ = ψ(W λ̃ + b)`.
pub fn embed(params: &SgrParams, lam: &InterpolatedSpectrum) -> Result<DVector<f64>, ModelError> {
    params.check_input(lam)?;
    let x = DVector::from_column_slice(lam.values());
    Ok(params.pre_activation(&x).map(selu))
}

/// The throwaway binary classifier: one linear layer and softmax.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    v: DMatrix<f64>,
    c: DVector<f64>,
}

impl ClassifierHead {
    pub fn new(v: DMatrix<f64>, c: DVector<f64>) -> Self {
        assert_eq!(v.nrows(), 2, "binary head has 2 rows");
        assert_eq!(c.len(), 2, "binary head has 2 biases");
        Self { v, c }
    }

    pub fn random(repr_dim: usize, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let limit = (6.0 / (2 + repr_dim) as f64).sqrt();
        let v = DMatrix::from_fn(2, repr_dim, |_, _| limit * rng::symmetric_f64(&mut rng));
        Self { v, c: DVector::zeros(2) }
    }

    pub fn zeros(repr_dim: usize) -> Self {
        Self { v: DMatrix::zeros(2, repr_dim), c: DVector::zeros(2) }
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn bias(&self) -> &DVector<f64> {
        &self.c
    }

    fn logits(&self, sigma: &DVector<f64>) -> [f64; 2] {
        let z = &self.v * sigma + &self.c;
        [z[0], z[1]]
    }
}

/// Overflow-free two-class softmax.
fn softmax2(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let e = [(z[0] - m).exp(), (z[1] - m).exp()];
    let sum = e[0] + e[1];
    [e[0] / sum, e[1] / sum]
}

/// `log(sum(exp(z)))` without overflow.
fn log_sum_exp2(z: [f64; 2]) -> f64 {
    let m = z[0].max(z[1]);
    m + ((z[0] - m).exp() + (z[1] - m).exp()).ln()
}

/// Class probabilities `softmax(V σ + c)` for a spectrum.
pub fn forward_classifier(
    params: &SgrParams,
    head: &ClassifierHead,
    lam: &InterpolatedSpectrum,
) -> Result<[f64; 2], ModelError> {
    let sigma = embed(params, lam)?;
    Ok(softmax2(head.logits(&sigma)))
}

/// Gradient magnitude of the classifier output with respect to each input
/// grid position: `|d(z_1 - z_0)/dλ̃_j|`.
///
/// The logit difference rather than a probability is differentiated, so the
/// map does not vanish when the classifier saturates.
pub fn saliency(
    params: &SgrParams,
    head: &ClassifierHead,
    lam: &InterpolatedSpectrum,
) -> Result<Vec<f64>, ModelError> {
    params.check_input(lam)?;
    let x = DVector::from_column_slice(lam.values());
    let a = params.pre_activation(&x);
    let head_diff = head.v.row(1) - head.v.row(0);
    let gate =
        DVector::from_fn(a.len(), |i, _| head_diff[i] * selu_derivative(a[i]));
    let grad = params.w.transpose() * gate;
    Ok(grad.iter().map(|g| g.abs()).collect())
}

/// Per-class mean saliency profiles over a labeled set of spectra.
///
/// Returns one `M`-length profile per class index.
pub fn mean_saliency_by_class(
    params: &SgrParams,
    head: &ClassifierHead,
    lams: &[InterpolatedSpectrum],
    labels: &[usize],
) -> Result<Vec<Vec<f64>>, ModelError> {
    assert_eq!(lams.len(), labels.len());
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut sums = vec![vec![0.0; params.grid_size()]; classes];
    let mut counts = vec![0usize; classes];
    for (lam, &label) in lams.iter().zip(labels) {
        let s = saliency(params, head, lam)?;
        for (acc, v) in sums[label].iter_mut().zip(&s) {
            *acc += v;
        }
        counts[label] += 1;
    }
    for (sum, &count) in sums.iter_mut().zip(&counts) {
        if count > 0 {
            for v in sum.iter_mut() {
                *v /= count as f64;
            }
        }
    }
    Ok(sums)
}

/// Training regime configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub corpus: CorpusConfig,
    /// Representation dimension `N`.
    pub repr_dim: usize,
    /// Input grid size `M`.
    pub grid_size: usize,
    pub learning_rate: f64,
    /// Multiplicative per-epoch learning-rate decay; 1.0 keeps it constant.
    pub lr_decay: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Fraction of the corpus held out for validation.
    pub val_fraction: f64,
    pub seed: u64,
    pub eigs: EigsConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            corpus: CorpusConfig::default(),
            repr_dim: 256,
            grid_size: 256,
            learning_rate: 1e-2,
            lr_decay: 0.93,
            momentum: 0.9,
            epochs: 50,
            batch_size: 32,
            val_fraction: 0.2,
            seed: 0,
            eigs: EigsConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        // Zero is allowed so that `--lr 0 --epochs 1` reproduces the
        // initialization exactly.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::BadConfig("learning rate must be finite and >= 0".into()));
        }
        if !(self.momentum >= 0.0 && self.momentum < 1.0) {
            return Err(ModelError::BadConfig("momentum must be in [0, 1)".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(ModelError::BadConfig("learning-rate decay must be in (0, 1]".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 0.5) {
            return Err(ModelError::BadConfig("validation fraction must be in (0, 0.5)".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.repr_dim == 0 {
            return Err(ModelError::BadConfig(
                "batch size, epochs and representation dimension must be positive".into(),
            ));
        }
        if self.grid_size < 2 {
            return Err(ModelError::BadConfig("grid size must be at least 2".into()));
        }
        self.corpus.validate()?;
        Ok(())
    }
}

/// Loss and accuracy measured at the end of an epoch.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

/// Per-epoch training record.
#[derive(Debug, Clone, Default)]
pub struct TrainingLog {
    pub epochs: Vec<EpochStats>,
}

impl TrainingLog {
    pub fn final_validation_accuracy(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.val_accuracy)
    }
}

/// A trained representation plus the classifier it was co-trained with.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: SgrParams,
    pub head: ClassifierHead,
    pub log: TrainingLog,
}

/// Generates the synthetic corpus, computes its spectra and trains the
/// representation. Deterministic for a fixed config.
pub fn train(config: &TrainConfig) -> Result<TrainedModel, ModelError> {
    config.validate()?;
    let corpus = generate_training_corpus(&config.corpus)?;
    let spectra = collection_interpolated_spectra(&corpus, config.grid_size, &config.eigs)?;
    train_on_spectra(&spectra, corpus.labels(), config)
}

/// Trains on precomputed spectra with binary labels.
pub fn train_on_spectra(
    spectra: &[InterpolatedSpectrum],
    labels: &[usize],
    config: &TrainConfig,
) -> Result<TrainedModel, ModelError> {
    config.validate()?;
    assert_eq!(spectra.len(), labels.len());
    if spectra.len() < 2 {
        return Err(ModelError::BadConfig("need at least 2 training graphs".into()));
    }
    for lam in spectra {
        if lam.grid_size() != config.grid_size {
            return Err(ModelError::DimensionMismatch {
                expected: config.grid_size,
                got: lam.grid_size(),
            });
        }
    }

    let inputs: Vec<DVector<f64>> = spectra
        .iter()
        .map(|lam| DVector::from_column_slice(lam.values()))
        .collect();

    // Validation split: one seeded shuffle, head goes to validation.
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut split_rng = seeded_rng(derive_seed(config.seed, 0xface));
    rng::shuffle(&mut split_rng, &mut order);
    let val_count =
        ((inputs.len() as f64 * config.val_fraction).round() as usize).clamp(1, inputs.len() - 1);
    let (val_idx, train_idx) = order.split_at(val_count);

    let mut params = SgrParams::random(config.repr_dim, config.grid_size, derive_seed(config.seed, 1));
    let mut head = ClassifierHead::random(config.repr_dim, derive_seed(config.seed, 2));
    let mut velocity = Gradients::zeros(config.repr_dim, config.grid_size);
    let mut grads = Gradients::zeros(config.repr_dim, config.grid_size);

    let mut log = TrainingLog::default();
    let mut batch_order = train_idx.to_vec();
    for epoch in 0..config.epochs {
        let learning_rate = config.learning_rate * config.lr_decay.powi(epoch as i32);
        let mut epoch_rng = seeded_rng(derive_seed(config.seed, 0x1000 + epoch as u64));
        rng::shuffle(&mut epoch_rng, &mut batch_order);
        for batch in batch_order.chunks(config.batch_size) {
            grads.reset();
            for &i in batch {
                accumulate_gradients(&params, &head, &inputs[i], labels[i], &mut grads);
            }
            let scale = 1.0 / batch.len() as f64;
            velocity.momentum_step(&grads, config.momentum, learning_rate, scale);
            params.w += &velocity.w;
            params.b += &velocity.b;
            head.v += &velocity.v;
            head.c += &velocity.c;
        }

        let (train_loss, train_accuracy) = dataset_stats(&params, &head, &inputs, labels, train_idx);
        let (val_loss, val_accuracy) = dataset_stats(&params, &head, &inputs, labels, val_idx);
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(ModelError::Divergence { epoch });
        }
        log.epochs.push(EpochStats { epoch, train_loss, train_accuracy, val_loss, val_accuracy });
    }

    Ok(TrainedModel { params, head, log })
}

struct Gradients {
    w: DMatrix<f64>,
    b: DVector<f64>,
    v: DMatrix<f64>,
    c: DVector<f64>,
}

impl Gradients {
    fn zeros(repr_dim: usize, grid_size: usize) -> Self {
        Self {
            w: DMatrix::zeros(repr_dim, grid_size),
            b: DVector::zeros(repr_dim),
            v: DMatrix::zeros(2, repr_dim),
            c: DVector::zeros(2),
        }
    }

    fn reset(&mut self) {
        self.w.fill(0.0);
        self.b.fill(0.0);
        self.v.fill(0.0);
        self.c.fill(0.0);
    }

    /// `velocity = momentum * velocity - lr * scale * grads` (applied to
    /// `self` as the velocity buffer).
    fn momentum_step(&mut self, grads: &Gradients, momentum: f64, lr: f64, scale: f64) {
        let step = -lr * scale;
        let update = |velocity: &mut f64, grad: &f64| {
            *velocity = momentum * *velocity + step * grad;
        };
        self.w.iter_mut().zip(grads.w.iter()).for_each(|(v, g)| update(v, g));
        self.b.iter_mut().zip(grads.b.iter()).for_each(|(v, g)| update(v, g));
        self.v.iter_mut().zip(grads.v.iter()).for_each(|(v, g)| update(v, g));
        self.c.iter_mut().zip(grads.c.iter()).for_each(|(v, g)| update(v, g));
    }
}

/// Adds the cross-entropy gradients of one sample into `grads`.
fn accumulate_gradients(
    params: &SgrParams,
    head: &ClassifierHead,
    input: &DVector<f64>,
    label: usize,
    grads: &mut Gradients,
) {
    let a = params.pre_activation(input);
    let sigma = a.map(selu);
    let p = softmax2(head.logits(&sigma));

    // d loss / d logits = p - onehot(label)
    let mut dz = DVector::from_column_slice(&p);
    dz[label] -= 1.0;

    grads.v.ger(1.0, &dz, &sigma, 1.0);
    grads.c += &dz;

    let dsigma = head.v.transpose() * dz;
    let da = DVector::from_fn(a.len(), |i, _| dsigma[i] * selu_derivative(a[i]));
    grads.w.ger(1.0, &da, input, 1.0);
    grads.b += da;
}

/// Cross-entropy of one sample, computed in log-sum-exp form.
fn sample_loss(params: &SgrParams, head: &ClassifierHead, input: &DVector<f64>, label: usize) -> f64 {
    let sigma = params.pre_activation(input).map(selu);
    let z = head.logits(&sigma);
    log_sum_exp2(z) - z[label]
}

fn dataset_stats(
    params: &SgrParams,
    head: &ClassifierHead,
    inputs: &[DVector<f64>],
    labels: &[usize],
    indices: &[usize],
) -> (f64, f64) {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for &i in indices {
        loss += sample_loss(params, head, &inputs[i], labels[i]);
        let sigma = params.pre_activation(&inputs[i]).map(selu);
        let z = head.logits(&sigma);
        let predicted = usize::from(z[1] > z[0]);
        if predicted == labels[i] {
            correct += 1;
        }
    }
    let count = indices.len().max(1) as f64;
    (loss / count, correct as f64 / count)
}

const MODEL_MAGIC: &[u8; 4] = b"SGRM";
const MODEL_VERSION: u32 = 1;

/// Writes the model as a little-endian binary container: magic, version,
/// dimensions, a training-config fingerprint string, then `W`, `b`, `V`, `c`
/// in row-major order. Loading is bit-exact.
pub fn save_model(
    params: &SgrParams,
    head: &ClassifierHead,
    fingerprint: &str,
    path: &Path,
) -> Result<(), ModelError> {
    let mut bytes = Vec::with_capacity(
        24 + fingerprint.len() + 8 * (params.w.len() + params.b.len() + head.v.len() + 2),
    );
    bytes.extend_from_slice(MODEL_MAGIC);
    bytes.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(params.grid_size() as u32).to_le_bytes());
    bytes.extend_from_slice(&(params.repr_dim() as u32).to_le_bytes());
    bytes.extend_from_slice(&(fingerprint.len() as u32).to_le_bytes());
    bytes.extend_from_slice(fingerprint.as_bytes());
    fn push_row_major(bytes: &mut Vec<u8>, m: &DMatrix<f64>) {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                bytes.extend_from_slice(&m[(i, j)].to_le_bytes());
            }
        }
    }
    push_row_major(&mut bytes, &params.w);
    for v in params.b.iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    push_row_major(&mut bytes, &head.v);
    for v in head.c.iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, &bytes)
        .map_err(|source| ModelError::Io { path: path.display().to_string(), source })
}

struct ByteCursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> ByteCursor<'a> {
    fn take(&mut self, count: usize) -> Result<&'a [u8], ModelError> {
        if self.pos + count > self.data.len() {
            return Err(ModelError::Format("file truncated".into()));
        }
        let out = &self.data[self.pos..self.pos + count];
        self.pos += count;
        Ok(out)
    }

    fn read_u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn read_f64(&mut self) -> Result<f64, ModelError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn read_matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>, ModelError> {
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = self.read_f64()?;
            }
        }
        Ok(m)
    }
}

/// Reads a model written by [`save_model`].
pub fn load_model(path: &Path) -> Result<(SgrParams, ClassifierHead, String), ModelError> {
    let data = std::fs::read(path)
        .map_err(|source| ModelError::Io { path: path.display().to_string(), source })?;
    let mut cursor = ByteCursor { data: &data, pos: 0 };

    if cursor.take(4)? != MODEL_MAGIC {
        return Err(ModelError::Format("bad magic header".into()));
    }
    let version = cursor.read_u32()?;
    if version != MODEL_VERSION {
        return Err(ModelError::Format(format!(
            "unsupported version {version}, expected {MODEL_VERSION}"
        )));
    }
    let grid_size = cursor.read_u32()? as usize;
    let repr_dim = cursor.read_u32()? as usize;
    let fp_len = cursor.read_u32()? as usize;
    let fingerprint = String::from_utf8(cursor.take(fp_len)?.to_vec())
        .map_err(|_| ModelError::Format("fingerprint is not UTF-8".into()))?;

    let w = cursor.read_matrix(repr_dim, grid_size)?;
    let b: Vec<f64> = (0..repr_dim).map(|_| cursor.read_f64()).collect::<Result<_, _>>()?;
    let v = cursor.read_matrix(2, repr_dim)?;
    let c: Vec<f64> = (0..2).map(|_| cursor.read_f64()).collect::<Result<_, _>>()?;
    if cursor.pos != data.len() {
        return Err(ModelError::Format("trailing bytes after parameters".into()));
    }

    Ok((
        SgrParams::new(w, DVector::from_vec(b)),
        ClassifierHead::new(v, DVector::from_vec(c)),
        fingerprint,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::SyntheticError;

    fn fixture_lambda(m: usize, seed: u64) -> InterpolatedSpectrum {
        let mut rng = seeded_rng(seed);
        let mut values: Vec<f64> = (0..m).map(|_| 2.0 * rng::unit_f64(&mut rng)).collect();
        values.sort_by(f64::total_cmp);
        InterpolatedSpectrum::from_values(values).unwrap()
    }

    fn tiny_train_config() -> TrainConfig {
        TrainConfig {
            corpus: CorpusConfig {
                per_class: 20,
                sizes: vec![24, 32],
                mean_degrees: vec![4.0, 6.0],
                blocks: vec![2],
                ratio: 8.0,
                seed: 7,
            },
            repr_dim: 16,
            grid_size: 32,
            epochs: 3,
            batch_size: 8,
            seed: 7,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn selu_reference_values() {
        assert_eq!(selu(0.0), 0.0);
        assert_eq!(selu(1.0), SELU_SCALE);
        assert!((selu(-50.0) + SELU_SCALE * SELU_ALPHA).abs() < 1e-12);
        // Continuity at 0 and monotonicity.
        assert!((selu(1e-12) - selu(-1e-12)).abs() < 1e-11);
        let mut prev = f64::NEG_INFINITY;
        for i in -40..=40 {
            let v = selu(i as f64 / 10.0);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn embed_identity_weights_scale_input() {
        let m = 8;
        let lam = fixture_lambda(m, 1);
        let params = SgrParams::new(DMatrix::identity(m, m), DVector::zeros(m));
        let sigma = embed(&params, &lam).unwrap();
        for (s, l) in sigma.iter().zip(lam.values()) {
            assert!((s - SELU_SCALE * l).abs() < 1e-15);
        }
    }

    #[test]
    fn embed_zero_weights_give_zero() {
        let lam = fixture_lambda(8, 2);
        let params = SgrParams::zeros(5, 8);
        let sigma = embed(&params, &lam).unwrap();
        assert!(sigma.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn embed_matches_independent_recomputation() {
        // Oracle: plain nested loops, no linear-algebra library.
        let (n_dim, m_dim) = (6, 9);
        let params = SgrParams::random(n_dim, m_dim, 11);
        let lam = fixture_lambda(m_dim, 3);
        let sigma = embed(&params, &lam).unwrap();
        for i in 0..n_dim {
            let mut acc = params.bias()[i];
            for j in 0..m_dim {
                acc += params.weights()[(i, j)] * lam.values()[j];
            }
            let want = if acc > 0.0 {
                SELU_SCALE * acc
            } else {
                SELU_SCALE * SELU_ALPHA * (acc.exp() - 1.0)
            };
            assert!((sigma[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn embed_rejects_wrong_grid_size() {
        let params = SgrParams::random(4, 16, 0);
        let lam = fixture_lambda(8, 0);
        assert!(matches!(
            embed(&params, &lam),
            Err(ModelError::DimensionMismatch { expected: 16, got: 8 })
        ));
    }

    #[test]
    fn forward_uniform_for_zero_head() {
        let lam = fixture_lambda(8, 4);
        let params = SgrParams::random(4, 8, 1);
        let head = ClassifierHead::zeros(4);
        let p = forward_classifier(&params, &head, &lam).unwrap();
        assert_eq!(p, [0.5, 0.5]);
    }

    #[test]
    fn forward_is_stable_under_huge_logits() {
        let lam = fixture_lambda(8, 5);
        let params = SgrParams::random(4, 8, 1);
        let head = ClassifierHead::new(
            DMatrix::zeros(2, 4),
            DVector::from_column_slice(&[1000.0, -1000.0]),
        );
        let p = forward_classifier(&params, &head, &lam).unwrap();
        assert!(p[0] > 1.0 - 1e-12 && p[1] < 1e-12);
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forward_matches_independent_recomputation() {
        let (n_dim, m_dim) = (5, 7);
        let params = SgrParams::random(n_dim, m_dim, 21);
        let head = ClassifierHead::random(n_dim, 22);
        let lam = fixture_lambda(m_dim, 23);
        let p = forward_classifier(&params, &head, &lam).unwrap();

        // Oracle: direct loops and the naive softmax (safe at this scale).
        let mut sigma = vec![0.0; n_dim];
        for i in 0..n_dim {
            let mut acc = params.bias()[i];
            for j in 0..m_dim {
                acc += params.weights()[(i, j)] * lam.values()[j];
            }
            sigma[i] = if acc > 0.0 {
                SELU_SCALE * acc
            } else {
                SELU_SCALE * SELU_ALPHA * (acc.exp() - 1.0)
            };
        }
        let mut z = [head.bias()[0], head.bias()[1]];
        for k in 0..2 {
            for i in 0..n_dim {
                z[k] += head.weights()[(k, i)] * sigma[i];
            }
        }
        let denom = z[0].exp() + z[1].exp();
        for k in 0..2 {
            assert!((p[k] - z[k].exp() / denom).abs() < 1e-12);
        }
        assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn training_gradients_match_finite_differences() {
        // Central differences of the batch loss, step 1e-5, relative 1e-4.
        let (n_dim, m_dim) = (5, 7);
        let params = SgrParams::random(n_dim, m_dim, 31);
        let head = ClassifierHead::random(n_dim, 32);
        let batch: Vec<(DVector<f64>, usize)> = (0..4)
            .map(|i| {
                let lam = fixture_lambda(m_dim, 40 + i);
                (DVector::from_column_slice(lam.values()), (i % 2) as usize)
            })
            .collect();

        let mut grads = Gradients::zeros(n_dim, m_dim);
        for (x, y) in &batch {
            accumulate_gradients(&params, &head, x, *y, &mut grads);
        }

        let loss_with = |params: &SgrParams, head: &ClassifierHead| -> f64 {
            batch.iter().map(|(x, y)| sample_loss(params, head, x, *y)).sum()
        };
        let step = 1e-5;
        let check = |analytic: f64, numeric: f64, what: &str| {
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(
                (analytic - numeric).abs() / denom < 1e-4,
                "{what}: analytic {analytic} vs numeric {numeric}"
            );
        };

        for i in 0..n_dim {
            for j in 0..m_dim {
                let mut plus = params.clone();
                plus.w[(i, j)] += step;
                let mut minus = params.clone();
                minus.w[(i, j)] -= step;
                let numeric = (loss_with(&plus, &head) - loss_with(&minus, &head)) / (2.0 * step);
                check(grads.w[(i, j)], numeric, "dW");
            }
            let mut plus = params.clone();
            plus.b[i] += step;
            let mut minus = params.clone();
            minus.b[i] -= step;
            let numeric = (loss_with(&plus, &head) - loss_with(&minus, &head)) / (2.0 * step);
            check(grads.b[i], numeric, "db");
        }
        for k in 0..2 {
            for i in 0..n_dim {
                let mut plus = head.clone();
                plus.v[(k, i)] += step;
                let mut minus = head.clone();
                minus.v[(k, i)] -= step;
                let numeric =
                    (loss_with(&params, &plus) - loss_with(&params, &minus)) / (2.0 * step);
                check(grads.v[(k, i)], numeric, "dV");
            }
            let mut plus = head.clone();
            plus.c[k] += step;
            let mut minus = head.clone();
            minus.c[k] -= step;
            let numeric = (loss_with(&params, &plus) - loss_with(&params, &minus)) / (2.0 * step);
            check(grads.c[k], numeric, "dc");
        }
    }

    #[test]
    fn saliency_zero_for_constant_network() {
        let lam = fixture_lambda(8, 6);
        let params = SgrParams::zeros(4, 8);
        let head = ClassifierHead::random(4, 1);
        let s = saliency(&params, &head, &lam).unwrap();
        assert!(s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saliency_matches_finite_differences() {
        let (n_dim, m_dim) = (6, 9);
        let params = SgrParams::random(n_dim, m_dim, 51);
        let head = ClassifierHead::random(n_dim, 52);
        let lam = fixture_lambda(m_dim, 53);
        let analytic = saliency(&params, &head, &lam).unwrap();

        let logit_diff = |values: &[f64]| -> f64 {
            let x = DVector::from_column_slice(values);
            let sigma = params.pre_activation(&x).map(selu);
            let z = head.logits(&sigma);
            z[1] - z[0]
        };
        let step = 1e-5;
        for j in 0..m_dim {
            let mut plus = lam.values().to_vec();
            plus[j] += step;
            let mut minus = lam.values().to_vec();
            minus[j] -= step;
            let numeric = ((logit_diff(&plus) - logit_diff(&minus)) / (2.0 * step)).abs();
            let denom = analytic[j].abs().max(numeric).max(1e-8);
            assert!(
                (analytic[j] - numeric).abs() / denom < 1e-4,
                "position {j}: analytic {} vs numeric {numeric}",
                analytic[j]
            );
        }
    }

    #[test]
    fn zero_learning_rate_keeps_initialization() {
        let config = TrainConfig { learning_rate: 0.0, epochs: 1, ..tiny_train_config() };
        let trained = train(&config).unwrap();
        let init_params =
            SgrParams::random(config.repr_dim, config.grid_size, derive_seed(config.seed, 1));
        let init_head = ClassifierHead::random(config.repr_dim, derive_seed(config.seed, 2));
        assert_eq!(trained.params, init_params);
        assert_eq!(trained.head, init_head);
    }

    #[test]
    fn training_is_deterministic() {
        let config = tiny_train_config();
        let a = train(&config).unwrap();
        let b = train(&config).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.head, b.head);
    }

    #[test]
    fn training_loss_is_non_increasing_at_small_learning_rate() {
        let config = TrainConfig {
            learning_rate: 1e-4,
            momentum: 0.0,
            epochs: 8,
            ..tiny_train_config()
        };
        let trained = train(&config).unwrap();
        let losses: Vec<f64> = trained.log.epochs.iter().map(|e| e.train_loss).collect();
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss increased: {losses:?}");
        }
    }

    #[test]
    fn training_separates_tiny_corpus() {
        let config = TrainConfig { epochs: 25, ..tiny_train_config() };
        let trained = train(&config).unwrap();
        let acc = trained.log.final_validation_accuracy().unwrap();
        assert!(acc >= 0.75, "validation accuracy {acc}");
    }

    #[test]
    fn divergence_is_reported_with_epoch() {
        let config = TrainConfig { learning_rate: 1e12, epochs: 12, ..tiny_train_config() };
        match train(&config) {
            Err(ModelError::Divergence { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let ok = tiny_train_config();
        assert!(ok.validate().is_ok());
        assert!(TrainConfig { learning_rate: -1.0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { val_fraction: 0.6, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { grid_size: 1, ..ok.clone() }.validate().is_err());
        let bad_corpus = CorpusConfig { per_class: 0, ..ok.corpus.clone() };
        assert!(matches!(
            TrainConfig { corpus: bad_corpus, ..ok }.validate(),
            Err(ModelError::Synthetic(SyntheticError::BadConfig(_)))
        ));
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let params = SgrParams::random(12, 24, 61);
        let head = ClassifierHead::random(12, 62);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.sgr");
        save_model(&params, &head, "fingerprint-text", &path).unwrap();
        let (p2, h2, fp) = load_model(&path).unwrap();
        assert_eq!(params, p2);
        assert_eq!(head, h2);
        assert_eq!(fp, "fingerprint-text");
    }

    #[test]
    fn load_rejects_bad_magic_and_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.sgr");
        std::fs::write(&path, b"NOPE rest of file").unwrap();
        assert!(matches!(load_model(&path), Err(ModelError::Format(_))));

        let mut bytes = Vec::new();
        bytes.extend_from_slice(MODEL_MAGIC);
        bytes.extend_from_slice(&99u32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        match load_model(&path) {
            Err(ModelError::Format(msg)) => assert!(msg.contains("version")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn loaded_model_rejects_mismatched_grid() {
        let params = SgrParams::random(4, 16, 71);
        let head = ClassifierHead::random(4, 72);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.sgr");
        save_model(&params, &head, "", &path).unwrap();
        let (loaded, _, _) = load_model(&path).unwrap();
        let lam = fixture_lambda(8, 1);
        assert!(matches!(
            embed(&loaded, &lam),
            Err(ModelError::DimensionMismatch { expected: 16, got: 8 })
        ));
    }
}
