//! Downstream evaluation: logistic regression over graph representations
//! with repeated random train/test splits.
//!
//! The harness is representation-agnostic: features are extracted once per
//! collection, and for a fixed seed the split sequence is identical across
//! representations, so accuracy differences are paired comparisons.

use crate::graph::{Graph, GraphCollection};
use crate::heat::{heat_trace_signature, TimeGrid};
use crate::model::{embed, SgrParams};
use crate::rng::{self, derive_seed, seeded_rng};
use crate::spectrum::{collection_interpolated_spectra, graph_spectrum, EigsConfig};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("feature length {got} does not match expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid evaluation config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Spectrum(#[from] crate::spectrum::SpectrumError),
    #[error(transparent)]
    Heat(#[from] crate::heat::HeatError),
}

/// Multinomial logistic-regression classifier: one weight row and bias per
/// class.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    /// Flattened `K x d` weights, row per class.
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl LogisticModel {
    pub fn class_count(&self) -> usize {
        self.bias.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        if x.len() != self.feature_dim() {
            return Err(EvalError::DimensionMismatch { expected: self.feature_dim(), got: x.len() });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| b + w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>())
            .collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize, EvalError> {
        let z = self.decision_values(x)?;
        Ok(z.iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("at least one class"))
    }

    pub fn accuracy(&self, features: &[Vec<f64>], labels: &[usize]) -> Result<f64, EvalError> {
        let mut correct = 0usize;
        for (x, &y) in features.iter().zip(labels) {
            if self.predict(x)? == y {
                correct += 1;
            }
        }
        Ok(correct as f64 / features.len().max(1) as f64)
    }
}

/// Fits multinomial logistic regression by minimizing
/// `sum cross-entropy + (1 / 2C) * ||W||^2` (bias unregularized) with L-BFGS
/// from a zero start, to gradient-norm 1e-6 or 1000 iterations.
pub fn logistic_train(
    features: &[Vec<f64>],
    labels: &[usize],
    c: f64,
) -> Result<LogisticModel, EvalError> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(EvalError::DegenerateInput(format!(
            "{} feature rows vs {} labels",
            features.len(),
            labels.len()
        )));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(EvalError::BadConfig(format!("regularization strength C must be positive, got {c}")));
    }
    let dim = features[0].len();
    if features.iter().any(|f| f.len() != dim) {
        return Err(EvalError::DegenerateInput("inconsistent feature dimensions".into()));
    }
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    let distinct = {
        let mut seen = vec![false; classes];
        labels.iter().for_each(|&l| seen[l] = true);
        seen.iter().filter(|&&s| s).count()
    };
    if distinct < 2 {
        return Err(EvalError::DegenerateInput("need at least 2 classes to fit a classifier".into()));
    }

    let objective = LogisticObjective { features, labels, classes, dim, inv_c: 1.0 / c };
    let theta = lbfgs_minimize(&objective, classes * (dim + 1), 1000, 1e-6);

    let mut weights = Vec::with_capacity(classes);
    for k in 0..classes {
        weights.push(theta.as_slice()[k * dim..(k + 1) * dim].to_vec());
    }
    let bias = theta.as_slice()[classes * dim..].to_vec();
    Ok(LogisticModel { weights, bias })
}

/// The regularized multinomial cross-entropy and its gradient.
///
/// Parameter vector layout: the `K x d` weight rows, then the `K` biases.
struct LogisticObjective<'a> {
    features: &'a [Vec<f64>],
    labels: &'a [usize],
    classes: usize,
    dim: usize,
    inv_c: f64,
}

impl LogisticObjective<'_> {
    fn eval(&self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
        let (k, d) = (self.classes, self.dim);
        let w = &theta.as_slice()[..k * d];
        let b = &theta.as_slice()[k * d..];
        let mut loss = 0.0;
        let mut grad = DVector::zeros(theta.len());
        let mut logits = vec![0.0; k];
        for (x, &y) in self.features.iter().zip(self.labels) {
            for (class, logit) in logits.iter_mut().enumerate() {
                let row = &w[class * d..(class + 1) * d];
                *logit = b[class] + row.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>();
            }
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
            loss += lse - logits[y];
            for class in 0..k {
                let p = (logits[class] - lse).exp();
                let delta = p - f64::from(class == y);
                let grow = &mut grad.as_mut_slice()[class * d..(class + 1) * d];
                for (g, xi) in grow.iter_mut().zip(x) {
                    *g += delta * xi;
                }
                grad[k * d + class] += delta;
            }
        }
        // L2 on the weights only.
        for i in 0..k * d {
            loss += 0.5 * self.inv_c * theta[i] * theta[i];
            grad[i] += self.inv_c * theta[i];
        }
        (loss, grad)
    }
}

/// Limited-memory BFGS with Armijo backtracking, zero start. Deterministic.
fn lbfgs_minimize(
    objective: &LogisticObjective<'_>,
    dim: usize,
    max_iterations: usize,
    gradient_tolerance: f64,
) -> DVector<f64> {
    const MEMORY: usize = 10;
    let mut theta = DVector::zeros(dim);
    let (mut f, mut g) = objective.eval(&theta);
    let mut history: Vec<(DVector<f64>, DVector<f64>, f64)> = Vec::new();

    for _ in 0..max_iterations {
        if g.norm() <= gradient_tolerance {
            break;
        }
        // Two-loop recursion for the search direction.
        let mut direction = -g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let alpha = rho * s.dot(&direction);
            direction -= y * alpha;
            alphas.push(alpha);
        }
        if let Some((s, y, _)) = history.last() {
            direction *= s.dot(y) / y.dot(y);
        }
        for ((s, y, rho), alpha) in history.iter().zip(alphas.into_iter().rev()) {
            let beta = rho * y.dot(&direction);
            direction += s * (alpha - beta);
        }
        let mut descent = g.dot(&direction);
        if descent >= 0.0 {
            direction = -g.clone();
            descent = g.dot(&direction);
        }

        let mut step = if history.is_empty() { 1.0 / (1.0 + g.norm()) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            let candidate = &theta + &direction * step;
            let (f_new, g_new) = objective.eval(&candidate);
            if f_new <= f + 1e-4 * step * descent {
                accepted = Some((candidate, f_new, g_new));
                break;
            }
            step *= 0.5;
        }
        let Some((theta_new, f_new, g_new)) = accepted else {
            break; // line search exhausted: numerically at the optimum
        };

        let s = &theta_new - &theta;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 {
            history.push((s, y, 1.0 / sy));
            if history.len() > MEMORY {
                history.remove(0);
            }
        }
        theta = theta_new;
        f = f_new;
        g = g_new;
    }
    theta
}

/// Objective value of a fitted model; exposed for optimizer verification.
pub fn logistic_objective_value(
    model: &LogisticModel,
    features: &[Vec<f64>],
    labels: &[usize],
    c: f64,
) -> f64 {
    let mut loss = 0.0;
    for (x, &y) in features.iter().zip(labels) {
        let z = model.decision_values(x).expect("dimension checked by caller");
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        loss += lse - z[y];
    }
    let reg: f64 = model.weights.iter().flatten().map(|w| w * w).sum();
    loss + 0.5 * reg / c
}

/// Which feature vector represents a graph.
pub enum FeatureExtractor<'a> {
    /// The learned SeLU perceptron embedding.
    Sgr(&'a SgrParams),
    /// The raw resampled spectrum, no learned transform.
    Lambda { grid_size: usize },
    /// Heat traces on a time grid.
    HeatTrace(TimeGrid),
}

impl FeatureExtractor<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            FeatureExtractor::Sgr(_) => "sgr",
            FeatureExtractor::Lambda { .. } => "lambda",
            FeatureExtractor::HeatTrace(_) => "heat",
        }
    }
}

/// The raw-spectrum baseline: `λ̃` itself as the feature vector.
pub fn baseline_lambda(g: &Graph, m: usize, eigs: &EigsConfig) -> Result<Vec<f64>, EvalError> {
    Ok(crate::spectrum::graph_interpolated_spectrum(g, m, eigs)?.values().to_vec())
}

/// Extracts one feature row per graph, in collection order.
pub fn extract_features(
    collection: &GraphCollection,
    extractor: &FeatureExtractor<'_>,
    eigs: &EigsConfig,
) -> Result<Vec<Vec<f64>>, EvalError> {
    match extractor {
        FeatureExtractor::Sgr(params) => {
            let spectra = collection_interpolated_spectra(collection, params.grid_size(), eigs)?;
            spectra
                .iter()
                .map(|lam| Ok(embed(params, lam)?.iter().copied().collect()))
                .collect()
        }
        FeatureExtractor::Lambda { grid_size } => {
            let spectra = collection_interpolated_spectra(collection, *grid_size, eigs)?;
            Ok(spectra.into_iter().map(|lam| lam.values().to_vec()).collect())
        }
        FeatureExtractor::HeatTrace(grid) => collection
            .graphs()
            .par_iter()
            .map(|g| {
                let s = graph_spectrum(g, eigs)?;
                Ok(heat_trace_signature(&s, grid)?.values().to_vec())
            })
            .collect(),
    }
}

/// Evaluation protocol configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Fraction of graphs used for fitting, rest for testing.
    pub train_fraction: f64,
    pub repeats: usize,
    /// Logistic-regression regularization strength.
    pub c: f64,
    pub seed: u64,
    /// Standardize features per dimension on the training split.
    pub standardize: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { train_fraction: 0.8, repeats: 100, c: 1.0, seed: 0, standardize: false }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(EvalError::BadConfig("train fraction must be in (0, 1)".into()));
        }
        if self.repeats == 0 {
            return Err(EvalError::BadConfig("need at least 1 repeat".into()));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(EvalError::BadConfig("C must be positive".into()));
        }
        Ok(())
    }
}

/// Accuracy summary over repeated splits.
///
/// `std_accuracy` is the population standard deviation of the per-repeat
/// accuracies.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub dataset: String,
    pub representation: String,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub per_repeat: Vec<f64>,
}

/// The split of repeat `r`: a seeded shuffle cut at the train fraction.
/// Depends only on `(seed, repeat, len)`, never on the features.
fn split_indices(seed: u64, repeat: u64, len: usize, train_fraction: f64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..len).collect();
    let mut rng = seeded_rng(derive_seed(seed, repeat));
    rng::shuffle(&mut rng, &mut order);
    let train_count = ((len as f64 * train_fraction) as usize).clamp(1, len - 1);
    let test = order.split_off(train_count);
    (order, test)
}

/// Runs the repeated-split protocol on precomputed features.
pub fn evaluate(
    features: &[Vec<f64>],
    labels: &[usize],
    dataset: &str,
    representation: &str,
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    config.validate()?;
    if features.len() != labels.len() {
        return Err(EvalError::DegenerateInput(format!(
            "{} feature rows vs {} labels",
            features.len(),
            labels.len()
        )));
    }
    if features.len() < 2 {
        return Err(EvalError::DegenerateInput("need at least 2 graphs".into()));
    }

    let per_repeat: Vec<f64> = (0..config.repeats as u64)
        .into_par_iter()
        .map(|repeat| {
            let (train_idx, test_idx) =
                split_indices(config.seed, repeat, features.len(), config.train_fraction);
            let gather = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<usize>) {
                (
                    idx.iter().map(|&i| features[i].clone()).collect(),
                    idx.iter().map(|&i| labels[i]).collect(),
                )
            };
            let (mut train_x, train_y) = gather(&train_idx);
            let (mut test_x, test_y) = gather(&test_idx);
            if config.standardize {
                standardize_in_place(&mut train_x, &mut test_x);
            }
            let model = logistic_train(&train_x, &train_y, config.c)?;
            model.accuracy(&test_x, &test_y)
        })
        .collect::<Result<_, _>>()?;

    let mean = per_repeat.iter().sum::<f64>() / per_repeat.len() as f64;
    let variance =
        per_repeat.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / per_repeat.len() as f64;
    Ok(EvalReport {
        dataset: dataset.to_string(),
        representation: representation.to_string(),
        mean_accuracy: mean,
        std_accuracy: variance.sqrt(),
        per_repeat,
    })
}

/// Extracts features and runs the protocol in one step.
pub fn evaluate_collection(
    collection: &GraphCollection,
    extractor: &FeatureExtractor<'_>,
    eigs: &EigsConfig,
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    if collection.class_count() < 2 {
        return Err(EvalError::DegenerateInput(format!(
            "collection {} has fewer than 2 classes",
            collection.name
        )));
    }
    let features = extract_features(collection, extractor, eigs)?;
    evaluate(&features, collection.labels(), &collection.name, extractor.name(), config)
}

/// Per-dimension standardization fitted on the training rows.
fn standardize_in_place(train: &mut [Vec<f64>], test: &mut [Vec<f64>]) {
    if train.is_empty() {
        return;
    }
    let dim = train[0].len();
    let n = train.len() as f64;
    let mut mean = vec![0.0; dim];
    for row in train.iter() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut std = vec![0.0; dim];
    for row in train.iter() {
        for ((s, v), m) in std.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    for s in std.iter_mut() {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    for row in train.iter_mut().chain(test.iter_mut()) {
        for ((v, m), s) in row.iter_mut().zip(&mean).zip(&std) {
            *v = (*v - m) / s;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two tight clusters on the x axis, 50 points each.
    fn separable_toy() -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for i in 0..50 {
            let jitter = (i as f64 / 49.0 - 0.5) * 0.2;
            features.push(vec![-1.0 + jitter, jitter]);
            labels.push(0);
            features.push(vec![1.0 - jitter, -jitter]);
            labels.push(1);
        }
        (features, labels)
    }

    #[test]
    fn separable_toy_is_fit_perfectly() {
        let (x, y) = separable_toy();
        let model = logistic_train(&x, &y, 1.0).unwrap();
        assert_eq!(model.accuracy(&x, &y).unwrap(), 1.0);
    }

    #[test]
    fn identical_features_predict_majority_class() {
        let x: Vec<Vec<f64>> = (0..30).map(|_| vec![0.7, 0.7]).collect();
        let y: Vec<usize> = (0..30).map(|i| usize::from(i < 20)).collect(); // 20 ones, 10 zeros
        let model = logistic_train(&x, &y, 1.0).unwrap();
        assert_eq!(model.predict(&[0.7, 0.7]).unwrap(), 1);
        let acc = model.accuracy(&x, &y).unwrap();
        assert!((acc - 20.0 / 30.0).abs() < 1e-12);
    }

    #[test]
    fn three_class_toy() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let j = i as f64 * 0.01;
            x.push(vec![1.0 + j, 0.0]);
            y.push(0);
            x.push(vec![-1.0 - j, 1.0]);
            y.push(1);
            x.push(vec![0.0, -1.0 - j]);
            y.push(2);
        }
        let model = logistic_train(&x, &y, 1.0).unwrap();
        assert_eq!(model.class_count(), 3);
        assert_eq!(model.accuracy(&x, &y).unwrap(), 1.0);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        let y = vec![0, 0];
        assert!(matches!(logistic_train(&x, &y, 1.0), Err(EvalError::DegenerateInput(_))));
    }

    #[test]
    fn optimizer_reaches_the_long_run_optimum() {
        // Oracle: plain full-batch gradient descent run far past convergence.
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut state = 9u64;
        for i in 0..20 {
            state = crate::rng::splitmix64(state);
            let noise = (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
            let label = usize::from(i % 2 == 0);
            x.push(vec![if label == 1 { 0.8 } else { -0.6 } + noise, noise * 2.0, 1.5 * noise]);
            y.push(label);
        }
        let model = logistic_train(&x, &y, 1.0).unwrap();
        let loss = logistic_objective_value(&model, &x, &y, 1.0);

        let objective = LogisticObjective { features: &x, labels: &y, classes: 2, dim: 3, inv_c: 1.0 };
        let mut theta = DVector::zeros(8);
        for _ in 0..200_000 {
            let (_, g) = objective.eval(&theta);
            theta -= g * 5e-3;
        }
        let (oracle_loss, _) = objective.eval(&theta);
        assert!(
            (loss - oracle_loss).abs() < 1e-4,
            "L-BFGS loss {loss} vs long-run GD {oracle_loss}"
        );
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (x, y) = separable_toy();
        let objective = LogisticObjective { features: &x, labels: &y, classes: 2, dim: 2, inv_c: 0.5 };
        let theta = DVector::from_fn(6, |i, _| (i as f64 * 0.37).sin() * 0.3);
        let (_, grad) = objective.eval(&theta);
        let step = 1e-6;
        for i in 0..6 {
            let mut plus = theta.clone();
            plus[i] += step;
            let mut minus = theta.clone();
            minus[i] -= step;
            let numeric = (objective.eval(&plus).0 - objective.eval(&minus).0) / (2.0 * step);
            assert!(
                (grad[i] - numeric).abs() < 1e-5 * numeric.abs().max(1.0),
                "component {i}: {} vs {numeric}",
                grad[i]
            );
        }
    }

    #[test]
    fn perfect_features_score_one() {
        let features: Vec<Vec<f64>> = (0..40).map(|i| vec![f64::from(i % 2 == 0)]).collect();
        let labels: Vec<usize> = (0..40).map(|i| usize::from(i % 2 == 0)).collect();
        let config = EvalConfig { repeats: 1, ..EvalConfig::default() };
        let report = evaluate(&features, &labels, "toy", "raw", &config).unwrap();
        assert_eq!(report.mean_accuracy, 1.0);
        assert_eq!(report.per_repeat.len(), 1);
    }

    #[test]
    fn evaluation_is_reproducible_and_mean_is_consistent() {
        let (x, y) = separable_toy();
        let config = EvalConfig { repeats: 10, seed: 42, ..EvalConfig::default() };
        let a = evaluate(&x, &y, "toy", "raw", &config).unwrap();
        let b = evaluate(&x, &y, "toy", "raw", &config).unwrap();
        assert_eq!(a.per_repeat, b.per_repeat);
        let mean = a.per_repeat.iter().sum::<f64>() / a.per_repeat.len() as f64;
        assert_eq!(a.mean_accuracy, mean);
        assert!(a.per_repeat.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn splits_are_independent_of_features() {
        let (a, b) = split_indices(7, 3, 100, 0.8);
        let (c, d) = split_indices(7, 3, 100, 0.8);
        assert_eq!(a, c);
        assert_eq!(b, d);
        assert_eq!(a.len(), 80);
        assert_eq!(b.len(), 20);
        let (e, _) = split_indices(7, 4, 100, 0.8);
        assert_ne!(a, e);
        // All indices present exactly once.
        let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn standardization_centers_training_features() {
        let mut train = vec![vec![1.0, 10.0], vec![3.0, 10.0]];
        let mut test = vec![vec![2.0, 10.0]];
        standardize_in_place(&mut train, &mut test);
        assert_eq!(train[0][0], -1.0);
        assert_eq!(train[1][0], 1.0);
        assert_eq!(test[0][0], 0.0);
        // Zero-variance column maps to zero, not NaN.
        assert_eq!(train[0][1], 0.0);
        assert!(test[0][1].is_finite());
    }

    #[test]
    fn label_shuffle_scores_near_chance() {
        // Control: destroying the feature-label link must drop accuracy to
        // the majority rate.
        let (x, mut y) = separable_toy();
        let mut rng = seeded_rng(5);
        rng::shuffle(&mut rng, &mut y);
        let config = EvalConfig { repeats: 20, seed: 11, ..EvalConfig::default() };
        let report = evaluate(&x, &y, "toy", "raw", &config).unwrap();
        // Majority rate is 0.5; 3 sigma over 20 repeats of 20-point tests.
        assert!(
            (report.mean_accuracy - 0.5).abs() < 3.0 * 0.5 / (20.0f64 * 20.0).sqrt(),
            "shuffled-label accuracy {}",
            report.mean_accuracy
        );
    }
}
