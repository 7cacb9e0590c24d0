//! Quadratic weighted kappa, its continuous loss form, and the nominal
//! softmax/cross-entropy baseline.

use crate::error::{Error, Result};
use crate::clm_head::predict_argmax;
use crate::metrics::ConfusionMatrix;

/// Quadratic penalization weights `w[i][j] = (i - j)^2 / (Q - 1)^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenalizationMatrix {
    q_classes: usize,
    weights: Vec<f64>,
}

impl PenalizationMatrix {
    pub fn quadratic(q_classes: usize) -> Result<Self> {
        if q_classes < 2 {
            return Err(Error::domain(format!("need at least 2 classes, got {q_classes}")));
        }
        let denom = ((q_classes - 1) * (q_classes - 1)) as f64;
        let mut weights = Vec::with_capacity(q_classes * q_classes);
        for i in 0..q_classes {
            for j in 0..q_classes {
                let d = i.abs_diff(j);
                weights.push((d * d) as f64 / denom);
            }
        }
        Ok(PenalizationMatrix { q_classes, weights })
    }

    pub fn q_classes(&self) -> usize {
        self.q_classes
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.q_classes + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.q_classes..(i + 1) * self.q_classes]
    }
}

pub fn qwk_weights(q_classes: usize) -> Result<PenalizationMatrix> {
    PenalizationMatrix::quadratic(q_classes)
}

/// Per-sample class probabilities with their true labels, row-major `N x Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchProbabilities {
    q_classes: usize,
    probs: Vec<f64>,
    labels: Vec<usize>,
}

impl BatchProbabilities {
    /// Validates shapes, label range, nonnegativity and row normalization (1e-9).
    pub fn new(q_classes: usize, probs: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        let batch = Self::new_unnormalized(q_classes, probs, labels)?;
        for (k, row) in batch.rows().enumerate() {
            if row.iter().any(|&p| p.is_nan() || p < 0.0) {
                return Err(Error::domain(format!("row {k} has a negative or NaN probability")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::domain(format!("row {k} sums to {s}, expected 1")));
            }
        }
        Ok(batch)
    }

    /// Checks shapes and labels only. Rows may be any finite values, which
    /// finite-difference checks rely on when perturbing single entries.
    pub fn new_unnormalized(q_classes: usize, probs: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if q_classes < 2 {
            return Err(Error::domain(format!("need at least 2 classes, got {q_classes}")));
        }
        if labels.is_empty() {
            return Err(Error::domain("empty batch"));
        }
        if probs.len() != labels.len() * q_classes {
            return Err(Error::domain(format!(
                "probability buffer has {} entries, expected {} x {q_classes}",
                probs.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&t| t >= q_classes) {
            return Err(Error::domain(format!("label {bad} out of range for {q_classes} classes")));
        }
        Ok(BatchProbabilities { q_classes, probs, labels })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<usize>) -> Result<Self> {
        let q = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != q) {
            return Err(Error::domain("ragged probability rows"));
        }
        Self::new(q, rows.concat(), labels)
    }

    pub fn q_classes(&self) -> usize {
        self.q_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.probs[k * self.q_classes..(k + 1) * self.q_classes]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.probs.chunks_exact(self.q_classes)
    }
}

/// `1 - sum(w * O) / sum(w * E)` with `E_ij = O_i. * O_.j / N`.
pub fn qwk_metric(confusion: &ConfusionMatrix) -> Result<f64> {
    let q = confusion.q_classes();
    let n = confusion.total();
    if n == 0 {
        return Err(Error::domain("QWK of an empty confusion matrix"));
    }
    let weights = PenalizationMatrix::quadratic(q)?;
    let rows = confusion.row_sums();
    let cols = confusion.col_sums();
    let mut observed = 0.0;
    let mut expected = 0.0;
    for i in 0..q {
        for j in 0..q {
            let w = weights.get(i, j);
            observed += w * confusion.get(i, j) as f64;
            expected += w * (rows[i] as f64 * cols[j] as f64) / n as f64;
        }
    }
    if expected == 0.0 {
        return Err(Error::UndefinedMetric(
            "QWK expected disagreement is zero (single class for both raters)".into(),
        ));
    }
    Ok(1.0 - observed / expected)
}

struct QwkTerms {
    numerator: f64,
    denominator: f64,
    // a_j = sum_i (N_i / N) w_ij
    class_weights: Vec<f64>,
}

fn qwk_terms(batch: &BatchProbabilities, weights: &PenalizationMatrix) -> Result<QwkTerms> {
    let q = batch.q_classes();
    if weights.q_classes() != q {
        return Err(Error::domain(format!(
            "penalization matrix is {0}x{0}, batch has {q} classes",
            weights.q_classes()
        )));
    }
    let n = batch.len() as f64;
    let mut counts = vec![0usize; q];
    for &t in batch.labels() {
        counts[t] += 1;
    }
    let mut numerator = 0.0;
    let mut col_sums = vec![0.0; q];
    for (row, &t) in batch.rows().zip(batch.labels()) {
        let w = weights.row(t);
        for j in 0..q {
            numerator += w[j] * row[j];
            col_sums[j] += row[j];
        }
    }
    let mut class_weights = vec![0.0; q];
    for (i, &c) in counts.iter().enumerate() {
        let frac = c as f64 / n;
        for (j, a) in class_weights.iter_mut().enumerate() {
            *a += frac * weights.get(i, j);
        }
    }
    let denominator: f64 = class_weights.iter().zip(&col_sums).map(|(a, s)| a * s).sum();
    if denominator.is_nan() || denominator <= 0.0 {
        return Err(Error::UndefinedLoss(format!("QWK_c denominator is {denominator}")));
    }
    Ok(QwkTerms { numerator, denominator, class_weights })
}

/// Continuous kappa loss on a batch; lower is better, range `[0, 2]`.
pub fn qwk_c_loss(batch: &BatchProbabilities, weights: &PenalizationMatrix) -> Result<f64> {
    let t = qwk_terms(batch, weights)?;
    Ok(t.numerator / t.denominator)
}

/// Loss value together with `dLoss/dprobs`, row-major `N x Q`.
pub fn qwk_c_loss_and_gradient(batch: &BatchProbabilities, weights: &PenalizationMatrix) -> Result<(f64, Vec<f64>)> {
    let t = qwk_terms(batch, weights)?;
    let loss = t.numerator / t.denominator;
    let q = batch.q_classes();
    let mut grad = Vec::with_capacity(batch.len() * q);
    for &label in batch.labels() {
        let w = weights.row(label);
        grad.extend(w.iter().zip(&t.class_weights).map(|(wj, aj)| (wj - loss * aj) / t.denominator));
    }
    Ok((loss, grad))
}

pub fn qwk_c_gradient(batch: &BatchProbabilities, weights: &PenalizationMatrix) -> Result<Vec<f64>> {
    qwk_c_loss_and_gradient(batch, weights).map(|(_, g)| g)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossEntropy {
    pub loss: f64,
    pub grad: Vec<f64>,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

/// `-log softmax(logits)[label]` via log-sum-exp, gradient `softmax - onehot`.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<CrossEntropy> {
    if label >= logits.len() {
        return Err(Error::domain(format!("label {label} out of range for {} classes", logits.len())));
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("logits must be finite"));
    }
    let top = predict_argmax(logits);
    let max = logits[top];
    // log-sum-exp as max + ln(1 + rest), keeping precision when one logit dominates
    let rest: f64 = logits.iter().enumerate().filter(|&(i, _)| i != top).map(|(_, &x)| (x - max).exp()).sum();
    let log1p_rest = rest.ln_1p();
    let log_z = max + log1p_rest;
    let loss = (max - logits[label]) + log1p_rest;
    let mut grad: Vec<f64> = logits.iter().map(|&x| (x - log_z).exp()).collect();
    grad[label] -= 1.0;
    Ok(CrossEntropy { loss, grad })
}
