//! Hard-label and ranking metrics for ordinal predictions.

use serde::{Deserialize, Serialize};

use crate::clm_head::{predict_argmax, ClmParameters};
use crate::error::{Error, Result};
use crate::losses::{qwk_metric, BatchProbabilities};

/// Counts `O[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    q_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(q_classes: usize) -> Self {
        ConfusionMatrix { q_classes, counts: vec![0; q_classes * q_classes] }
    }

    pub fn from_counts(rows: Vec<Vec<u64>>) -> Result<Self> {
        let q = rows.len();
        if q == 0 || rows.iter().any(|r| r.len() != q) {
            return Err(Error::domain("confusion matrix must be square and nonempty"));
        }
        Ok(ConfusionMatrix { q_classes: q, counts: rows.concat() })
    }

    pub fn from_predictions(labels: &[usize], predictions: &[usize], q_classes: usize) -> Result<Self> {
        if labels.len() != predictions.len() {
            return Err(Error::domain(format!(
                "{} labels but {} predictions",
                labels.len(),
                predictions.len()
            )));
        }
        let mut m = ConfusionMatrix::zeros(q_classes);
        for (&t, &p) in labels.iter().zip(predictions) {
            if t >= q_classes || p >= q_classes {
                return Err(Error::domain(format!("class pair ({t}, {p}) out of range for {q_classes} classes")));
            }
            m.counts[t * q_classes + p] += 1;
        }
        Ok(m)
    }

    pub fn q_classes(&self) -> usize {
        self.q_classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.q_classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.chunks_exact(self.q_classes).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let mut out = vec![0; self.q_classes];
        for row in self.counts.chunks_exact(self.q_classes) {
            for (o, &c) in out.iter_mut().zip(row) {
                *o += c;
            }
        }
        out
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks_exact(self.q_classes).map(<[u64]>::to_vec).collect()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.q_classes).all(|i| (0..self.q_classes).all(|j| i == j || self.get(i, j) == 0))
    }

    fn nonempty_total(&self) -> Result<f64> {
        match self.total() {
            0 => Err(Error::domain("metric of an empty confusion matrix")),
            n => Ok(n as f64),
        }
    }
}

pub fn confusion_from_predictions(labels: &[usize], predictions: &[usize], q_classes: usize) -> Result<ConfusionMatrix> {
    ConfusionMatrix::from_predictions(labels, predictions, q_classes)
}

/// Lowest per-class recall. Classes without true samples are skipped.
pub fn minimum_sensitivity(confusion: &ConfusionMatrix) -> Result<f64> {
    confusion
        .row_sums()
        .iter()
        .enumerate()
        .filter(|&(_, &n)| n > 0)
        .map(|(q, &n)| confusion.get(q, q) as f64 / n as f64)
        .reduce(f64::min)
        .ok_or_else(|| Error::domain("minimum sensitivity of an empty confusion matrix"))
}

pub fn mean_absolute_error(confusion: &ConfusionMatrix) -> Result<f64> {
    let n = confusion.nonempty_total()?;
    let q = confusion.q_classes();
    let mut s = 0u64;
    for i in 0..q {
        for j in 0..q {
            s += i.abs_diff(j) as u64 * confusion.get(i, j);
        }
    }
    Ok(s as f64 / n)
}

pub fn ccr(confusion: &ConfusionMatrix) -> Result<f64> {
    let n = confusion.nonempty_total()?;
    let trace: u64 = (0..confusion.q_classes()).map(|q| confusion.get(q, q)).sum();
    Ok(trace as f64 / n)
}

pub fn one_off_accuracy(confusion: &ConfusionMatrix) -> Result<f64> {
    let n = confusion.nonempty_total()?;
    let q = confusion.q_classes();
    let mut s = 0u64;
    for i in 0..q {
        for j in i.saturating_sub(1)..(i + 2).min(q) {
            s += confusion.get(i, j);
        }
    }
    Ok(s as f64 / n)
}

/// Fraction of samples whose label ranks among the `k` most probable classes.
/// Ranking is by probability descending, then class index ascending.
pub fn top_k_ccr(batch: &BatchProbabilities, k: usize) -> Result<f64> {
    let q = batch.q_classes();
    if k == 0 || k > q {
        return Err(Error::domain(format!("k = {k} out of range 1..={q}")));
    }
    let mut hits = 0usize;
    for (row, &t) in batch.rows().zip(batch.labels()) {
        // Classes ranked ahead of t.
        let ahead = row
            .iter()
            .enumerate()
            .filter(|&(j, &p)| p > row[t] || (p == row[t] && j < t))
            .count();
        if ahead < k {
            hits += 1;
        }
    }
    Ok(hits as f64 / batch.len() as f64)
}

/// How hard labels are derived from a model's output.
#[derive(Debug, Clone, Copy)]
pub enum Decision<'a> {
    Argmax,
    /// Threshold rule on the latent projections, one per sample.
    Interval { params: &'a ClmParameters, latents: &'a [f64] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// `None` when QWK is undefined (0/0).
    pub qwk: Option<f64>,
    pub ms: f64,
    pub mae: f64,
    pub ccr: f64,
    pub top2: f64,
    pub top3: f64,
    pub one_off: f64,
    pub confusion: ConfusionMatrix,
}

impl EvaluationReport {
    pub fn from_confusion(confusion: ConfusionMatrix, top2: f64, top3: f64) -> Result<Self> {
        let qwk = match qwk_metric(&confusion) {
            Ok(v) => Some(v),
            Err(Error::UndefinedMetric(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(EvaluationReport {
            qwk,
            ms: minimum_sensitivity(&confusion)?,
            mae: mean_absolute_error(&confusion)?,
            ccr: ccr(&confusion)?,
            top2,
            top3,
            one_off: one_off_accuracy(&confusion)?,
            confusion,
        })
    }
}

pub fn hard_predictions(batch: &BatchProbabilities, decision: Decision<'_>) -> Result<Vec<usize>> {
    match decision {
        Decision::Argmax => Ok(batch.rows().map(predict_argmax).collect()),
        Decision::Interval { params, latents } => {
            if latents.len() != batch.len() {
                return Err(Error::domain(format!(
                    "{} latent projections for {} samples",
                    latents.len(),
                    batch.len()
                )));
            }
            if params.q_classes() != batch.q_classes() {
                return Err(Error::domain("CLM head and batch disagree on the number of classes"));
            }
            Ok(latents.iter().map(|&l| params.predict_interval(l)).collect())
        }
    }
}

/// Full metric suite. Top-k uses the raw probabilities; `k` is capped at `Q`
/// so Top-3 of a two-class problem is 1.
pub fn evaluate_all(batch: &BatchProbabilities, decision: Decision<'_>) -> Result<EvaluationReport> {
    let q = batch.q_classes();
    let predictions = hard_predictions(batch, decision)?;
    let confusion = ConfusionMatrix::from_predictions(batch.labels(), &predictions, q)?;
    let top2 = top_k_ccr(batch, 2.min(q))?;
    let top3 = top_k_ccr(batch, 3.min(q))?;
    EvaluationReport::from_confusion(confusion, top2, top3)
}
