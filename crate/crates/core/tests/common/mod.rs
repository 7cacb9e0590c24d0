#![allow(dead_code)]

use ordinal_clm::data::Dataset;
use ordinal_clm::losses::PenalizationMatrix;
use ordinal_clm::model::OrdinalModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(1.0)
}

/// Largest relative error between the model's analytic batch gradient and
/// central differences of its loss, over every parameter.
pub fn max_model_gradient_error(model: &OrdinalModel, data: &Dataset, indices: &[usize]) -> f64 {
    let weights = PenalizationMatrix::quadratic(model.q_classes()).unwrap();
    let (_, analytic) = model.loss_and_gradient(data, indices, &weights).unwrap();
    let base = model.flatten();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + FD_STEP;
        probe.load_flat(&p);
        let up = probe.loss_and_gradient(data, indices, &weights).unwrap().0;
        p[i] = base[i] - FD_STEP;
        probe.load_flat(&p);
        let down = probe.loss_and_gradient(data, indices, &weights).unwrap().0;
        let numeric = (up - down) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(analytic[i], numeric));
    }
    worst
}

pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize, q: usize) -> Dataset {
    let features = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
    let labels = (0..n).map(|_| rng.random_range(0..q)).collect();
    Dataset::new(d, q, features, labels).unwrap()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random normalized probability rows, entries bounded away from ties.
pub fn random_prob_rows(rng: &mut ChaCha8Rng, n: usize, q: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..q).map(|_| rng.random_range(0.0..1.0f64) + 1e-3).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|x| x / s).collect()
        })
        .collect()
}

pub fn one_hot_rows(predictions: &[usize], q: usize) -> Vec<Vec<f64>> {
    predictions
        .iter()
        .map(|&p| (0..q).map(|j| if j == p { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Independent per-sample metric oracles.
pub mod brute {
    pub fn qwk(labels: &[usize], preds: &[usize], q: usize) -> Option<f64> {
        let n = labels.len() as f64;
        let w = |i: usize, j: usize| ((i as f64 - j as f64).powi(2)) / ((q - 1) as f64).powi(2);
        let mut num = 0.0;
        for (&t, &p) in labels.iter().zip(preds) {
            num += w(t, p);
        }
        let mut den = 0.0;
        for i in 0..q {
            let ri = labels.iter().filter(|&&t| t == i).count() as f64;
            for j in 0..q {
                let cj = preds.iter().filter(|&&p| p == j).count() as f64;
                den += w(i, j) * ri * cj / n;
            }
        }
        (den != 0.0).then(|| 1.0 - num / den)
    }

    pub fn ms(labels: &[usize], preds: &[usize], q: usize) -> f64 {
        let mut best = f64::INFINITY;
        for c in 0..q {
            let total = labels.iter().filter(|&&t| t == c).count();
            if total == 0 {
                continue;
            }
            let hit = labels.iter().zip(preds).filter(|&(&t, &p)| t == c && p == c).count();
            best = best.min(hit as f64 / total as f64);
        }
        best
    }

    pub fn mae(labels: &[usize], preds: &[usize]) -> f64 {
        let s: usize = labels.iter().zip(preds).map(|(&t, &p)| t.abs_diff(p)).sum();
        s as f64 / labels.len() as f64
    }

    pub fn ccr(labels: &[usize], preds: &[usize]) -> f64 {
        labels.iter().zip(preds).filter(|(t, p)| t == p).count() as f64 / labels.len() as f64
    }

    pub fn one_off(labels: &[usize], preds: &[usize]) -> f64 {
        labels.iter().zip(preds).filter(|&(&t, &p)| t.abs_diff(p) <= 1).count() as f64 / labels.len() as f64
    }

    pub fn top_k(rows: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
        let mut hits = 0;
        for (row, &t) in rows.iter().zip(labels) {
            let mut order: Vec<usize> = (0..row.len()).collect();
            order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
            if order[..k].contains(&t) {
                hits += 1;
            }
        }
        hits as f64 / labels.len() as f64
    }

    pub fn argmax(row: &[f64]) -> usize {
        let mut best = 0;
        for j in 1..row.len() {
            if row[j] > row[best] {
                best = j;
            }
        }
        best
    }
}
