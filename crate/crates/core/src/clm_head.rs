//! Cumulative link model output layer.
//!
//! The head turns a scalar latent projection `l(x)` into `Q` ordered class
//! probabilities. The projection is rescaled by a learnable `tau`
//! (`f = l / tau`) and compared against `Q - 1` thresholds:
//!
//! ```text
//! P(y <= C_q | x) = F(b_q - f)          q = 0 .. Q-2
//! P(y  = C_q | x) = P(y <= C_q) - P(y <= C_{q-1})
//! ```
//!
//! Thresholds are parameterized as `b_0 = b1` and
//! `b_q = b1 + alpha_0^2 + ... + alpha_{q-1}^2`, so they are nondecreasing for
//! any unconstrained `(b1, alpha)`.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::{LinkFunction, PROB_EPS};

/// Lower bound enforced on `tau` after every optimizer step.
pub const TAU_MIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClmParameters {
    pub b1: f64,
    pub alpha: Vec<f64>,
    pub tau: f64,
}

impl ClmParameters {
    pub fn new(b1: f64, alpha: Vec<f64>, tau: f64) -> Result<Self> {
        let params = ClmParameters { b1, alpha, tau };
        params.validate()?;
        Ok(params)
    }

    /// Thresholds evenly spaced on `[-2, 2]`, `tau = 1`.
    pub fn initial(q_classes: usize) -> Result<Self> {
        if q_classes < 2 {
            return Err(Error::domain(format!("need at least 2 classes, got {q_classes}")));
        }
        let n_inc = q_classes - 2;
        let step = if n_inc > 0 { (4.0 / n_inc as f64).sqrt() } else { 0.0 };
        Ok(ClmParameters { b1: -2.0, alpha: vec![step; n_inc], tau: 1.0 })
    }

    pub fn q_classes(&self) -> usize {
        self.alpha.len() + 2
    }

    pub fn validate(&self) -> Result<()> {
        if !self.b1.is_finite() || self.alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::domain("CLM thresholds must be finite"));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::domain(format!("tau must be positive and finite, got {}", self.tau)));
        }
        Ok(())
    }

    /// `(b1, b1 + alpha_0^2, b1 + alpha_0^2 + alpha_1^2, ...)`, length `Q - 1`.
    pub fn thresholds(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.alpha.len() + 1);
        let mut b = self.b1;
        out.push(b);
        for a in &self.alpha {
            b += a * a;
            out.push(b);
        }
        debug_assert!(out.windows(2).all(|w| w[0] <= w[1]), "thresholds not monotone: {out:?}");
        out
    }

    pub fn projection(&self, latent: f64) -> f64 {
        latent / self.tau
    }

    pub fn project_tau(&mut self) {
        if self.tau < TAU_MIN || self.tau.is_nan() {
            self.tau = TAU_MIN;
        }
    }

    /// Number of trainable scalars: `b1`, the increments, and `tau`.
    pub fn n_params(&self) -> usize {
        self.alpha.len() + 2
    }

    /// Layout `[b1, alpha..., tau]`.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        out.push(self.b1);
        out.extend_from_slice(&self.alpha);
        out.push(self.tau);
    }

    pub fn load_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params());
        self.b1 = flat[0];
        let n = self.alpha.len();
        self.alpha.copy_from_slice(&flat[1..1 + n]);
        self.tau = flat[1 + n];
    }

    pub fn forward(&self, link: LinkFunction, latent: f64) -> Result<ClmForwardRecord> {
        self.validate()?;
        if !latent.is_finite() {
            return Err(Error::domain(format!("latent projection must be finite, got {latent}")));
        }
        let parts = ForwardParts::compute(self, link, latent);
        Ok(parts.into_record())
    }

    /// Backpropagates `upstream = dLoss/dprobs` through the head.
    pub fn gradients(&self, link: LinkFunction, latent: f64, upstream: &[f64]) -> Result<ClmGradients> {
        self.validate()?;
        if !latent.is_finite() {
            return Err(Error::domain(format!("latent projection must be finite, got {latent}")));
        }
        let q = self.q_classes();
        if upstream.len() != q {
            return Err(Error::domain(format!("upstream has length {}, expected {q}", upstream.len())));
        }
        let parts = ForwardParts::compute(self, link, latent);
        Ok(parts.backward(self, link, latent, upstream))
    }

    /// Interval decision rule: class `q` with `b_{q-1} < f <= b_q`
    /// (`b_{-1} = -inf`, `b_{Q-1} = +inf`). A projection exactly on a
    /// threshold goes to the lower class.
    pub fn predict_interval(&self, latent: f64) -> usize {
        let f = self.projection(latent);
        self.thresholds().iter().take_while(|&&b| b < f).count()
    }
}

/// Class probability distribution produced by a head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ProbabilityVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ProbabilityVector {
    fn from(v: Vec<f64>) -> Self {
        ProbabilityVector(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClmForwardRecord {
    /// `f(x) = l(x) / tau`.
    pub projection: f64,
    /// `P(y <= C_q | x)` for `q = 0 .. Q-2`.
    pub cumulative: Vec<f64>,
    pub probs: ProbabilityVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClmGradients {
    pub d_latent: f64,
    pub d_b1: f64,
    pub d_alpha: Vec<f64>,
    pub d_tau: f64,
}

impl ClmGradients {
    /// Layout matches [`ClmParameters::flatten_into`].
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        out.push(self.d_b1);
        out.extend_from_slice(&self.d_alpha);
        out.push(self.d_tau);
    }
}

struct ForwardParts {
    projection: f64,
    z: Vec<f64>,
    cumulative: Vec<f64>,
    raw: Vec<f64>,
    total: f64,
}

impl ForwardParts {
    fn compute(params: &ClmParameters, link: LinkFunction, latent: f64) -> Self {
        let projection = params.projection(latent);
        let z: Vec<f64> = params.thresholds().iter().map(|b| b - projection).collect();
        let cumulative: Vec<f64> = z.iter().map(|&zq| link.cdf_unchecked(zq)).collect();
        let q = cumulative.len() + 1;
        let mut raw = Vec::with_capacity(q);
        let mut prev = 0.0;
        for &c in &cumulative {
            raw.push(c - prev);
            prev = c;
        }
        raw.push(1.0 - prev);
        let total = raw.iter().map(|&p| p.max(PROB_EPS)).sum();
        ForwardParts { projection, z, cumulative, raw, total }
    }

    fn into_record(self) -> ClmForwardRecord {
        let total = self.total;
        let probs = self.raw.iter().map(|&p| p.max(PROB_EPS) / total).collect::<Vec<_>>();
        ClmForwardRecord { projection: self.projection, cumulative: self.cumulative, probs: probs.into() }
    }

    fn backward(&self, params: &ClmParameters, link: LinkFunction, latent: f64, upstream: &[f64]) -> ClmGradients {
        let q = self.raw.len();
        let total = self.total;
        // probs_q = m_q / S with m_q = max(raw_q, eps), S = sum m.
        let weighted: f64 = self.raw.iter().zip(upstream).map(|(&p, &u)| u * p.max(PROB_EPS) / total).sum();
        let d_raw: Vec<f64> = self
            .raw
            .iter()
            .zip(upstream)
            .map(|(&p, &u)| if p >= PROB_EPS { (u - weighted) / total } else { 0.0 })
            .collect();

        // raw_q = c_q - c_{q-1}, raw_{Q-1} = 1 - c_{Q-2}.
        let d_z: Vec<f64> = (0..q - 1).map(|k| (d_raw[k] - d_raw[k + 1]) * link.effective_pdf(self.z[k])).collect();

        let d_b1: f64 = d_z.iter().sum();
        // b_k depends on alpha_i for i < k, with db_k/dalpha_i = 2 alpha_i.
        let mut d_alpha = vec![0.0; params.alpha.len()];
        let mut tail = 0.0;
        for i in (0..params.alpha.len()).rev() {
            tail += d_z[i + 1];
            d_alpha[i] = 2.0 * params.alpha[i] * tail;
        }
        let d_projection = -d_b1;
        ClmGradients {
            d_latent: d_projection / params.tau,
            d_b1,
            d_alpha,
            d_tau: -d_projection * latent / (params.tau * params.tau),
        }
    }
}

pub fn build_thresholds(params: &ClmParameters) -> Vec<f64> {
    params.thresholds()
}

pub fn clm_forward(params: &ClmParameters, link: LinkFunction, latent: f64) -> Result<ClmForwardRecord> {
    params.forward(link, latent)
}

pub fn clm_gradients(params: &ClmParameters, link: LinkFunction, latent: f64, upstream: &[f64]) -> Result<ClmGradients> {
    params.gradients(link, latent, upstream)
}

pub fn predict_interval(params: &ClmParameters, latent: f64) -> usize {
    params.predict_interval(latent)
}

/// Index of the largest probability, lowest index on ties.
pub fn predict_argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = i;
        }
    }
    best
}
