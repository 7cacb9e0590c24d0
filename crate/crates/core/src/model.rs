//! Backbone plus output head: the unit that is trained, evaluated and saved.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::backbone::{BackboneGradients, BackboneParams, BackboneSpec};
use crate::clm_head::ClmParameters;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::link::LinkFunction;
use crate::losses::{qwk_c_loss_and_gradient, softmax, softmax_cross_entropy, BatchProbabilities, PenalizationMatrix};
use crate::metrics::{evaluate_all, Decision, EvaluationReport};

/// Output layer family: a cumulative link model, or the nominal softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum HeadKind {
    Clm(LinkFunction),
    Nominal,
}

impl HeadKind {
    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Clm(link) => link.name(),
            HeadKind::Nominal => "nominal",
        }
    }

    pub fn is_ordinal(self) -> bool {
        matches!(self, HeadKind::Clm(_))
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "nominal" {
            Ok(HeadKind::Nominal)
        } else {
            s.parse().map(HeadKind::Clm)
        }
    }
}

impl TryFrom<String> for HeadKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<HeadKind> for String {
    fn from(h: HeadKind) -> String {
        h.name().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionRule {
    Interval,
    Argmax,
}

impl FromStr for DecisionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interval" => Ok(DecisionRule::Interval),
            "argmax" => Ok(DecisionRule::Argmax),
            other => Err(Error::domain(format!("unknown decision rule `{other}`"))),
        }
    }
}

impl fmt::Display for DecisionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecisionRule::Interval => "interval",
            DecisionRule::Argmax => "argmax",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    Clm { link: LinkFunction, params: ClmParameters },
    Nominal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrdinalModel {
    q_classes: usize,
    backbone: BackboneParams,
    head: Head,
}

/// Per-sample model outputs over a dataset.
#[derive(Debug, Clone)]
pub struct Predictions {
    pub probs: BatchProbabilities,
    /// Latent projections `l(x)`; `None` for nominal models.
    pub latents: Option<Vec<f64>>,
}

impl OrdinalModel {
    pub fn init<R: Rng + ?Sized>(
        kind: HeadKind,
        input_dim: usize,
        hidden: Vec<usize>,
        q_classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if q_classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {q_classes}")));
        }
        let output_dim = if kind.is_ordinal() { 1 } else { q_classes };
        let backbone = BackboneParams::init(BackboneSpec::new(input_dim, hidden, output_dim)?, rng)?;
        let head = match kind {
            HeadKind::Clm(link) => Head::Clm { link, params: ClmParameters::initial(q_classes)? },
            HeadKind::Nominal => Head::Nominal,
        };
        Ok(OrdinalModel { q_classes, backbone, head })
    }

    pub fn from_parts(q_classes: usize, backbone: BackboneParams, head: Head) -> Result<Self> {
        let expected_out = match &head {
            Head::Clm { params, .. } => {
                params.validate()?;
                if params.q_classes() != q_classes {
                    return Err(Error::domain("CLM head and model disagree on the number of classes"));
                }
                1
            }
            Head::Nominal => q_classes,
        };
        if backbone.spec().output_dim != expected_out {
            return Err(Error::domain(format!(
                "backbone emits {} outputs, head needs {expected_out}",
                backbone.spec().output_dim
            )));
        }
        Ok(OrdinalModel { q_classes, backbone, head })
    }

    pub fn q_classes(&self) -> usize {
        self.q_classes
    }

    pub fn input_dim(&self) -> usize {
        self.backbone.spec().input_dim
    }

    pub fn kind(&self) -> HeadKind {
        match &self.head {
            Head::Clm { link, .. } => HeadKind::Clm(*link),
            Head::Nominal => HeadKind::Nominal,
        }
    }

    pub fn backbone(&self) -> &BackboneParams {
        &self.backbone
    }

    pub fn head(&self) -> &Head {
        &self.head
    }

    pub fn clm_params(&self) -> Option<&ClmParameters> {
        match &self.head {
            Head::Clm { params, .. } => Some(params),
            Head::Nominal => None,
        }
    }

    pub fn n_params(&self) -> usize {
        self.backbone.n_params() + self.clm_params().map_or(0, ClmParameters::n_params)
    }

    /// Backbone parameters, then `[b1, alpha..., tau]` for CLM heads.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        self.backbone.flatten_into(&mut out);
        if let Some(p) = self.clm_params() {
            p.flatten_into(&mut out);
        }
        out
    }

    pub fn load_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params());
        let used = self.backbone.load_flat(flat);
        if let Head::Clm { params, .. } = &mut self.head {
            params.load_flat(&flat[used..]);
        }
    }

    /// Clamps `tau` to its lower bound after an update.
    pub fn project(&mut self) {
        if let Head::Clm { params, .. } = &mut self.head {
            params.project_tau();
        }
    }

    fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.n_features() != self.input_dim() {
            return Err(Error::domain(format!(
                "data has {} features, model expects {}",
                data.n_features(),
                self.input_dim()
            )));
        }
        if data.q_classes() != self.q_classes {
            return Err(Error::domain(format!(
                "data has {} classes, model has {}",
                data.q_classes(),
                self.q_classes
            )));
        }
        Ok(())
    }

    /// Class probabilities (and latent projection for CLM heads) of one input.
    pub fn predict_one(&self, x: &[f64]) -> Result<(Vec<f64>, Option<f64>)> {
        let (out, _) = self.backbone.forward(x)?;
        match &self.head {
            Head::Clm { link, params } => {
                let rec = params.forward(*link, out[0])?;
                Ok((rec.probs.into_inner(), Some(out[0])))
            }
            Head::Nominal => {
                if out.iter().any(|v| !v.is_finite()) {
                    return Err(Error::domain("non-finite logits"));
                }
                Ok((softmax(&out), None))
            }
        }
    }

    pub fn predict(&self, data: &Dataset) -> Result<Predictions> {
        self.check_dataset(data)?;
        let mut probs = Vec::with_capacity(data.len() * self.q_classes);
        let mut latents = Vec::with_capacity(data.len());
        for i in 0..data.len() {
            let (p, l) = self.predict_one(data.row(i))?;
            probs.extend(p);
            latents.extend(l);
        }
        let probs = BatchProbabilities::new(self.q_classes, probs, data.labels().to_vec())?;
        let latents = self.head_is_clm().then_some(latents);
        Ok(Predictions { probs, latents })
    }

    fn head_is_clm(&self) -> bool {
        matches!(self.head, Head::Clm { .. })
    }

    pub fn evaluate(&self, data: &Dataset, rule: DecisionRule) -> Result<EvaluationReport> {
        let preds = self.predict(data)?;
        match (rule, &self.head, &preds.latents) {
            (DecisionRule::Argmax, _, _) => evaluate_all(&preds.probs, Decision::Argmax),
            (DecisionRule::Interval, Head::Clm { params, .. }, Some(latents)) => {
                evaluate_all(&preds.probs, Decision::Interval { params, latents })
            }
            (DecisionRule::Interval, _, _) => {
                Err(Error::UnsupportedRule { rule: rule.to_string(), mode: self.kind().to_string() })
            }
        }
    }

    /// Default rule: interval for CLM heads, argmax for nominal ones.
    pub fn default_rule(&self) -> DecisionRule {
        if self.head_is_clm() {
            DecisionRule::Interval
        } else {
            DecisionRule::Argmax
        }
    }

    /// Batch loss and its gradient over the flattened parameters. CLM heads
    /// use the continuous QWK loss over the whole batch; the nominal head uses
    /// mean cross-entropy.
    pub fn loss_and_gradient(&self, data: &Dataset, indices: &[usize], weights: &PenalizationMatrix) -> Result<(f64, Vec<f64>)> {
        self.check_dataset(data)?;
        if indices.is_empty() {
            return Err(Error::domain("empty batch"));
        }
        let mut outputs = Vec::with_capacity(indices.len());
        let mut caches = Vec::with_capacity(indices.len());
        for &i in indices {
            let (out, cache) = self.backbone.forward(data.row(i))?;
            if let Some(index) = out.iter().position(|v| !v.is_finite()) {
                return Err(Error::Divergence { what: "network output", index });
            }
            outputs.push(out);
            caches.push(cache);
        }
        let labels: Vec<usize> = indices.iter().map(|&i| data.labels()[i]).collect();
        let mut bgrads = BackboneGradients::zeros(self.backbone.spec());
        let mut flat = Vec::with_capacity(self.n_params());
        let loss = match &self.head {
            Head::Clm { link, params } => {
                let mut probs = Vec::with_capacity(indices.len() * self.q_classes);
                for out in &outputs {
                    probs.extend_from_slice(&params.forward(*link, out[0])?.probs);
                }
                let batch = BatchProbabilities::new_unnormalized(self.q_classes, probs, labels)?;
                let (loss, d_probs) = qwk_c_loss_and_gradient(&batch, weights)?;
                let mut d_head = vec![0.0; params.n_params()];
                for (k, (out, cache)) in outputs.iter().zip(&caches).enumerate() {
                    let upstream = &d_probs[k * self.q_classes..(k + 1) * self.q_classes];
                    let g = params.gradients(*link, out[0], upstream)?;
                    let mut gh = Vec::with_capacity(d_head.len());
                    g.flatten_into(&mut gh);
                    for (a, b) in d_head.iter_mut().zip(gh) {
                        *a += b;
                    }
                    self.backbone.backward_accumulate(cache, &[g.d_latent], &mut bgrads)?;
                }
                bgrads.flatten_into(&mut flat);
                flat.extend(d_head);
                loss
            }
            Head::Nominal => {
                let n = indices.len() as f64;
                let mut total = 0.0;
                for ((out, cache), &t) in outputs.iter().zip(&caches).zip(&labels) {
                    let ce = softmax_cross_entropy(out, t)?;
                    total += ce.loss;
                    let upstream: Vec<f64> = ce.grad.iter().map(|g| g / n).collect();
                    self.backbone.backward_accumulate(cache, &upstream, &mut bgrads)?;
                }
                bgrads.flatten_into(&mut flat);
                total / n
            }
        };
        if !loss.is_finite() {
            return Err(Error::Divergence { what: "loss", index: 0 });
        }
        Ok((loss, flat))
    }
}
