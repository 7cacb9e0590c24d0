//! Mini-batch training with best-on-validation checkpointing.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{balance_oversample, Dataset};
use crate::error::{Error, Result};
use crate::losses::PenalizationMatrix;
use crate::metrics::EvaluationReport;
use crate::model::{DecisionRule, HeadKind, OrdinalModel};
use crate::optimizer::{AdamState, LrSchedule};

pub const DEFAULT_MAX_EPOCHS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub head: HeadKind,
    pub eta0: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Oversample the training split to uniform class counts.
    pub balance: bool,
    pub hidden: Vec<usize>,
}

impl TrainingConfig {
    pub fn new(head: HeadKind, eta0: f64, batch_size: usize, seed: u64) -> Self {
        TrainingConfig {
            head,
            eta0,
            batch_size,
            max_epochs: DEFAULT_MAX_EPOCHS,
            seed,
            balance: false,
            hidden: vec![32, 32],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta0.is_finite() && self.eta0 > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.eta0)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.batch_size == 1 && self.head.is_ordinal() {
            return Err(Error::Config("the QWK loss is a batch loss; CLM training needs batch size >= 2".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    /// `None` when validation QWK is undefined.
    pub val_qwk: Option<f64>,
    pub val_mae: f64,
    /// Seconds since training started; excluded from history files unless requested.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept; `None` if no epoch completed.
    pub best_epoch: Option<usize>,
    pub diverged: bool,
    pub divergence: Option<String>,
    pub optimizer_steps: u64,
}

#[derive(Serialize)]
struct HistoryLine<'a> {
    kind: &'static str,
    #[serde(flatten)]
    record: &'a EpochRecord,
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    kind: &'static str,
    best_epoch: Option<usize>,
    diverged: bool,
    divergence: &'a Option<String>,
    optimizer_steps: u64,
}

impl TrainingHistory {
    /// One JSON object per line: epoch records, then a summary record.
    /// Wall-clock times are only written when `include_timing` is set, so the
    /// default output is reproducible byte for byte.
    pub fn to_jsonl(&self, include_timing: bool) -> Result<String> {
        let mut out = String::new();
        for rec in &self.epochs {
            let mut rec = rec.clone();
            if !include_timing {
                rec.wall_time = None;
            }
            out.push_str(&serde_json::to_string(&HistoryLine { kind: "epoch", record: &rec })?);
            out.push('\n');
        }
        let summary = SummaryLine {
            kind: "summary",
            best_epoch: self.best_epoch,
            diverged: self.diverged,
            divergence: &self.divergence,
            optimizer_steps: self.optimizer_steps,
        };
        out.push_str(&serde_json::to_string(&summary)?);
        out.push('\n');
        Ok(out)
    }

    pub fn best_record(&self) -> Option<&EpochRecord> {
        self.best_epoch.and_then(|e| self.epochs.get(e))
    }
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub model: OrdinalModel,
    pub history: TrainingHistory,
}

fn better(candidate: Option<f64>, incumbent: Option<Option<f64>>) -> bool {
    match (candidate, incumbent) {
        (_, None) => true,
        (Some(c), Some(Some(b))) => c > b,
        (Some(_), Some(None)) => true,
        (None, Some(_)) => false,
    }
}

/// Trains for `max_epochs` passes over the (optionally balanced) training
/// split and returns the parameters with the highest validation QWK.
///
/// A non-finite loss, gradient or network output stops training; the history
/// is flagged as diverged and the best model so far is returned.
pub fn train(config: &TrainingConfig, train_set: &Dataset, val_set: &Dataset) -> Result<TrainingOutcome> {
    config.validate()?;
    if train_set.n_features() != val_set.n_features() || train_set.q_classes() != val_set.q_classes() {
        return Err(Error::domain("training and validation sets have different shapes"));
    }
    let q = train_set.q_classes();
    let weights = PenalizationMatrix::quadratic(q)?;
    let schedule = LrSchedule::new(config.eta0)?;

    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = OrdinalModel::init(config.head, train_set.n_features(), config.hidden.clone(), q, &mut init_rng)?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);

    let balanced;
    let train_data = if config.balance {
        balanced = balance_oversample(train_set, config.seed)?;
        &balanced
    } else {
        train_set
    };

    let rule = model.default_rule();
    let mut params = model.flatten();
    let mut adam = AdamState::new(params.len());
    let mut history = TrainingHistory::default();
    let mut best_model = model.clone();
    let mut best_qwk: Option<Option<f64>> = None;
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let start = Instant::now();

    'epochs: for epoch in 0..config.max_epochs {
        let lr = schedule.lr_at(epoch as i64)?;
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let step = model
                .loss_and_gradient(train_data, batch, &weights)
                .and_then(|(loss, grads)| adam.step(&mut params, &grads, lr).map(|_| loss));
            match step {
                Ok(loss) => {
                    history.optimizer_steps += 1;
                    loss_sum += loss * batch.len() as f64;
                    model.load_flat(&params);
                    model.project();
                    if let Some(p) = model.clm_params() {
                        let n = params.len();
                        params[n - 1] = p.tau;
                    }
                }
                Err(e @ Error::Divergence { .. }) => {
                    history.diverged = true;
                    history.divergence = Some(format!("epoch {epoch}: {e}"));
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        let report = match model.evaluate(val_set, rule) {
            Ok(r) => r,
            Err(Error::Domain(msg)) => {
                history.diverged = true;
                history.divergence = Some(format!("epoch {epoch}: validation failed: {msg}"));
                break;
            }
            Err(e) => return Err(e),
        };
        let record = EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / train_data.len() as f64,
            val_qwk: report.qwk,
            val_mae: report.mae,
            wall_time: Some(start.elapsed().as_secs_f64()),
        };
        if better(record.val_qwk, best_qwk) {
            best_qwk = Some(record.val_qwk);
            history.best_epoch = Some(epoch);
            best_model = model.clone();
        }
        history.epochs.push(record);
    }
    Ok(TrainingOutcome { model: best_model, history })
}

/// Full metric report of `model` on `data`.
pub fn evaluate(model: &OrdinalModel, data: &Dataset, rule: DecisionRule) -> Result<EvaluationReport> {
    model.evaluate(data, rule)
}
