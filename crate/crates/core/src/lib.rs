//! Cumulative link model (CLM) output heads for ordinal classification.
//!
//! A small ELU network produces a scalar projection per sample; the CLM head
//! turns it into ordered class probabilities through a logit, probit or
//! complementary log-log link, and training minimizes a continuous quadratic
//! weighted kappa loss with Adam and exponential learning-rate decay. A
//! softmax/cross-entropy head is included as the nominal baseline.
//!
//! Module map:
//!
//! - [`link`], [`clm_head`]: link functions, thresholds, forward pass and analytic gradients.
//! - [`losses`], [`metrics`]: QWK and its continuous loss, cross-entropy, and the evaluation suite.
//! - [`backbone`], [`optimizer`]: MLP feature extractor, Adam, learning-rate schedule.
//! - [`data`]: synthetic latent-variable generator, CSV I/O, splits, oversampling.
//! - [`model`], [`trainer`], [`bundle`]: training loop and model serialization.
//! - [`grid`], [`cli`]: factor-grid experiments and the command-line tool.

pub mod backbone;
pub mod bundle;
pub mod cli;
pub mod clm_head;
pub mod data;
pub mod error;
pub mod grid;
pub mod hexfloat;
pub mod link;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod optimizer;
pub mod report;
pub mod trainer;

pub use clm_head::{ClmForwardRecord, ClmGradients, ClmParameters, ProbabilityVector};
pub use data::{Dataset, SyntheticSpec};
pub use error::{Error, Result};
pub use link::LinkFunction;
pub use losses::{BatchProbabilities, PenalizationMatrix};
pub use metrics::{ConfusionMatrix, EvaluationReport};
pub use model::{DecisionRule, HeadKind, OrdinalModel};
pub use trainer::{TrainingConfig, TrainingHistory};
