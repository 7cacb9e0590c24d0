//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data or model
//! error, 4 training divergence.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bundle::ModelBundle;
use crate::clm_head::predict_argmax;
use crate::data::{generate_synthetic, load_csv, save_csv, save_ground_truth, split, SplitFractions, SyntheticSpec};
use crate::error::{Error, Result};
use crate::grid::{run_grid, runs_csv, summary_csv, summary_table, GridSpec};
use crate::link::LinkFunction;
use crate::model::{DecisionRule, HeadKind};
use crate::report::{report_csv, report_text};
use crate::trainer::{train, TrainingConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "ordinal-clm", version, about = "Cumulative link model heads for ordinal classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic latent-variable ordinal dataset.
    Generate(GenerateArgs),
    /// Train a model and keep the epoch with the best validation QWK.
    Train(TrainArgs),
    /// Evaluate a saved model on a dataset.
    Evaluate(EvaluateArgs),
    /// Write per-sample class probabilities and predictions.
    Predict(PredictArgs),
    /// Run a link x learning-rate x batch-size grid with repeated seeds.
    Grid(GridArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Number of samples.
    #[arg(long)]
    pub samples: usize,
    /// Number of standard-normal input features.
    #[arg(long)]
    pub features: usize,
    /// Number of ordered classes (at least 2).
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub classes: u64,
    /// Noise family: logit, probit or cloglog.
    #[arg(long, default_value = "logit")]
    pub link: LinkFunction,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated true weights (defaults to a fixed decaying pattern).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub weights: Option<Vec<f64>>,
    /// Comma-separated strictly increasing thresholds.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub thresholds: Option<Vec<f64>>,
    /// Output directory; receives data.csv and truth.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training CSV (`f0,...,label`).
    #[arg(long)]
    pub data: PathBuf,
    /// Output head: logit, probit, cloglog or nominal.
    #[arg(long, default_value = "logit")]
    pub link: HeadKind,
    /// Initial learning rate.
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Oversample the training split to balanced classes.
    #[arg(long)]
    pub balance: bool,
    /// Fraction of the data held out for validation.
    #[arg(long, default_value_t = 0.1)]
    pub val_fraction: f64,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "32,32")]
    pub hidden: Vec<usize>,
    /// Number of classes; inferred from the labels when omitted.
    #[arg(long)]
    pub classes: Option<usize>,
    /// Record wall-clock time per epoch in the history file.
    #[arg(long)]
    pub timings: bool,
    /// Output directory; receives model.json and history.jsonl.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Hard-label rule: interval (CLM only) or argmax. Defaults to the model's natural rule.
    #[arg(long)]
    pub decision: Option<DecisionRule>,
    /// Report CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Predictions CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Heads to compare, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "logit,probit,cloglog")]
    pub links: Vec<HeadKind>,
    /// Initial learning rates, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.0001,0.001,0.01")]
    pub lrs: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "32")]
    pub batch_sizes: Vec<usize>,
    /// Repetitions per cell, seeded base-seed + i.
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub base_seed: u64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, value_delimiter = ',', default_value = "32,32")]
    pub hidden: Vec<usize>,
    #[arg(long)]
    pub balance: bool,
    #[arg(long, default_value_t = 0.1)]
    pub val_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    pub test_fraction: f64,
    #[arg(long)]
    pub classes: Option<usize>,
    /// Output directory; receives grid_summary.csv and grid_runs.csv.
    #[arg(long)]
    pub out: PathBuf,
}

impl clap::builder::ValueParserFactory for LinkFunction {
    type Parser = clap::builder::ValueParser;
    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| s.parse::<LinkFunction>().map_err(|e| e.to_string()))
    }
}

impl clap::builder::ValueParserFactory for HeadKind {
    type Parser = clap::builder::ValueParser;
    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| s.parse::<HeadKind>().map_err(|e| e.to_string()))
    }
}

impl clap::builder::ValueParserFactory for DecisionRule {
    type Parser = clap::builder::ValueParser;
    fn value_parser() -> Self::Parser {
        clap::builder::ValueParser::new(|s: &str| s.parse::<DecisionRule>().map_err(|e| e.to_string()))
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_USAGE,
        Error::Divergence { .. } => EXIT_DIVERGED,
        _ => EXIT_DATA,
    }
}

/// Runs one parsed command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Grid(a) => cmd_grid(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<i32> {
    let q = args.classes as usize;
    let mut spec = SyntheticSpec::with_defaults(args.samples, args.features, q, args.link, args.seed);
    if let Some(w) = &args.weights {
        if w.len() != args.features {
            return Err(Error::Config(format!("{} weights given for {} features", w.len(), args.features)));
        }
        spec.true_weights = w.clone();
    }
    if let Some(t) = &args.thresholds {
        spec.true_thresholds = t.clone();
    }
    let (data, truth) = generate_synthetic(&spec)?;
    ensure_dir(&args.out)?;
    save_csv(&data, &args.out.join("data.csv"))?;
    save_ground_truth(&truth, &args.out.join("truth.json"))?;
    println!("wrote {} samples to {}", data.len(), args.out.display());
    Ok(EXIT_OK)
}

pub fn cmd_train(args: &TrainArgs) -> Result<i32> {
    let data = load_csv(&args.data, args.classes)?;
    let fractions = SplitFractions::new(1.0 - args.val_fraction, args.val_fraction, 0.0)?;
    let splits = split(&data, fractions, args.seed)?;
    for w in &splits.warnings {
        eprintln!("warning: {w}");
    }
    let config = TrainingConfig {
        head: args.link,
        eta0: args.lr,
        batch_size: args.batch_size,
        max_epochs: args.epochs,
        seed: args.seed,
        balance: args.balance,
        hidden: args.hidden.clone(),
    };
    let outcome = train(&config, &splits.train, &splits.val)?;
    let history = &outcome.history;
    ensure_dir(&args.out)?;
    let bundle = ModelBundle::from_model(&outcome.model, Some(&config), history.best_epoch, history.diverged);
    bundle.save(&args.out.join("model.json"))?;
    fs::write(args.out.join("history.jsonl"), history.to_jsonl(args.timings)?)?;

    if let Some(best) = history.best_epoch {
        let report = outcome.model.evaluate(&splits.val, outcome.model.default_rule())?;
        println!("best epoch {best} of {}", history.epochs.len());
        println!("validation: {}", report_text(&report));
    }
    if history.diverged {
        eprintln!("training diverged: {}", history.divergence.as_deref().unwrap_or("unknown cause"));
        return Ok(EXIT_DIVERGED);
    }
    Ok(EXIT_OK)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<i32> {
    let model = ModelBundle::load(&args.model)?.to_model()?;
    let data = load_csv(&args.data, Some(model.q_classes()))?;
    let rule = args.decision.unwrap_or_else(|| model.default_rule());
    let report = model.evaluate(&data, rule)?;
    fs::write(&args.out, report_csv(&report))?;
    println!("{}", report_text(&report));
    Ok(EXIT_OK)
}

pub fn cmd_predict(args: &PredictArgs) -> Result<i32> {
    let model = ModelBundle::load(&args.model)?.to_model()?;
    let data = load_csv(&args.data, Some(model.q_classes()))?;
    let preds = model.predict(&data)?;
    let q = model.q_classes();
    let mut out = String::new();
    for j in 0..q {
        out.push_str(&format!("p{j},"));
    }
    out.push_str("interval,argmax\n");
    for (k, row) in preds.probs.rows().enumerate() {
        for p in row {
            out.push_str(&format!("{p},"));
        }
        let interval = match (model.clm_params(), &preds.latents) {
            (Some(params), Some(latents)) => params.predict_interval(latents[k]).to_string(),
            _ => String::new(),
        };
        out.push_str(&format!("{interval},{}\n", predict_argmax(row)));
    }
    fs::write(&args.out, out)?;
    println!("wrote {} predictions to {}", data.len(), args.out.display());
    Ok(EXIT_OK)
}

pub fn cmd_grid(args: &GridArgs) -> Result<i32> {
    let data = load_csv(&args.data, args.classes)?;
    let train_fraction = 1.0 - args.val_fraction - args.test_fraction;
    let mut spec = GridSpec::new(args.links.clone(), args.lrs.clone(), args.batch_sizes.clone());
    spec.runs_per_cell = args.runs;
    spec.base_seed = args.base_seed;
    spec.max_epochs = args.epochs;
    spec.hidden = args.hidden.clone();
    spec.balance = args.balance;
    spec.fractions = SplitFractions::new(train_fraction, args.val_fraction, args.test_fraction)?;
    let result = run_grid(&spec, &data)?;
    ensure_dir(&args.out)?;
    fs::write(args.out.join("grid_summary.csv"), summary_csv(&result.cells))?;
    fs::write(args.out.join("grid_runs.csv"), runs_csv(&result.runs))?;
    print!("{}", summary_table(&result.cells));
    Ok(EXIT_OK)
}
