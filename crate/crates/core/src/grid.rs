//! Factorial experiment runner: head/link x learning rate x batch size, each
//! cell repeated over seeds, summarized as mean and standard deviation.

use rayon::prelude::*;

use crate::data::{split, Dataset, SplitFractions};
use crate::error::{Error, Result};
use crate::model::HeadKind;
use crate::report::sig6;
use crate::trainer::{train, TrainingConfig, DEFAULT_MAX_EPOCHS};

/// Environment variable capping the number of runs executed in parallel.
pub const THREADS_ENV: &str = "ORDINAL_CLM_THREADS";

pub const METRIC_NAMES: [&str; 7] = ["qwk", "ms", "mae", "ccr", "top2", "top3", "one_off"];

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub links: Vec<HeadKind>,
    pub etas: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub runs_per_cell: usize,
    pub base_seed: u64,
    pub max_epochs: usize,
    pub hidden: Vec<usize>,
    pub balance: bool,
    pub fractions: SplitFractions,
}

impl GridSpec {
    pub fn new(links: Vec<HeadKind>, etas: Vec<f64>, batch_sizes: Vec<usize>) -> Self {
        GridSpec {
            links,
            etas,
            batch_sizes,
            runs_per_cell: 5,
            base_seed: 0,
            max_epochs: DEFAULT_MAX_EPOCHS,
            hidden: vec![32, 32],
            balance: false,
            fractions: SplitFractions { train: 0.8, val: 0.1, test: 0.1 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.links.is_empty() || self.etas.is_empty() || self.batch_sizes.is_empty() {
            return Err(Error::Config("every grid factor needs at least one level".into()));
        }
        if self.runs_per_cell == 0 {
            return Err(Error::Config("runs per cell must be at least 1".into()));
        }
        Ok(())
    }

    /// Cells in lexicographic factor order: link name, learning rate, batch size.
    pub fn cells(&self) -> Vec<(HeadKind, f64, usize)> {
        let mut links = self.links.clone();
        links.sort_by_key(|l| l.name());
        links.dedup();
        let mut etas = self.etas.clone();
        etas.sort_by(f64::total_cmp);
        etas.dedup();
        let mut batches = self.batch_sizes.clone();
        batches.sort_unstable();
        batches.dedup();
        let mut cells = Vec::new();
        for &l in &links {
            for &e in &etas {
                for &b in &batches {
                    cells.push((l, e, b));
                }
            }
        }
        cells
    }
}

/// Test-split metrics of one run; `None` where undefined or unavailable.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub link: HeadKind,
    pub eta: f64,
    pub batch_size: usize,
    pub run: usize,
    pub seed: u64,
    pub diverged: bool,
    pub best_epoch: Option<usize>,
    pub metrics: [Option<f64>; 7],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary {
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub link: HeadKind,
    pub eta: f64,
    pub batch_size: usize,
    pub runs: usize,
    pub diverged: usize,
    pub metrics: Vec<MetricSummary>,
}

impl CellSummary {
    pub fn qwk_mean(&self) -> Option<f64> {
        self.metrics[0].mean
    }
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub runs: Vec<RunRecord>,
    pub cells: Vec<CellSummary>,
}

/// Mean and sample standard deviation, summed left to right. A single value
/// has standard deviation 0 by convention.
pub fn mean_sd(values: &[f64]) -> MetricSummary {
    let n = values.len();
    if n == 0 {
        return MetricSummary { mean: None, sd: None, n };
    }
    let mean = values.iter().fold(0.0, |acc, v| acc + v) / n as f64;
    let sd = if n == 1 {
        0.0
    } else {
        (values.iter().fold(0.0, |acc, v| acc + (v - mean) * (v - mean)) / (n - 1) as f64).sqrt()
    };
    MetricSummary { mean: Some(mean), sd: Some(sd), n }
}

/// Summarizes the non-diverged runs of one cell.
pub fn summarize_cell(link: HeadKind, eta: f64, batch_size: usize, runs: &[&RunRecord]) -> CellSummary {
    let ok: Vec<&&RunRecord> = runs.iter().filter(|r| !r.diverged).collect();
    let metrics = (0..METRIC_NAMES.len())
        .map(|m| {
            let values: Vec<f64> = ok.iter().filter_map(|r| r.metrics[m]).collect();
            mean_sd(&values)
        })
        .collect();
    CellSummary {
        link,
        eta,
        batch_size,
        runs: runs.len(),
        diverged: runs.len() - ok.len(),
        metrics,
    }
}

fn thread_count() -> usize {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()).filter(|&n| n >= 1).unwrap_or(1)
}

fn run_one(spec: &GridSpec, data: &Dataset, link: HeadKind, eta: f64, batch_size: usize, run: usize) -> Result<RunRecord> {
    let seed = spec.base_seed + run as u64;
    let splits = split(data, spec.fractions, seed)?;
    let mut config = TrainingConfig::new(link, eta, batch_size, seed);
    config.max_epochs = spec.max_epochs;
    config.hidden = spec.hidden.clone();
    config.balance = spec.balance;
    let outcome = train(&config, &splits.train, &splits.val)?;
    let eval_set = splits.test.as_ref().unwrap_or(&splits.val);
    let mut metrics = [None; 7];
    if outcome.history.best_epoch.is_some() {
        match outcome.model.evaluate(eval_set, outcome.model.default_rule()) {
            Ok(r) => {
                metrics = [r.qwk, Some(r.ms), Some(r.mae), Some(r.ccr), Some(r.top2), Some(r.top3), Some(r.one_off)];
            }
            Err(Error::Domain(_)) if outcome.history.diverged => {}
            Err(e) => return Err(e),
        }
    }
    Ok(RunRecord {
        link,
        eta,
        batch_size,
        run,
        seed,
        diverged: outcome.history.diverged,
        best_epoch: outcome.history.best_epoch,
        metrics,
    })
}

pub fn run_grid(spec: &GridSpec, data: &Dataset) -> Result<GridResult> {
    spec.validate()?;
    let cells = spec.cells();
    let jobs: Vec<(HeadKind, f64, usize, usize)> = cells
        .iter()
        .flat_map(|&(l, e, b)| (0..spec.runs_per_cell).map(move |r| (l, e, b, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let runs: Vec<RunRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(l, e, b, r)| run_one(spec, data, l, e, b, r))
            .collect::<Result<Vec<_>>>()
    })?;
    let summaries = cells
        .iter()
        .map(|&(l, e, b)| {
            let members: Vec<&RunRecord> =
                runs.iter().filter(|r| r.link == l && r.eta == e && r.batch_size == b).collect();
            summarize_cell(l, e, b, &members)
        })
        .collect();
    Ok(GridResult { runs, cells: summaries })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| x.to_string())
}

/// `Mean_SD` cell, 6 significant digits each.
pub fn mean_sd_cell(s: &MetricSummary) -> String {
    match (s.mean, s.sd) {
        (Some(m), Some(sd)) => format!("{}_{}", sig6(m), sig6(sd)),
        _ => "NA".into(),
    }
}

/// Per-run records at full precision (shortest round-trip decimal).
pub fn runs_csv(runs: &[RunRecord]) -> String {
    let mut out = format!("link,lr,batch_size,run,seed,diverged,best_epoch,{}\n", METRIC_NAMES.join(","));
    for r in runs {
        let best = r.best_epoch.map_or_else(|| "NA".into(), |e| e.to_string());
        let metrics: Vec<String> = r.metrics.iter().map(|&m| opt(m)).collect();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.link,
            r.eta,
            r.batch_size,
            r.run,
            r.seed,
            r.diverged,
            best,
            metrics.join(",")
        ));
    }
    out
}

/// One row per cell. For each metric: full-precision mean and SD, the number
/// of runs it was averaged over, and a `Mean_SD` display column.
pub fn summary_csv(cells: &[CellSummary]) -> String {
    let mut header = vec!["link".to_string(), "lr".into(), "batch_size".into(), "runs".into(), "diverged".into()];
    for m in METRIC_NAMES {
        header.extend([format!("{m}_mean"), format!("{m}_sd"), format!("{m}_n"), m.to_string()]);
    }
    header.push("sd_note".into());
    let mut out = header.join(",");
    out.push('\n');
    for c in cells {
        let mut row = vec![c.link.to_string(), c.eta.to_string(), c.batch_size.to_string(), c.runs.to_string(), c.diverged.to_string()];
        for s in &c.metrics {
            row.extend([opt(s.mean), opt(s.sd), s.n.to_string(), mean_sd_cell(s)]);
        }
        let note = if c.diverged == c.runs {
            "all_runs_diverged"
        } else if c.runs - c.diverged == 1 {
            "single_run_sd_zero"
        } else {
            ""
        };
        row.push(note.into());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Fixed-width table in the `Mean_SD` layout for terminals.
pub fn summary_table(cells: &[CellSummary]) -> String {
    let titles = ["QWK", "MS", "MAE", "CCR", "Top-2", "Top-3", "1-off"];
    let mut out = format!("{:<8} {:>6} {:>10}", "LF", "BS", "LR");
    for t in titles {
        out.push_str(&format!(" {t:>20}"));
    }
    out.push('\n');
    for c in cells {
        out.push_str(&format!("{:<8} {:>6} {:>10}", c.link.name(), c.batch_size, c.eta));
        for s in &c.metrics {
            out.push_str(&format!(" {:>20}", mean_sd_cell(s)));
        }
        if c.diverged > 0 {
            out.push_str(&format!("  ({} of {} diverged)", c.diverged, c.runs));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::link::LinkFunction;

    #[test]
    fn mean_sd_values() {
        let s = mean_sd(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, Some(2.5));
        assert!((s.sd.unwrap() - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let one = mean_sd(&[0.7]);
        assert_eq!((one.mean, one.sd), (Some(0.7), Some(0.0)));
        assert_eq!(mean_sd(&[]).mean, None);
    }

    #[test]
    fn cells_are_lexicographic() {
        let spec = GridSpec::new(
            vec![HeadKind::Clm(LinkFunction::Probit), HeadKind::Nominal, HeadKind::Clm(LinkFunction::CLogLog)],
            vec![1e-2, 1e-4],
            vec![64, 32],
        );
        let names: Vec<String> = spec.cells().iter().map(|(l, e, b)| format!("{l}/{e}/{b}")).collect();
        assert_eq!(names[0], "cloglog/0.0001/32");
        assert_eq!(names[1], "cloglog/0.0001/64");
        assert_eq!(names[2], "cloglog/0.01/32");
        assert_eq!(names.last().unwrap(), "probit/0.01/64");
        assert_eq!(names.len(), 12);
    }

    #[test]
    fn diverged_runs_are_excluded_and_flagged() {
        let rec = |run, diverged, q: f64| RunRecord {
            link: HeadKind::Nominal,
            eta: 0.1,
            batch_size: 8,
            run,
            seed: run as u64,
            diverged,
            best_epoch: Some(0),
            metrics: [Some(q); 7],
        };
        let a = rec(0, false, 0.5);
        let b = rec(1, true, 0.9);
        let s = summarize_cell(HeadKind::Nominal, 0.1, 8, &[&a, &b]);
        assert_eq!(s.diverged, 1);
        assert_eq!(s.qwk_mean(), Some(0.5));
        let csv = summary_csv(&[s]);
        assert!(csv.lines().nth(1).unwrap().ends_with("single_run_sd_zero"));
        let all = summarize_cell(HeadKind::Nominal, 0.1, 8, &[&b]);
        assert_eq!(all.qwk_mean(), None);
        assert!(summary_csv(&[all]).contains("all_runs_diverged"));
    }

    #[test]
    fn spec_validation() {
        let mut spec = GridSpec::new(vec![HeadKind::Nominal], vec![1e-3], vec![]);
        assert!(spec.validate().is_err());
        spec.batch_sizes = vec![8];
        spec.runs_per_cell = 0;
        assert!(spec.validate().is_err());
    }
}
