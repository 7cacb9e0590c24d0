//! Datasets: synthetic latent-variable generation, CSV I/O, stratified
//! splits, and oversampling.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::LinkFunction;

/// Row-major `N x d` features with zero-based labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_features: usize,
    q_classes: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(n_features: usize, q_classes: usize, features: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::domain("dataset needs at least one feature"));
        }
        if q_classes < 2 {
            return Err(Error::domain(format!("need at least 2 classes, got {q_classes}")));
        }
        if labels.is_empty() {
            return Err(Error::domain("dataset is empty"));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::domain(format!(
                "{} feature values for {} rows of width {n_features}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&t| t >= q_classes) {
            return Err(Error::domain(format!("label {bad} out of range for {q_classes} classes")));
        }
        Ok(Dataset { n_features, q_classes, features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn q_classes(&self) -> usize {
        self.q_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.q_classes];
        for &t in &self.labels {
            counts[t] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order. Returns `None` for an empty selection.
    pub fn subset(&self, indices: &[usize]) -> Option<Dataset> {
        if indices.is_empty() {
            return None;
        }
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Some(Dataset { n_features: self.n_features, q_classes: self.q_classes, features, labels })
    }

    fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut by_class = vec![Vec::new(); self.q_classes];
        for (i, &t) in self.labels.iter().enumerate() {
            by_class[t].push(i);
        }
        by_class
    }
}

/// Latent-variable model `y* = w . x + e`, `x ~ N(0, I)`, with the noise
/// distribution matching the link, and `y = C_q` iff `b_{q-1} < y* <= b_q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub q_classes: usize,
    pub link: LinkFunction,
    pub true_weights: Vec<f64>,
    pub true_thresholds: Vec<f64>,
    pub seed: u64,
}

/// Sidecar describing the model a synthetic dataset was drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub link: LinkFunction,
    pub weights: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn n_features(&self) -> usize {
        self.true_weights.len()
    }

    /// Weights `w_j ∝ (-1)^j / (j + 1)` rescaled to norm `signal`; thresholds
    /// evenly spaced on `[-s, s]` with `s` the latent standard deviation.
    pub fn with_defaults(n_samples: usize, n_features: usize, q_classes: usize, link: LinkFunction, seed: u64) -> Self {
        const SIGNAL: f64 = 3.0;
        let raw: Vec<f64> = (0..n_features).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 } / (j + 1) as f64).collect();
        let norm = raw.iter().map(|w| w * w).sum::<f64>().sqrt();
        let true_weights = raw.iter().map(|w| SIGNAL * w / norm.max(f64::MIN_POSITIVE)).collect();
        let sd = (SIGNAL * SIGNAL + noise_variance(link)).sqrt();
        let true_thresholds = if q_classes <= 2 {
            vec![0.0; q_classes.saturating_sub(1)]
        } else {
            (0..q_classes - 1).map(|q| sd * (-1.0 + 2.0 * q as f64 / (q_classes - 2) as f64)).collect()
        };
        SyntheticSpec { n_samples, q_classes, link, true_weights, true_thresholds, seed }
    }

    /// Three balanced classes, strong logistic signal on four features.
    pub fn recovery_benchmark(n_samples: usize, seed: u64) -> Self {
        SyntheticSpec {
            n_samples,
            q_classes: 3,
            link: LinkFunction::Logit,
            true_weights: vec![7.5, -5.0, 3.75, 2.5],
            true_thresholds: vec![-5.0, 5.0],
            seed,
        }
    }

    /// Five classes with a dominant first class (about 57/17/10/7/9 percent)
    /// and moderate signal on eight features, two of them irrelevant.
    pub fn imbalanced_benchmark(n_samples: usize, seed: u64) -> Self {
        SyntheticSpec {
            n_samples,
            q_classes: 5,
            link: LinkFunction::Logit,
            true_weights: vec![1.5, -1.0, 1.0, 0.5, -0.5, 0.5, 0.0, 0.0],
            true_thresholds: vec![0.5, 1.8, 2.8, 3.8],
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.q_classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {}", self.q_classes)));
        }
        if self.n_samples == 0 || self.true_weights.is_empty() {
            return Err(Error::Config("synthetic data needs at least one sample and one feature".into()));
        }
        if self.true_thresholds.len() != self.q_classes - 1 {
            return Err(Error::Config(format!(
                "{} thresholds given for {} classes",
                self.true_thresholds.len(),
                self.q_classes
            )));
        }
        if self.true_thresholds.iter().chain(&self.true_weights).any(|v| !v.is_finite()) {
            return Err(Error::Config("synthetic weights and thresholds must be finite".into()));
        }
        if self.true_thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("synthetic thresholds must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn ground_truth(&self) -> GroundTruth {
        GroundTruth {
            link: self.link,
            weights: self.true_weights.clone(),
            thresholds: self.true_thresholds.clone(),
            seed: self.seed,
        }
    }
}

fn noise_variance(link: LinkFunction) -> f64 {
    use std::f64::consts::PI;
    match link {
        LinkFunction::Logit => PI * PI / 3.0,
        LinkFunction::Probit => 1.0,
        LinkFunction::CLogLog => PI * PI / 6.0,
    }
}

/// Draws latent noise whose cdf is the link's inverse link.
pub fn sample_noise<R: Rng + ?Sized>(link: LinkFunction, rng: &mut R) -> f64 {
    match link {
        LinkFunction::Probit => rng.sample(StandardNormal),
        LinkFunction::Logit => {
            let u = open_unit(rng);
            (u / (1.0 - u)).ln()
        }
        // Minimum-type Gumbel: F(z) = 1 - exp(-e^z)  =>  z = ln(-ln(1 - u)).
        LinkFunction::CLogLog => {
            let u = open_unit(rng);
            (-(-u).ln_1p()).ln()
        }
    }
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, GroundTruth)> {
    spec.validate()?;
    let d = spec.n_features();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut features = Vec::with_capacity(spec.n_samples * d);
    let mut labels = Vec::with_capacity(spec.n_samples);
    for _ in 0..spec.n_samples {
        let start = features.len();
        for _ in 0..d {
            features.push(rng.sample::<f64, _>(StandardNormal));
        }
        let signal: f64 = features[start..].iter().zip(&spec.true_weights).map(|(x, w)| x * w).sum();
        let latent = signal + sample_noise(spec.link, &mut rng);
        labels.push(spec.true_thresholds.iter().take_while(|&&b| b < latent).count());
    }
    let dataset = Dataset::new(d, spec.q_classes, features, labels)?;
    if let Some(empty) = dataset.class_counts().iter().position(|&c| c == 0) {
        return Err(Error::Generation(format!(
            "class {empty} received no samples out of {}; widen the thresholds or draw more samples",
            spec.n_samples
        )));
    }
    Ok((dataset, spec.ground_truth()))
}

/// Header `f0,...,f{d-1},label`, one row per sample, LF line endings.
pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    for j in 0..dataset.n_features {
        out.push_str(&format!("f{j},"));
    }
    out.push_str("label\n");
    for i in 0..dataset.len() {
        for x in dataset.row(i) {
            out.push_str(&format!("{x},"));
        }
        out.push_str(&format!("{}\n", dataset.labels[i]));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads a dataset written by [`save_csv`]. With `q_classes = None` the class
/// count is inferred as `max(label) + 1` (at least 2).
pub fn load_csv(path: &Path, q_classes: Option<usize>) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_path(path)?;
    let header = reader.headers()?.clone();
    if header.iter().next_back().map(str::trim) != Some("label") {
        return Err(Error::Parse { line: 1, message: "last header column must be `label`".into() });
    }
    let n_features = header.len() - 1;
    if n_features == 0 {
        return Err(Error::Parse { line: 1, message: "no feature columns".into() });
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != header.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        for (j, cell) in record.iter().take(n_features).enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("column {} is not a number: `{cell}`", j),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, message: format!("column {j} is not finite") });
            }
            features.push(v);
        }
        let cell = record.get(n_features).unwrap_or("").trim();
        let label: usize = cell
            .parse()
            .map_err(|_| Error::Parse { line, message: format!("label is not a nonnegative integer: `{cell}`") })?;
        if let Some(q) = q_classes {
            if label >= q {
                return Err(Error::Parse { line, message: format!("label {label} out of range for {q} classes") });
            }
        }
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::Parse { line: 2, message: "no data rows".into() });
    }
    let q = q_classes.unwrap_or_else(|| (labels.iter().max().copied().unwrap_or(0) + 1).max(2));
    Dataset::new(n_features, q, features, labels)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitFractions {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let f = SplitFractions { train, val, test };
        let finite = [train, val, test].iter().all(|x| x.is_finite());
        if !finite || train <= 0.0 || val <= 0.0 || test < 0.0 || ((train + val + test) - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split fractions must be positive (test may be 0) and sum to 1, got ({train}, {val}, {test})"
            )));
        }
        Ok(f)
    }
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    /// `None` when the test fraction is zero.
    pub test: Option<Dataset>,
    /// Non-fatal issues, e.g. a class missing from a split.
    pub warnings: Vec<String>,
}

/// Stratified shuffled split: each class is divided separately, with the
/// validation and test shares of a class rounded to the nearest sample.
pub fn split(dataset: &Dataset, fractions: SplitFractions, seed: u64) -> Result<Splits> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: [Vec<usize>; 3] = Default::default();
    for mut idx in dataset.indices_by_class() {
        idx.shuffle(&mut rng);
        let n = idx.len();
        let n_val = ((n as f64 * fractions.val).round() as usize).min(n);
        let n_test = ((n as f64 * fractions.test).round() as usize).min(n - n_val);
        let n_train = n - n_val - n_test;
        parts[0].extend_from_slice(&idx[..n_train]);
        parts[1].extend_from_slice(&idx[n_train..n_train + n_val]);
        parts[2].extend_from_slice(&idx[n_train + n_val..]);
    }
    for p in &mut parts {
        p.shuffle(&mut rng);
    }
    let mut warnings = Vec::new();
    let names = ["train", "validation", "test"];
    let mut sets = Vec::with_capacity(3);
    for (k, p) in parts.iter().enumerate() {
        let subset = dataset.subset(p);
        if let Some(s) = &subset {
            for (c, &n) in s.class_counts().iter().enumerate() {
                if n == 0 {
                    warnings.push(format!("{} split has no samples of class {c}", names[k]));
                }
            }
        }
        sets.push(subset);
    }
    let test = sets.pop().flatten();
    if fractions.test > 0.0 && test.is_none() {
        warnings.push("test split is empty".into());
    }
    let val = sets.pop().flatten().ok_or_else(|| Error::Config("validation split is empty".into()))?;
    let train = sets.pop().flatten().ok_or_else(|| Error::Config("training split is empty".into()))?;
    Ok(Splits { train, val, test, warnings })
}

/// Random oversampling with replacement up to the majority-class count.
/// Original rows keep their order; duplicates are appended class by class.
pub fn balance_oversample(dataset: &Dataset, seed: u64) -> Result<Dataset> {
    let by_class = dataset.indices_by_class();
    if let Some(c) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::domain(format!("cannot oversample: class {c} has no samples")));
    }
    let target = by_class.iter().map(Vec::len).max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    for idx in &by_class {
        for _ in idx.len()..target {
            indices.push(idx[rng.random_range(0..idx.len())]);
        }
    }
    Ok(dataset.subset(&indices).expect("nonempty dataset"))
}

pub fn save_ground_truth(truth: &GroundTruth, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(truth)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_ground_truth(path: &Path) -> Result<GroundTruth> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(counts: &[usize]) -> Dataset {
        let mut labels = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            labels.extend(std::iter::repeat_n(c, n));
        }
        let features = (0..labels.len()).map(|i| i as f64).collect();
        Dataset::new(1, counts.len(), features, labels).unwrap()
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(2, 3, vec![0.0; 3], vec![0, 1]).is_err());
        assert!(Dataset::new(1, 2, vec![0.0; 2], vec![0, 2]).is_err());
        assert!(Dataset::new(1, 2, vec![], vec![]).is_err());
    }

    #[test]
    fn split_sizes_balanced() {
        let d = toy(&[20; 5]);
        let s = split(&d, SplitFractions::new(0.8, 0.1, 0.1).unwrap(), 3).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.as_ref().unwrap().len()), (80, 10, 10));
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn split_is_deterministic() {
        let d = toy(&[13, 29, 7]);
        let f = SplitFractions::new(0.7, 0.2, 0.1).unwrap();
        let a = split(&d, f, 5).unwrap();
        let b = split(&d, f, 5).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.val, b.val);
        assert_eq!(a.test, b.test);
        let c = split(&d, f, 6).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn split_is_stratified() {
        let counts = [50, 31, 12, 7];
        let d = toy(&counts);
        let s = split(&d, SplitFractions::new(0.8, 0.1, 0.1).unwrap(), 1).unwrap();
        for (c, &n) in s.train.class_counts().iter().enumerate() {
            assert!((n as f64 - 0.8 * counts[c] as f64).abs() <= 1.0, "class {c}: {n}");
        }
        let total = s.train.len() + s.val.len() + s.test.unwrap().len();
        assert_eq!(total, d.len());
    }

    #[test]
    fn split_warns_on_missing_class() {
        let d = toy(&[40, 2]);
        let s = split(&d, SplitFractions::new(0.8, 0.1, 0.1).unwrap(), 1).unwrap();
        assert!(!s.warnings.is_empty());
    }

    #[test]
    fn split_fraction_validation() {
        assert!(SplitFractions::new(0.8, 0.1, 0.2).is_err());
        assert!(SplitFractions::new(0.9, 0.0, 0.1).is_err());
        assert!(SplitFractions::new(0.9, 0.1, 0.0).is_ok());
    }

    #[test]
    fn oversample_counts() {
        let b = balance_oversample(&toy(&[10, 2]), 0).unwrap();
        assert_eq!(b.class_counts(), vec![10, 10]);
        let already = toy(&[4, 4, 4]);
        assert_eq!(balance_oversample(&already, 0).unwrap(), already);
        let uneven = balance_oversample(&toy(&[3, 17, 9, 1]), 2).unwrap();
        assert_eq!(uneven.class_counts(), vec![17; 4]);
        // duplicates only: every row's feature equals some original row of the same class
        let orig = toy(&[3, 17, 9, 1]);
        for i in 0..uneven.len() {
            let x = uneven.row(i)[0] as usize;
            assert_eq!(orig.labels()[x], uneven.labels()[i]);
        }
    }

    #[test]
    fn oversample_rejects_empty_class() {
        let d = Dataset::new(1, 3, vec![0.0, 1.0], vec![0, 2]).unwrap();
        assert!(balance_oversample(&d, 0).is_err());
    }

    #[test]
    fn synthetic_spec_validation() {
        let mut s = SyntheticSpec::recovery_benchmark(100, 1);
        s.true_thresholds = vec![1.0, 1.0];
        assert!(generate_synthetic(&s).is_err());
        let mut s = SyntheticSpec::recovery_benchmark(100, 1);
        s.q_classes = 4;
        assert!(generate_synthetic(&s).is_err());
    }

    #[test]
    fn synthetic_generation_failure_is_reported() {
        let mut s = SyntheticSpec::recovery_benchmark(20, 1);
        s.true_thresholds = vec![100.0, 200.0];
        assert!(matches!(generate_synthetic(&s), Err(Error::Generation(_))));
    }

    #[test]
    fn synthetic_is_deterministic() {
        let s = SyntheticSpec::with_defaults(500, 3, 4, LinkFunction::CLogLog, 9);
        let (a, ta) = generate_synthetic(&s).unwrap();
        let (b, tb) = generate_synthetic(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
    }

    #[test]
    fn default_spec_shapes() {
        let s = SyntheticSpec::with_defaults(10, 4, 5, LinkFunction::Probit, 0);
        assert_eq!(s.true_thresholds.len(), 4);
        assert!(s.validate().is_ok());
        let norm: f64 = s.true_weights.iter().map(|w| w * w).sum::<f64>().sqrt();
        assert!((norm - 3.0).abs() < 1e-12);
        assert_eq!(SyntheticSpec::with_defaults(10, 2, 2, LinkFunction::Logit, 0).true_thresholds, vec![0.0]);
    }
}
