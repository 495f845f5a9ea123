//! Confusion metrics, stratified k-fold cross-validation and week-bucketed replay.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{decide, CostMatrix};
use crate::Label;

/// Spam is the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> Confusion {
        Confusion { tp, fp, tn, fn_ }
    }

    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Spam, Label::Spam) => self.tp += 1,
            (Label::Ham, Label::Spam) => self.fp += 1,
            (Label::Ham, Label::Ham) => self.tn += 1,
            (Label::Spam, Label::Ham) => self.fn_ += 1,
        }
    }

    pub fn from_predictions(truth: &[Label], predicted: &[Label]) -> Confusion {
        let mut c = Confusion::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            c.record(t, p);
        }
        c
    }

    pub fn merge(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn n_spam(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn n_ham(&self) -> u64 {
        self.tn + self.fp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Nothing was predicted as this class, so precision was set to 0.
    pub precision_undefined: bool,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn class_metrics(hit: u64, predicted: u64, actual: u64) -> ClassMetrics {
    let (precision, precision_undefined) = ratio(hit, predicted);
    let (recall, _) = ratio(hit, actual);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    ClassMetrics {
        precision,
        recall,
        f1,
        support: actual,
        precision_undefined,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub spam: ClassMetrics,
    pub ham: ClassMetrics,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
    /// fp / (fp + tn)
    pub fp_rate: f64,
    /// fn / (fn + tp)
    pub fn_rate: f64,
}

impl Metrics {
    pub fn class(&self, label: Label) -> &ClassMetrics {
        match label {
            Label::Spam => &self.spam,
            Label::Ham => &self.ham,
        }
    }
}

/// Requires examples of both classes.
pub fn metrics(c: &Confusion) -> Result<Metrics> {
    if c.n_spam() == 0 {
        return Err(Error::EmptyClass(Label::Spam));
    }
    if c.n_ham() == 0 {
        return Err(Error::EmptyClass(Label::Ham));
    }
    Ok(metrics_unchecked(c))
}

fn metrics_unchecked(c: &Confusion) -> Metrics {
    let spam = class_metrics(c.tp, c.tp + c.fp, c.n_spam());
    let ham = class_metrics(c.tn, c.tn + c.fn_, c.n_ham());
    let total = c.total().max(1) as f64;
    Metrics {
        spam,
        ham,
        macro_precision: (spam.precision + ham.precision) / 2.0,
        macro_recall: (spam.recall + ham.recall) / 2.0,
        macro_f1: (spam.f1 + ham.f1) / 2.0,
        weighted_f1: (spam.f1 * spam.support as f64 + ham.f1 * ham.support as f64) / total,
        accuracy: (c.tp + c.tn) as f64 / total,
        fp_rate: ratio(c.fp, c.n_ham()).0,
        fn_rate: ratio(c.fn_, c.n_spam()).0,
    }
}

/// Macro-F1 over the classes present in `c`; `None` for an empty confusion.
pub fn present_macro_f1(c: &Confusion) -> Option<f64> {
    let m = metrics_unchecked(c);
    match (c.n_spam() > 0, c.n_ham() > 0) {
        (true, true) => Some(m.macro_f1),
        (true, false) => Some(m.spam.f1),
        (false, true) => Some(m.ham.f1),
        (false, false) => None,
    }
}

/// SHA-256 hex of a serializable configuration plus seed.
pub fn config_fingerprint<T: Serialize + ?Sized>(config: &T) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

/// Fold index per example. Each class is shuffled with the seed and dealt
/// round-robin, continuing where the previous class stopped.
pub fn stratified_folds(labels: &[Label], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k must be >= 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0usize; labels.len()];
    let mut next = 0usize;
    for class in [Label::Ham, Label::Spam] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.is_empty() {
            return Err(Error::SingleClass { missing: class });
        }
        idx.shuffle(&mut rng);
        for i in idx {
            folds[i] = next % k;
            next += 1;
        }
        let have = labels.iter().filter(|&&l| l == class).count();
        if have < k {
            let missing_fold = (0..k).find(|f| !(0..labels.len()).any(|i| labels[i] == class && folds[i] == *f)).unwrap();
            return Err(Error::FoldMissingClass {
                fold: missing_fold,
                missing: class,
            });
        }
    }
    Ok(folds)
}

/// Fits on the training indices and scores the test indices.
pub trait Pipeline: Sync {
    fn fit_score(&self, train: &[usize], test: &[usize]) -> Result<Vec<f64>>;
}

impl<F> Pipeline for F
where
    F: Fn(&[usize], &[usize]) -> Result<Vec<f64>> + Sync,
{
    fn fit_score(&self, train: &[usize], test: &[usize]) -> Result<Vec<f64>> {
        self(train, test)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub confusion: Confusion,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub name: String,
    pub confusion: Confusion,
    pub metrics: Metrics,
    pub folds: Vec<FoldResult>,
    pub fingerprint: String,
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let m = &self.metrics;
        let mut s = String::new();
        let _ = writeln!(s, "report: {}", self.name);
        let _ = writeln!(s, "fingerprint: {}", self.fingerprint);
        let c = &self.confusion;
        let _ = writeln!(s, "examples: {} (spam {}, ham {})", c.total(), c.n_spam(), c.n_ham());
        let _ = writeln!(s, "confusion: tp={} fp={} tn={} fn={}", c.tp, c.fp, c.tn, c.fn_);
        let _ = writeln!(s, "{:<8}{:>10}{:>10}{:>10}", "class", "precision", "recall", "f1");
        for (name, cm) in [("ham", &m.ham), ("spam", &m.spam)] {
            let flag = if cm.precision_undefined { " (no predictions)" } else { "" };
            let _ = writeln!(s, "{name:<8}{:>10.4}{:>10.4}{:>10.4}{flag}", cm.precision, cm.recall, cm.f1);
        }
        let _ = writeln!(s, "{:<8}{:>10.4}{:>10.4}{:>10.4}", "macro", m.macro_precision, m.macro_recall, m.macro_f1);
        let _ = writeln!(s, "weighted f1: {:.4}", m.weighted_f1);
        let _ = writeln!(s, "fp rate: {:.4}  fn rate: {:.4}", m.fp_rate, m.fn_rate);
        for f in &self.folds {
            let _ = writeln!(
                s,
                "fold {}: macro_f1={:.4} fp_rate={:.4} fn_rate={:.4}",
                f.fold, f.metrics.macro_f1, f.metrics.fp_rate, f.metrics.fn_rate
            );
        }
        s
    }

    /// One `name<TAB>value<TAB>scope` line per metric.
    pub fn to_records(&self) -> String {
        let mut s = String::new();
        let mut put = |scope: &str, m: &Metrics, c: &Confusion| {
            for (name, v) in metric_pairs(m, c) {
                let _ = writeln!(s, "{name}\t{v}\t{scope}");
            }
        };
        put("all", &self.metrics, &self.confusion);
        for f in &self.folds {
            put(&format!("fold={}", f.fold), &f.metrics, &f.confusion);
        }
        s
    }
}

fn metric_pairs(m: &Metrics, c: &Confusion) -> Vec<(&'static str, f64)> {
    vec![
        ("tp", c.tp as f64),
        ("fp", c.fp as f64),
        ("tn", c.tn as f64),
        ("fn", c.fn_ as f64),
        ("ham_precision", m.ham.precision),
        ("ham_recall", m.ham.recall),
        ("ham_f1", m.ham.f1),
        ("spam_precision", m.spam.precision),
        ("spam_recall", m.spam.recall),
        ("spam_f1", m.spam.f1),
        ("macro_precision", m.macro_precision),
        ("macro_recall", m.macro_recall),
        ("macro_f1", m.macro_f1),
        ("weighted_f1", m.weighted_f1),
        ("accuracy", m.accuracy),
        ("fp_rate", m.fp_rate),
        ("fn_rate", m.fn_rate),
    ]
}

/// Stratified k-fold evaluation. All fitting happens inside `pipeline` on the
/// training split of each fold; folds run in parallel.
pub fn kfold_cv(
    name: &str,
    labels: &[Label],
    k: usize,
    seed: u64,
    costs: &CostMatrix,
    fingerprint: &str,
    pipeline: &dyn Pipeline,
) -> Result<EvalReport> {
    let folds = stratified_folds(labels, k, seed)?;
    let results: Vec<Result<FoldResult>> = (0..k)
        .into_par_iter()
        .map(|fold| {
            let train: Vec<usize> = (0..labels.len()).filter(|&i| folds[i] != fold).collect();
            let test: Vec<usize> = (0..labels.len()).filter(|&i| folds[i] == fold).collect();
            let scores = pipeline.fit_score(&train, &test)?;
            if scores.len() != test.len() {
                return Err(Error::DimensionMismatch {
                    expected: test.len(),
                    found: scores.len(),
                });
            }
            let mut c = Confusion::default();
            for (&i, &s) in test.iter().zip(&scores) {
                c.record(labels[i], decide(s, costs));
            }
            Ok(FoldResult {
                fold,
                confusion: c,
                metrics: metrics(&c)?,
            })
        })
        .collect();
    let folds: Vec<FoldResult> = results.into_iter().collect::<Result<_>>()?;
    let mut confusion = Confusion::default();
    for f in &folds {
        confusion.merge(&f.confusion);
    }
    Ok(EvalReport {
        name: name.to_string(),
        metrics: metrics(&confusion)?,
        confusion,
        folds,
        fingerprint: fingerprint.to_string(),
    })
}

/// One scored, labeled item of a replay stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayItem {
    pub ts: u64,
    pub label: Label,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReplayConfig {
    pub bucket_secs: u64,
    /// Bucket 0 starts here; defaults to the first item's timestamp.
    pub origin: Option<u64>,
    /// Report at least this many buckets, recording trailing empties as gaps.
    pub n_buckets: Option<usize>,
    /// Drift is flagged when F1 falls more than this below the trailing mean.
    pub drift_delta: f64,
    /// Number of preceding non-empty buckets in the trailing mean.
    pub trailing: usize,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        ReplayConfig {
            bucket_secs: crate::mpa::WEEK_SECS,
            origin: None,
            n_buckets: None,
            drift_delta: 0.05,
            trailing: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketReport {
    pub bucket: usize,
    pub start_ts: u64,
    pub confusion: Confusion,
    /// Macro-F1 over the classes present in the bucket.
    pub f1: f64,
    pub fp_rate: f64,
    pub fn_rate: f64,
    pub trailing_mean: Option<f64>,
    pub drift: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySeries {
    pub buckets: Vec<BucketReport>,
    /// Buckets with no items; they have no report.
    pub gaps: Vec<usize>,
    pub overall: Confusion,
    pub mean_f1: f64,
    pub mean_fp_rate: f64,
}

impl ReplaySeries {
    pub fn flagged(&self) -> Vec<usize> {
        self.buckets.iter().filter(|b| b.drift).map(|b| b.bucket).collect()
    }

    /// Largest drop of a bucket's F1 below its trailing mean.
    pub fn max_dip(&self) -> f64 {
        self.buckets
            .iter()
            .filter_map(|b| b.trailing_mean.map(|t| t - b.f1))
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bucket,start_ts,n,tp,fp,tn,fn,f1,fp_rate,fn_rate,trailing_mean,drift\n");
        for b in &self.buckets {
            let c = &b.confusion;
            let trailing = b.trailing_mean.map_or(String::new(), |t| format!("{t:.6}"));
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{},{}",
                b.bucket,
                b.start_ts,
                c.total(),
                c.tp,
                c.fp,
                c.tn,
                c.fn_,
                b.f1,
                b.fp_rate,
                b.fn_rate,
                trailing,
                b.drift as u8
            );
        }
        s
    }
}

/// Evaluates a frozen model's scores bucket by bucket.
pub fn temporal_replay(items: &[ReplayItem], costs: &CostMatrix, cfg: &ReplayConfig) -> Result<ReplaySeries> {
    if cfg.bucket_secs == 0 {
        return Err(Error::InvalidArgument("bucket length must be >= 1 second".into()));
    }
    for (i, w) in items.windows(2).enumerate() {
        if w[1].ts < w[0].ts {
            return Err(Error::UnorderedStream { index: i + 1 });
        }
    }
    let origin = cfg.origin.or(items.first().map(|x| x.ts)).unwrap_or(0);
    if let Some(first) = items.first() {
        if first.ts < origin {
            return Err(Error::UnorderedStream { index: 0 });
        }
    }
    let last_bucket = items.last().map_or(0, |x| ((x.ts - origin) / cfg.bucket_secs) as usize + 1);
    let n_buckets = last_bucket.max(cfg.n_buckets.unwrap_or(0));
    let mut confusions = vec![Confusion::default(); n_buckets];
    for x in items {
        let b = ((x.ts - origin) / cfg.bucket_secs) as usize;
        confusions[b].record(x.label, decide(x.score, costs));
    }

    let mut buckets = Vec::new();
    let mut gaps = Vec::new();
    let mut overall = Confusion::default();
    for (b, c) in confusions.iter().enumerate() {
        let Some(f1) = present_macro_f1(c) else {
            gaps.push(b);
            continue;
        };
        overall.merge(c);
        let prev: Vec<f64> = buckets.iter().rev().take(cfg.trailing).map(|r: &BucketReport| r.f1).collect();
        let trailing_mean = (!prev.is_empty()).then(|| prev.iter().sum::<f64>() / prev.len() as f64);
        let m = metrics_unchecked(c);
        buckets.push(BucketReport {
            bucket: b,
            start_ts: origin + b as u64 * cfg.bucket_secs,
            confusion: *c,
            f1,
            fp_rate: m.fp_rate,
            fn_rate: m.fn_rate,
            trailing_mean,
            drift: trailing_mean.is_some_and(|t| t - f1 > cfg.drift_delta),
        });
    }
    let n = buckets.len().max(1) as f64;
    Ok(ReplaySeries {
        mean_f1: buckets.iter().map(|b| b.f1).sum::<f64>() / n,
        mean_fp_rate: buckets.iter().map(|b| b.fp_rate).sum::<f64>() / n,
        buckets,
        gaps,
        overall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn table_pattern_metrics() {
        let m = metrics(&Confusion::new(93, 0, 100, 7)).unwrap();
        assert_eq!(m.spam.precision, 1.0);
        assert!(close(m.spam.recall, 0.93, 1e-12));
        assert!(close(m.spam.f1, 0.963, 1e-3));
        assert!(close(m.ham.precision, 100.0 / 107.0, 1e-12));
        assert!(close(m.ham.precision, 0.935, 5e-4));
        assert_eq!(m.ham.recall, 1.0);
        assert_eq!(m.fp_rate, 0.0);
    }

    #[test]
    fn trivial_metrics() {
        let m = metrics(&Confusion::new(5, 0, 5, 0)).unwrap();
        assert_eq!((m.macro_f1, m.spam.precision, m.ham.recall), (1.0, 1.0, 1.0));
        let m = metrics(&Confusion::new(1, 1, 1, 1)).unwrap();
        for v in [m.spam.precision, m.spam.recall, m.spam.f1, m.ham.precision, m.ham.recall, m.ham.f1] {
            assert_eq!(v, 0.5);
        }
        assert!(matches!(metrics(&Confusion::new(0, 1, 1, 0)), Err(Error::EmptyClass(Label::Spam))));
        let m = metrics(&Confusion::new(0, 0, 5, 5)).unwrap();
        assert!(m.spam.precision_undefined);
        assert_eq!(m.spam.precision, 0.0);
    }

    #[test]
    fn stratification_one_of_each() {
        let labels: Vec<Label> = (0..20).map(|i| if i < 10 { Label::Ham } else { Label::Spam }).collect();
        let folds = stratified_folds(&labels, 10, 3).unwrap();
        for f in 0..10 {
            let ham = (0..20).filter(|&i| folds[i] == f && labels[i] == Label::Ham).count();
            let spam = (0..20).filter(|&i| folds[i] == f && labels[i] == Label::Spam).count();
            assert_eq!((ham, spam), (1, 1), "fold {f}");
        }
        assert!(matches!(
            stratified_folds(&labels[..15], 10, 3),
            Err(Error::FoldMissingClass { missing: Label::Spam, .. })
        ));
    }

    #[test]
    fn constant_predictor_macro_f1() {
        let labels: Vec<Label> = (0..40).map(|i| if i % 2 == 0 { Label::Ham } else { Label::Spam }).collect();
        let always_spam = |_: &[usize], test: &[usize]| Ok(vec![1.0; test.len()]);
        let r = kfold_cv("const", &labels, 4, 1, &CostMatrix::default(), "x", &always_spam).unwrap();
        // Spam F1 = 2/3, ham F1 = 0.
        assert!(close(r.metrics.macro_f1, 1.0 / 3.0, 1e-12));
        assert_eq!(r.confusion.total(), 40);
    }

    #[test]
    fn replay_gaps_and_drift() {
        let week = crate::mpa::WEEK_SECS;
        let mut items = Vec::new();
        for b in 0..8u64 {
            if b == 3 {
                continue;
            }
            for i in 0..10u64 {
                let label = if i % 2 == 0 { Label::Spam } else { Label::Ham };
                // Bucket 6 misses every spam.
                let score = if label.is_spam() && b != 6 { 0.9 } else { 0.1 };
                items.push(ReplayItem { ts: 100 + b * week + i, label, score });
            }
        }
        let s = temporal_replay(&items, &CostMatrix::default(), &ReplayConfig::default()).unwrap();
        assert_eq!(s.gaps, vec![3]);
        assert_eq!(s.flagged(), vec![6]);
        assert!(s.max_dip() > 0.5);
        items.swap(0, 1);
        assert!(matches!(
            temporal_replay(&items, &CostMatrix::default(), &ReplayConfig::default()),
            Err(Error::UnorderedStream { index: 1 })
        ));
    }
}
