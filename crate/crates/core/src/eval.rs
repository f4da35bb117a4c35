//! Metrics and evaluation protocols.
//!
//! * Setting 1: leave-one-out over suspended accounts. Accuracy is the
//!   fraction of held-out accounts predicted spammer.
//! * Setting 2: repeated stratified holdout over annotated accounts,
//!   reporting precision, recall, F1 and AUC averaged over repeats.
//!
//! The ablation compares feedback, no feedback and SMOTE oversampling
//! under Setting 2.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Annotation;
use crate::error::{Error, Result};
use crate::feedback::SmoteConfig;
use crate::ids::UserId;
use crate::pipeline::{Learning, Pipeline};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn new(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    /// Counts from `(truth, predicted)` pairs.
    pub fn tally(pairs: impl IntoIterator<Item = (bool, bool)>) -> Self {
        let mut c = Self::default();
        for (truth, pred) in pairs {
            match (truth, pred) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall, computed as
    /// `2tp / (2tp + fp + fn)` so that it is a single rounded division.
    pub fn f1(&self) -> Option<f64> {
        self.precision()?;
        self.recall()?;
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }
}

fn ratio(a: usize, b: usize) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

/// Area under the ROC curve as the Mann-Whitney statistic: the probability
/// that a random positive outscores a random negative, ties counting half.
/// Absent unless both classes occur.
pub fn auc(scored: &[(f64, bool)]) -> Option<f64> {
    let mut sorted: Vec<(f64, bool)> = scored.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let pos = sorted.iter().filter(|s| s.1).count();
    let neg = sorted.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    // sum of midranks of positives
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            j += 1;
        }
        let mid = (i + j + 1) as f64 / 2.0;
        rank_sum += mid * sorted[i..j].iter().filter(|s| s.1).count() as f64;
        i = j;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Some(u / (pos * neg) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Setting1,
    Setting2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub setting: Option<Setting>,
    pub description: String,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
    pub accuracy: Option<f64>,
    /// Summed over repeats.
    pub counts: ConfusionCounts,
    pub runs: usize,
}

pub fn metrics(counts: ConfusionCounts, scored: &[(f64, bool)]) -> MetricsReport {
    MetricsReport {
        setting: None,
        description: String::new(),
        precision: counts.precision(),
        recall: counts.recall(),
        f1: counts.f1(),
        auc: auc(scored),
        accuracy: counts.accuracy(),
        counts,
        runs: 1,
    }
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Per-metric mean over the reports in which the metric is defined.
pub fn average(reports: &[MetricsReport], setting: Setting, description: &str) -> MetricsReport {
    let mut counts = ConfusionCounts::default();
    for r in reports {
        counts.tp += r.counts.tp;
        counts.fp += r.counts.fp;
        counts.tn += r.counts.tn;
        counts.fn_ += r.counts.fn_;
    }
    MetricsReport {
        setting: Some(setting),
        description: description.to_string(),
        precision: mean_defined(reports.iter().map(|r| r.precision)),
        recall: mean_defined(reports.iter().map(|r| r.recall)),
        f1: mean_defined(reports.iter().map(|r| r.f1)),
        auc: mean_defined(reports.iter().map(|r| r.auc)),
        accuracy: mean_defined(reports.iter().map(|r| r.accuracy)),
        counts,
        runs: reports.len(),
    }
}

/// Leave-one-out over suspended users: each is removed from the positives,
/// the pipeline re-run, and a hit recorded if it comes out spammer.
pub fn setting1_loo(pipeline: &Pipeline) -> Result<MetricsReport> {
    let suspended = pipeline.corpus.suspended_users();
    if suspended.len() < 2 {
        return Err(Error::InsufficientSamples(suspended.len()));
    }
    let held: Vec<&UserId> = suspended.iter().collect();
    let hits: Vec<bool> = held
        .par_iter()
        .map(|&u| {
            let mut positives = suspended.clone();
            positives.remove(u);
            let run = pipeline.classify(&positives)?;
            Ok(run.labels().get(u).is_some_and(|l| l.0))
        })
        .collect::<Result<_>>()?;
    let counts = ConfusionCounts::tally(hits.iter().map(|&h| (true, h)));
    let mut report = metrics(counts, &[]);
    report.setting = Some(Setting::Setting1);
    report.description = format!("leave-one-out over {} suspended users", held.len());
    report.accuracy = counts.recall();
    Ok(report)
}

/// Stratified split of annotated users; returns the test set.
pub fn stratified_holdout(
    annotated: &BTreeMap<UserId, Annotation>,
    frac: f64,
    seed: u64,
) -> BTreeSet<UserId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test = BTreeSet::new();
    for class in [Annotation::Spammer, Annotation::Benign] {
        let mut members: Vec<&UserId> = annotated.iter().filter(|(_, &a)| a == class).map(|(u, _)| u).collect();
        members.shuffle(&mut rng);
        let take = (frac * members.len() as f64).round() as usize;
        test.extend(members.into_iter().take(take).cloned());
    }
    test
}

/// One Setting 2 repeat: annotated spammers outside the test split join the
/// suspended users as positives, then the test split is scored.
pub fn setting2_once(
    pipeline: &Pipeline,
    learning: Learning,
    smote: Option<SmoteConfig>,
    seed: u64,
) -> Result<MetricsReport> {
    let annotated = pipeline.corpus.annotated_users();
    let test = stratified_holdout(&annotated, pipeline.config.eval.holdout_frac, seed);
    let mut positives = pipeline.corpus.suspended_users();
    positives.extend(
        annotated
            .iter()
            .filter(|(u, &a)| a == Annotation::Spammer && !test.contains(*u))
            .map(|(u, _)| u.clone()),
    );
    positives.retain(|u| !test.contains(u));
    let labels = pipeline.classify_with(&positives, learning, smote)?.labels();
    let mut pairs = Vec::new();
    let mut scored = Vec::new();
    for u in &test {
        let truth = annotated[u] == Annotation::Spammer;
        let (pred, score) = labels.get(u).copied().unwrap_or((false, f64::MIN));
        pairs.push((truth, pred));
        scored.push((score, truth));
    }
    Ok(metrics(ConfusionCounts::tally(pairs), &scored))
}

/// Setting 2 averaged over `repeats` seeded holdouts.
pub fn setting2_holdout(
    pipeline: &Pipeline,
    learning: Learning,
    smote: Option<SmoteConfig>,
    repeats: usize,
) -> Result<MetricsReport> {
    let annotated = pipeline.corpus.annotated_users();
    if annotated.is_empty() {
        return Err(Error::NoAnnotations);
    }
    let base = pipeline.config.seed;
    let reports: Vec<MetricsReport> = (0..repeats.max(1) as u64)
        .into_par_iter()
        .map(|r| setting2_once(pipeline, learning, smote, base.wrapping_add(r)))
        .collect::<Result<_>>()?;
    let what = match (learning, smote) {
        (_, Some(s)) => format!("smote ratio {}", s.ratio),
        (Learning::Feedback, None) => "feedback".to_string(),
        (Learning::NoFeedback, None) => "no-feedback".to_string(),
    };
    Ok(average(
        &reports,
        Setting::Setting2,
        &format!("{what}, {} holdout repeats of {}", reports.len(), pipeline.config.eval.holdout_frac),
    ))
}

/// A synthetic sample with its provenance: `point = x[parent] + gap ·
/// (x[neighbor] − x[parent])`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoteSample {
    pub point: Vec<f64>,
    pub parent: usize,
    pub neighbor: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoteOutput {
    pub original: Vec<Vec<f64>>,
    pub synthetic: Vec<SmoteSample>,
}

impl SmoteOutput {
    /// Originals followed by synthetic points.
    pub fn augmented(&self) -> Vec<Vec<f64>> {
        self.original
            .iter()
            .cloned()
            .chain(self.synthetic.iter().map(|s| s.point.clone()))
            .collect()
    }
}

fn k_nearest(x: &[Vec<f64>], i: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<(f64, usize)> = (0..x.len())
        .filter(|&j| j != i)
        .map(|j| {
            let d: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            (d, j)
        })
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    others.into_iter().take(k).map(|(_, j)| j).collect()
}

/// SMOTE oversampling: `round(ratio · n)` new points, parents taken in
/// round-robin order, each interpolated towards a random one of the
/// parent's `k` nearest neighbours with a gap drawn uniformly from (0, 1).
pub fn smote(training: &[Vec<f64>], ratio: f64, k: usize, seed: u64) -> Result<SmoteOutput> {
    if k == 0 {
        return Err(Error::Config("smote needs k >= 1".into()));
    }
    if !(ratio >= 0.0 && ratio.is_finite()) {
        return Err(Error::Config(format!("smote ratio must be nonnegative, got {ratio}")));
    }
    if training.len() <= k {
        return Err(Error::InsufficientSamples(training.len()));
    }
    let count = (ratio * training.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let neighbours: Vec<Vec<usize>> = if count > 0 {
        (0..training.len()).map(|i| k_nearest(training, i, k)).collect()
    } else {
        Vec::new()
    };
    let synthetic = (0..count)
        .map(|s| {
            let parent = s % training.len();
            let neighbor = neighbours[parent][rng.gen_range(0..k)];
            let mut gap: f64 = rng.gen();
            while gap == 0.0 {
                gap = rng.gen();
            }
            let (x, nn) = (&training[parent], &training[neighbor]);
            let point = x.iter().zip(nn).map(|(a, b)| a + gap * (b - a)).collect();
            SmoteSample {
                point,
                parent,
                neighbor,
                gap,
            }
        })
        .collect();
    Ok(SmoteOutput {
        original: training.to_vec(),
        synthetic,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub method: String,
    pub ratio: Option<f64>,
    pub report: MetricsReport,
}

/// Feedback, no feedback, then SMOTE (without feedback) at each configured
/// ratio, all under Setting 2 with the same splits.
pub fn ablation_suite(pipeline: &Pipeline) -> Result<Vec<AblationRow>> {
    let ev = &pipeline.config.eval;
    let mut runs: Vec<(String, Option<f64>, Learning, Option<SmoteConfig>)> = vec![
        ("feedback".into(), None, Learning::Feedback, None),
        ("no-feedback".into(), None, Learning::NoFeedback, None),
    ];
    for &r in &ev.smote_ratios {
        let cfg = SmoteConfig {
            ratio: r,
            k: ev.smote_k,
            before_split: ev.smote_before_split,
        };
        runs.push(("smote".into(), Some(r), Learning::NoFeedback, Some(cfg)));
    }
    runs.into_iter()
        .map(|(method, ratio, learning, smote)| {
            let report = setting2_holdout(pipeline, learning, smote, ev.repeats)?;
            Ok(AblationRow { method, ratio, report })
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

pub fn write_ablation_csv<W: Write>(rows: &[AblationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "ratio", "precision", "recall", "f1", "auc", "runs"])?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            fmt_opt(r.ratio),
            fmt_opt(r.report.precision),
            fmt_opt(r.report.recall),
            fmt_opt(r.report.f1),
            fmt_opt(r.report.auc),
            r.report.runs.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("ablation.csv", e))?;
    Ok(())
}
