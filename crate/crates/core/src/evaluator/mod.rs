//! Evaluation harness: candidate filtering and sampling for labeling,
//! consensus ground truth, confusion matrices, precision/recall, clone-type
//! distributions and timing reports.

mod classify;
mod report;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detector::{detect_with, DetectorConfig, Theta};
use crate::error::{Error, Result};
use crate::extractor::TokenBag;
use crate::pair::{ClonePair, PairKey};
use crate::par::Execution;

pub use classify::{classify_auto, AutoClass, Type2Mode};
pub use report::{parse_timing_csv, render_report, timing_report, EvaluationRow, ReportInput, TimingRun};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub a: String,
    pub b: String,
    pub filter_score: f64,
}

impl CandidatePair {
    pub fn key(&self) -> PairKey {
        PairKey { a: self.a.clone(), b: self.b.clone() }
    }

    pub fn id(&self) -> String {
        self.key().id()
    }
}

/// Overlap detection at the (looser) filtering threshold.
pub fn filter_candidates(bags: &[TokenBag], theta: Theta, exec: Execution) -> Vec<CandidatePair> {
    detect_with(bags, &DetectorConfig { theta }, exec)
        .pairs
        .into_iter()
        .map(|p| CandidatePair { a: p.a, b: p.b, filter_score: p.score })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub items: Vec<T>,
    /// Set when fewer than the requested number were available.
    pub diagnostic: Option<String>,
}

/// Uniform sample without replacement, in input order. Deterministic per
/// seed.
pub fn sample_pairs<T: Clone>(pairs: &[T], n: usize, seed: u64) -> Sample<T> {
    if n >= pairs.len() {
        let diagnostic = (n > pairs.len())
            .then(|| format!("requested {n} pairs but only {} are available; returning all", pairs.len()));
        return Sample { items: pairs.to_vec(), diagnostic };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, pairs.len(), n).into_vec();
    idx.sort_unstable();
    Sample { items: idx.into_iter().map(|i| pairs[i].clone()).collect(), diagnostic: None }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CloneLabel {
    Type1,
    Type2,
    Type3,
    Type4,
    NotClone,
}

impl CloneLabel {
    pub const ALL: [CloneLabel; 5] =
        [CloneLabel::Type1, CloneLabel::Type2, CloneLabel::Type3, CloneLabel::Type4, CloneLabel::NotClone];

    pub fn as_str(self) -> &'static str {
        match self {
            CloneLabel::Type1 => "Type1",
            CloneLabel::Type2 => "Type2",
            CloneLabel::Type3 => "Type3",
            CloneLabel::Type4 => "Type4",
            CloneLabel::NotClone => "NotClone",
        }
    }

    pub fn is_clone(self) -> bool {
        self != CloneLabel::NotClone
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for CloneLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CloneLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CloneLabel::ALL.into_iter().find(|l| l.as_str() == s).ok_or_else(|| Error::InvalidLabel(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub pair_id: String,
    pub rater: String,
    pub label: CloneLabel,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub pair_id: String,
    pub label: CloneLabel,
    pub supporting_raters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConsensusRule {
    /// The top label has ≥ 2 raters and strictly more than any other label.
    #[default]
    StrictPlurality,
    /// The top label has ≥ 2 raters and more than half of all raters.
    Majority,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConsensusOutcome {
    pub truth: Vec<GroundTruth>,
    /// Pairs where two labels tie at ≥ 2 supporters.
    pub unresolved: usize,
    /// Pairs with labels but no qualifying consensus.
    pub insufficient: usize,
}

/// Latest record per (pair, rater), in input order.
pub fn latest_records(records: &[LabelRecord]) -> Vec<LabelRecord> {
    let mut pos: HashMap<(&str, &str), usize> = HashMap::new();
    let mut out: Vec<LabelRecord> = Vec::new();
    for r in records {
        match pos.get(&(r.pair_id.as_str(), r.rater.as_str())) {
            Some(&i) => out[i] = r.clone(),
            None => {
                pos.insert((r.pair_id.as_str(), r.rater.as_str()), out.len());
                out.push(r.clone());
            }
        }
    }
    out
}

/// Ground truth from raw label records. Resubmissions by the same rater
/// replace earlier ones. Output is sorted by pair id.
pub fn consensus(records: &[LabelRecord], rule: ConsensusRule) -> ConsensusOutcome {
    let mut votes: BTreeMap<&str, [usize; 5]> = BTreeMap::new();
    let latest = latest_records(records);
    for r in &latest {
        votes.entry(r.pair_id.as_str()).or_default()[r.label.index()] += 1;
    }
    let mut out = ConsensusOutcome::default();
    for (pair, counts) in votes {
        let top = *counts.iter().max().unwrap_or(&0);
        let leaders: Vec<usize> = (0..5).filter(|&i| counts[i] == top).collect();
        let total: usize = counts.iter().sum();
        if top >= 2 && leaders.len() > 1 {
            out.unresolved += 1;
            continue;
        }
        let accepted = top >= 2
            && match rule {
                ConsensusRule::StrictPlurality => true,
                ConsensusRule::Majority => 2 * top > total,
            };
        if accepted {
            out.truth.push(GroundTruth {
                pair_id: pair.to_string(),
                label: CloneLabel::ALL[leaders[0]],
                supporting_raters: top,
            });
        } else {
            out.insufficient += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn predicted_positive(&self) -> u64 {
        self.tp + self.fp
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub matrix: ConfusionMatrix,
    /// Predicted pairs with no ground-truth label; not scored.
    pub unlabeled_predictions: u64,
}

/// Score predictions against labeled pairs only.
pub fn confusion(predicted: &[ClonePair], truth: &[GroundTruth]) -> Result<Confusion> {
    if truth.is_empty() {
        return Err(Error::EmptyTruth);
    }
    let predicted: BTreeSet<String> = predicted.iter().map(|p| p.key().id()).collect();
    let labeled: HashMap<&str, CloneLabel> = truth.iter().map(|t| (t.pair_id.as_str(), t.label)).collect();
    let mut m = ConfusionMatrix::default();
    for (id, label) in &labeled {
        match (label.is_clone(), predicted.contains(*id)) {
            (true, true) => m.tp += 1,
            (false, true) => m.fp += 1,
            (true, false) => m.fn_ += 1,
            (false, false) => m.tn += 1,
        }
    }
    let unlabeled = predicted.iter().filter(|id| !labeled.contains_key(id.as_str())).count() as u64;
    Ok(Confusion { matrix: m, unlabeled_predictions: unlabeled })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `None` when nothing was predicted positive.
    pub precision: Option<f64>,
    /// `None` when the truth has no positives.
    pub recall: Option<f64>,
}

pub fn precision_recall(m: &ConfusionMatrix) -> Metrics {
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    Metrics { precision: ratio(m.tp, m.tp + m.fp), recall: ratio(m.tp, m.tp + m.fn_) }
}

/// `100·num/den` rounded half-up to one decimal, in tenths of a percent.
pub fn percent_tenths(num: u64, den: u64) -> u64 {
    assert!(den > 0, "percentage of an empty total");
    (2000 * num + den) / (2 * den)
}

pub fn format_tenths(t: u64) -> String {
    format!("{}.{}", t / 10, t % 10)
}

/// Render an optional ratio as a one-decimal percentage, or "n/a".
pub fn format_ratio(r: Option<f64>) -> String {
    match r {
        Some(v) => format!("{:.1}", v * 100.0),
        None => "n/a".into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeShare {
    pub label: CloneLabel,
    pub count: u64,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeDistribution {
    pub total: u64,
    /// One entry per label, Type1..Type4 then NotClone.
    pub shares: Vec<TypeShare>,
}

impl TypeDistribution {
    pub fn from_counts(counts: [u64; 5]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::EmptyTruth);
        }
        let shares = CloneLabel::ALL
            .iter()
            .zip(counts)
            .map(|(&label, count)| TypeShare { label, count, percent: percent_tenths(count, total) as f64 / 10.0 })
            .collect();
        Ok(TypeDistribution { total, shares })
    }

    pub fn percent(&self, label: CloneLabel) -> f64 {
        self.shares[label.index()].percent
    }

    pub fn count(&self, label: CloneLabel) -> u64 {
        self.shares[label.index()].count
    }
}

pub fn type_distribution(truth: &[GroundTruth]) -> Result<TypeDistribution> {
    let mut counts = [0u64; 5];
    for t in truth {
        counts[t.label.index()] += 1;
    }
    TypeDistribution::from_counts(counts)
}
