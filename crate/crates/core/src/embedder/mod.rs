//! Embedding detector: word vectors from a recurrent next-token predictor,
//! per-method sentence vectors from a greedy recursive autoencoder, and
//! euclidean-distance thresholding over those sentence vectors.

pub mod linalg;
pub mod rae;
pub mod vocab;
pub mod word;

use std::collections::{BTreeMap, HashMap};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractor::{Diagnostic, ReprKind, RepresentationSequence};
use crate::pair::{canonicalize, ClonePair, DetectorTag, PairKey};
use crate::par::Execution;

pub use linalg::euclidean;
pub use rae::{train_rae, RaeModel, RaeTrainConfig};
pub use vocab::{Vocab, UNK};
pub use word::{train_word_embeddings, EmbeddingTable, WordTrainConfig};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Loss before the first epoch, then one entry per epoch.
    pub epoch_losses: Vec<f64>,
}

impl TrainLog {
    pub fn initial_loss(&self) -> f64 {
        self.epoch_losses.first().copied().unwrap_or(0.0)
    }

    pub fn final_loss(&self) -> f64 {
        self.epoch_losses.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceEmbedding {
    pub method_id: String,
    pub kind: ReprKind,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedConfig {
    pub dim: usize,
    pub word_epochs: usize,
    pub rae_epochs: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub clip_norm: f64,
    pub min_count: usize,
    pub seed: u64,
    pub normalize: bool,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            dim: 50,
            word_epochs: 20,
            rae_epochs: 20,
            learning_rate: 0.01,
            lr_decay: 0.05,
            clip_norm: 5.0,
            min_count: 2,
            seed: 7,
            normalize: false,
        }
    }
}

impl EmbedConfig {
    pub fn word(&self) -> WordTrainConfig {
        WordTrainConfig {
            dim: self.dim,
            epochs: self.word_epochs,
            learning_rate: self.learning_rate,
            lr_decay: self.lr_decay,
            clip_norm: self.clip_norm,
            seed: self.seed,
        }
    }

    pub fn rae(&self) -> RaeTrainConfig {
        RaeTrainConfig {
            epochs: self.rae_epochs,
            learning_rate: self.learning_rate,
            lr_decay: self.lr_decay,
            clip_norm: self.clip_norm,
            seed: self.seed.wrapping_add(1),
            normalize: self.normalize,
        }
    }
}

pub fn build_vocab(sequences: &[RepresentationSequence], min_count: usize) -> Result<Vocab> {
    if sequences.is_empty() {
        return Err(Error::Config("no sequences to build a vocabulary from".into()));
    }
    Vocab::build(sequences, min_count)
}

/// Sentence embedding for one method. Fails on an empty sequence.
pub fn encode_method(
    sequence: &RepresentationSequence,
    vocab: &Vocab,
    table: &EmbeddingTable,
    model: &RaeModel,
) -> Result<SentenceEmbedding> {
    let ids = vocab.encode(&sequence.tokens);
    let leaves: Vec<&[f64]> = ids.iter().map(|&i| table.vector(i)).collect();
    let vector = model.encode(&leaves).ok_or_else(|| Error::EmptySequence(sequence.method_id.clone()))?;
    Ok(SentenceEmbedding { method_id: sequence.method_id.clone(), kind: sequence.kind, vector })
}

#[derive(Debug, Clone)]
pub struct EmbedOutcome {
    pub kind: ReprKind,
    pub vocab: Vocab,
    pub table: EmbeddingTable,
    pub model: RaeModel,
    pub embeddings: Vec<SentenceEmbedding>,
    pub word_log: TrainLog,
    pub rae_log: TrainLog,
    pub diagnostics: Vec<Diagnostic>,
}

/// Full pipeline for one representation kind. Training is sequential;
/// encoding uses `exec`.
pub fn embed_sequences(
    sequences: &[RepresentationSequence],
    config: &EmbedConfig,
    exec: Execution,
) -> Result<EmbedOutcome> {
    let kind = match sequences.first() {
        Some(s) => s.kind,
        None => return Err(Error::Config("no sequences to embed".into())),
    };
    if sequences.iter().any(|s| s.kind != kind) {
        return Err(Error::MixedEmbeddings);
    }
    let mut diagnostics = Vec::new();
    let usable: Vec<&RepresentationSequence> = sequences
        .iter()
        .filter(|s| {
            if s.tokens.is_empty() {
                diagnostics.push(Diagnostic {
                    path: s.method_id.clone(),
                    line: 0,
                    message: format!("empty {kind} sequence skipped"),
                });
                false
            } else {
                true
            }
        })
        .collect();
    let owned: Vec<RepresentationSequence> = usable.iter().map(|s| (*s).clone()).collect();
    let vocab = build_vocab(&owned, config.min_count)?;
    let encoded: Vec<Vec<u32>> = usable.iter().map(|s| vocab.encode(&s.tokens)).collect();
    let (table, word_log) = train_word_embeddings(&encoded, vocab.len(), &config.word())?;
    let leaf_seqs: Vec<Vec<&[f64]>> =
        encoded.iter().map(|ids| ids.iter().map(|&i| table.vector(i)).collect()).collect();
    let (model, rae_log) = train_rae(&leaf_seqs, config.dim, &config.rae())?;
    let embeddings = exec
        .map(&usable, |s| encode_method(s, &vocab, &table, &model))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(EmbedOutcome { kind, vocab, table, model, embeddings, word_log, rae_log, diagnostics })
}

impl From<ReprKind> for DetectorTag {
    fn from(kind: ReprKind) -> Self {
        match kind {
            ReprKind::Identifier => DetectorTag::Identifier,
            ReprKind::Ast => DetectorTag::Ast,
        }
    }
}

fn check_uniform(embeddings: &[SentenceEmbedding]) -> Result<Option<ReprKind>> {
    let Some(first) = embeddings.first() else { return Ok(None) };
    let width = first.vector.len();
    if embeddings.iter().any(|e| e.kind != first.kind || e.vector.len() != width) {
        return Err(Error::MixedEmbeddings);
    }
    Ok(Some(first.kind))
}

/// Every pair at euclidean distance ≤ `delta`, canonicalized. Score is the
/// distance.
pub fn detect_by_distance(embeddings: &[SentenceEmbedding], delta: f64, exec: Execution) -> Result<Vec<ClonePair>> {
    let groups = vec![0usize; embeddings.len()];
    detect_in_groups(embeddings, &groups, delta, exec)
}

/// As [`detect_by_distance`] but only compares methods of the same project.
/// Methods missing from `project_of` form their own group.
pub fn detect_by_distance_grouped(
    embeddings: &[SentenceEmbedding],
    project_of: &HashMap<String, String>,
    delta: f64,
    exec: Execution,
) -> Result<Vec<ClonePair>> {
    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    let groups: Vec<usize> = embeddings
        .iter()
        .enumerate()
        .map(|(i, e)| match project_of.get(&e.method_id) {
            Some(p) => {
                let next = ids.len();
                *ids.entry(p.as_str()).or_insert(next)
            }
            None => usize::MAX - i,
        })
        .collect();
    detect_in_groups(embeddings, &groups, delta, exec)
}

fn detect_in_groups(
    embeddings: &[SentenceEmbedding],
    groups: &[usize],
    delta: f64,
    exec: Execution,
) -> Result<Vec<ClonePair>> {
    let Some(kind) = check_uniform(embeddings)? else { return Ok(Vec::new()) };
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::Config(format!("distance threshold must be ≥ 0, got {delta}")));
    }
    let tag = DetectorTag::from(kind);
    let rows = exec.map_range(embeddings.len(), |i| {
        let a = &embeddings[i];
        (i + 1..embeddings.len())
            .filter(|&j| groups[i] == groups[j])
            .filter_map(|j| {
                let b = &embeddings[j];
                let d = euclidean(&a.vector, &b.vector);
                (d <= delta && a.method_id != b.method_id)
                    .then(|| ClonePair::new(a.method_id.as_str(), b.method_id.as_str(), d, tag).with_threshold(delta))
            })
            .collect::<Vec<_>>()
    });
    let mut pairs: Vec<ClonePair> = rows.into_iter().flatten().collect();
    canonicalize(&mut pairs);
    Ok(pairs)
}

/// Distance at quantile `q` of the pairwise-distance distribution. Uses all
/// pairs when there are at most `max_pairs`, otherwise a seeded sample of
/// that many.
pub fn calibrate_delta(embeddings: &[SentenceEmbedding], q: f64, max_pairs: usize, seed: u64) -> Result<f64> {
    check_uniform(embeddings)?;
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Config(format!("quantile must be in [0, 1], got {q}")));
    }
    let n = embeddings.len();
    let total = n * n.saturating_sub(1) / 2;
    if total == 0 || max_pairs == 0 {
        return Err(Error::Config("need at least two embeddings to calibrate a distance threshold".into()));
    }
    let pair_at = |k: usize| unrank_pair(n, k);
    let mut dists: Vec<f64> = if total <= max_pairs {
        (0..total).map(pair_at).map(|(i, j)| euclidean(&embeddings[i].vector, &embeddings[j].vector)).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample(&mut rng, total, max_pairs)
            .into_iter()
            .map(pair_at)
            .map(|(i, j)| euclidean(&embeddings[i].vector, &embeddings[j].vector))
            .collect()
    };
    dists.sort_by(f64::total_cmp);
    let idx = ((q * dists.len() as f64).ceil() as usize).clamp(1, dists.len()) - 1;
    Ok(dists[idx])
}

/// The `k`-th pair `(i, j)`, `i < j`, in row-major order.
fn unrank_pair(n: usize, mut k: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row = n - 1 - i;
        if k < row {
            return (i, i + 1 + k);
        }
        k -= row;
        i += 1;
    }
}

/// Set union keyed by pair. Score is the smaller distance.
pub fn combine(identifier: &[ClonePair], ast: &[ClonePair]) -> Vec<ClonePair> {
    let mut merged: BTreeMap<PairKey, ClonePair> = BTreeMap::new();
    for p in identifier.iter().chain(ast) {
        let key = p.key();
        let entry = merged.entry(key).or_insert_with(|| {
            let mut c = p.clone();
            c.detector = DetectorTag::Combination;
            c.threshold = None;
            c
        });
        if p.score < entry.score {
            entry.score = p.score;
        }
    }
    merged.into_values().collect()
}
