//! Word embeddings learnt by a minimal recurrent next-token predictor.
//!
//! ```text
//! h_t    = tanh(Wx·E[x_t] + Wh·h_{t−1} + b)
//! p_t    = softmax(Wo·h_t + c)
//! loss   = −Σ_t log p_t[x_{t+1}]
//! ```
//!
//! Trained by plain SGD with full backpropagation through time; the rows of
//! `E` are the embeddings handed to the autoencoder.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{clip_joint, Matrix};
use super::TrainLog;
use crate::error::{Error, Result};
use crate::par::Execution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub dim: usize,
    /// One row per vocabulary id.
    pub vectors: Matrix,
}

impl EmbeddingTable {
    pub fn vector(&self, id: u32) -> &[f64] {
        self.vectors.row(id as usize)
    }

    pub fn len(&self) -> usize {
        self.vectors.rows
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.rows == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WordTrainConfig {
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Per-epoch rate is `learning_rate / (1 + lr_decay · epoch)`.
    pub lr_decay: f64,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for WordTrainConfig {
    fn default() -> Self {
        WordTrainConfig { dim: 50, epochs: 20, learning_rate: 0.01, lr_decay: 0.05, clip_norm: 5.0, seed: 7 }
    }
}

struct Rnn {
    emb: Matrix,
    wx: Matrix,
    wh: Matrix,
    bh: Vec<f64>,
    wo: Matrix,
    bo: Vec<f64>,
}

struct Grads {
    emb_rows: Vec<(u32, Vec<f64>)>,
    wx: Matrix,
    wh: Matrix,
    bh: Vec<f64>,
    wo: Matrix,
    bo: Vec<f64>,
}

impl Rnn {
    fn init(vocab: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Rnn {
            emb: Matrix::uniform(vocab, dim, 0.5, &mut rng),
            wx: Matrix::xavier(dim, dim, &mut rng),
            wh: Matrix::xavier(dim, dim, &mut rng),
            bh: vec![0.0; dim],
            wo: Matrix::xavier(vocab, dim, &mut rng),
            bo: vec![0.0; vocab],
        }
    }

    fn dim(&self) -> usize {
        self.wx.rows
    }

    /// Hidden states and softmax outputs for every prediction step.
    fn forward(&self, ids: &[u32]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, f64) {
        let d = self.dim();
        let steps = ids.len().saturating_sub(1);
        let mut hs = Vec::with_capacity(steps);
        let mut probs = Vec::with_capacity(steps);
        let mut loss = 0.0;
        let mut h_prev = vec![0.0; d];
        let mut a = vec![0.0; d];
        let mut tmp = vec![0.0; d];
        for t in 0..steps {
            self.wx.matvec_into(self.emb.row(ids[t] as usize), &mut a);
            self.wh.matvec_into(&h_prev, &mut tmp);
            let h: Vec<f64> = (0..d).map(|i| (a[i] + tmp[i] + self.bh[i]).tanh()).collect();
            let mut logits = self.wo.matvec(&h);
            for (l, b) in logits.iter_mut().zip(&self.bo) {
                *l += b;
            }
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for l in logits.iter_mut() {
                *l = (*l - max).exp();
                sum += *l;
            }
            for l in logits.iter_mut() {
                *l /= sum;
            }
            loss -= logits[ids[t + 1] as usize].max(1e-300).ln();
            h_prev.clone_from(&h);
            hs.push(h);
            probs.push(logits);
        }
        (hs, probs, loss)
    }

    fn backward(&self, ids: &[u32], hs: &[Vec<f64>], probs: &[Vec<f64>]) -> Grads {
        let d = self.dim();
        let mut g = Grads {
            emb_rows: Vec::new(),
            wx: Matrix::zeros(d, d),
            wh: Matrix::zeros(d, d),
            bh: vec![0.0; d],
            wo: Matrix::zeros(self.wo.rows, d),
            bo: vec![0.0; self.bo.len()],
        };
        let mut dh_next = vec![0.0; d];
        let zero = vec![0.0; d];
        for t in (0..hs.len()).rev() {
            let mut dlogits = probs[t].clone();
            dlogits[ids[t + 1] as usize] -= 1.0;
            g.wo.add_outer(&dlogits, &hs[t]);
            for (b, dl) in g.bo.iter_mut().zip(&dlogits) {
                *b += dl;
            }
            let mut dh = dh_next.clone();
            self.wo.matvec_t_acc(&dlogits, &mut dh);
            let dz: Vec<f64> = (0..d).map(|i| dh[i] * (1.0 - hs[t][i] * hs[t][i])).collect();
            let h_prev = if t == 0 { &zero } else { &hs[t - 1] };
            g.wx.add_outer(&dz, self.emb.row(ids[t] as usize));
            g.wh.add_outer(&dz, h_prev);
            for (b, z) in g.bh.iter_mut().zip(&dz) {
                *b += z;
            }
            let mut de = vec![0.0; d];
            self.wx.matvec_t_acc(&dz, &mut de);
            g.emb_rows.push((ids[t], de));
            dh_next = vec![0.0; d];
            self.wh.matvec_t_acc(&dz, &mut dh_next);
        }
        g
    }

    fn apply(&mut self, mut g: Grads, lr: f64, clip: f64) {
        {
            let mut parts: Vec<&mut [f64]> = vec![&mut g.wx.data, &mut g.wh.data, &mut g.bh, &mut g.wo.data, &mut g.bo];
            for (_, row) in g.emb_rows.iter_mut() {
                parts.push(row);
            }
            clip_joint(&mut parts, clip);
        }
        let step = |p: &mut [f64], d: &[f64]| p.iter_mut().zip(d).for_each(|(p, d)| *p -= lr * d);
        step(&mut self.wx.data, &g.wx.data);
        step(&mut self.wh.data, &g.wh.data);
        step(&mut self.bh, &g.bh);
        step(&mut self.wo.data, &g.wo.data);
        step(&mut self.bo, &g.bo);
        for (id, row) in &g.emb_rows {
            step(self.emb.row_mut(*id as usize), row);
        }
    }

    fn corpus_loss(&self, corpus: &[Vec<u32>]) -> f64 {
        let losses = Execution::Parallel.map(corpus, |s| if s.len() >= 2 { self.forward(s).2 } else { 0.0 });
        let total: f64 = losses.iter().sum();
        let count: usize = corpus.iter().filter(|s| s.len() >= 2).map(|s| s.len() - 1).sum();
        if count == 0 {
            0.0
        } else {
            total / count as f64
        }
    }
}

/// Train embeddings over id sequences drawn from a vocabulary of
/// `vocab_size` ids. Deterministic for a given seed; `epochs == 0` returns
/// the seeded initialisation.
pub fn train_word_embeddings(
    corpus: &[Vec<u32>],
    vocab_size: usize,
    config: &WordTrainConfig,
) -> Result<(EmbeddingTable, TrainLog)> {
    if config.dim < 2 {
        return Err(Error::Config(format!("embedding dim must be at least 2, got {}", config.dim)));
    }
    let mut rnn = Rnn::init(vocab_size, config.dim, config.seed);
    let mut log = TrainLog { epoch_losses: vec![rnn.corpus_loss(corpus)] };
    for epoch in 0..config.epochs {
        let lr = config.learning_rate / (1.0 + config.lr_decay * epoch as f64);
        for seq in corpus.iter().filter(|s| s.len() >= 2) {
            let (hs, probs, _) = rnn.forward(seq);
            let g = rnn.backward(seq, &hs, &probs);
            rnn.apply(g, lr, config.clip_norm);
        }
        let loss = rnn.corpus_loss(corpus);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch: epoch + 1 });
        }
        log::debug!("word epoch {}: loss {loss:.5}", epoch + 1);
        log.epoch_losses.push(loss);
    }
    Ok((EmbeddingTable { dim: config.dim, vectors: rnn.emb }, log))
}
