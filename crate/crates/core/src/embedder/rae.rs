//! Greedy recursive autoencoder.
//!
//! ```text
//! p = tanh(We·[c1; c2] + be)        encoder, 2d → d
//! r = Wd·p + bd                     decoder, d → 2d
//! E = ‖r − [c1; c2]‖²               merge error
//! ```
//!
//! Encoding repeatedly merges the adjacent pair with the smallest merge error
//! until one vector is left. Training sums merge errors over the greedy tree
//! and backpropagates through that (fixed) tree.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::linalg::{clip_joint, norm, squared_distance, Matrix};
use super::TrainLog;
use crate::error::{Error, Result};
use crate::par::Execution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaeModel {
    pub dim: usize,
    pub encode_weights: Matrix,
    pub encode_bias: Vec<f64>,
    pub decode_weights: Matrix,
    pub decode_bias: Vec<f64>,
    /// Scale every parent vector to unit length.
    #[serde(default)]
    pub normalize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaeTrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub clip_norm: f64,
    pub seed: u64,
    pub normalize: bool,
}

impl Default for RaeTrainConfig {
    fn default() -> Self {
        RaeTrainConfig { epochs: 20, learning_rate: 0.01, lr_decay: 0.05, clip_norm: 5.0, seed: 7, normalize: false }
    }
}

/// One merge in a greedy tree. Node indices address [`Tree::nodes`]; the
/// first `n` nodes are the leaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub parent: usize,
}

#[derive(Debug, Clone)]
pub struct Tree {
    pub nodes: Vec<Vec<f64>>,
    pub merges: Vec<Merge>,
    /// Pre-normalisation parent activations, one per merge.
    activations: Vec<Vec<f64>>,
    reconstructions: Vec<Vec<f64>>,
    pub loss: f64,
}

impl Tree {
    pub fn root(&self) -> &[f64] {
        self.nodes.last().expect("tree has at least one node")
    }
}

#[derive(Debug, Clone)]
pub struct RaeGrads {
    pub encode_weights: Matrix,
    pub encode_bias: Vec<f64>,
    pub decode_weights: Matrix,
    pub decode_bias: Vec<f64>,
}

impl RaeGrads {
    fn zeros(dim: usize) -> Self {
        RaeGrads {
            encode_weights: Matrix::zeros(dim, 2 * dim),
            encode_bias: vec![0.0; dim],
            decode_weights: Matrix::zeros(2 * dim, dim),
            decode_bias: vec![0.0; 2 * dim],
        }
    }
}

struct MergeEval {
    activation: Vec<f64>,
    parent: Vec<f64>,
    reconstruction: Vec<f64>,
    error: f64,
}

impl RaeModel {
    pub fn init(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RaeModel {
            dim,
            encode_weights: Matrix::xavier(dim, 2 * dim, &mut rng),
            encode_bias: vec![0.0; dim],
            decode_weights: Matrix::xavier(2 * dim, dim, &mut rng),
            decode_bias: vec![0.0; 2 * dim],
            normalize: false,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.encode_weights.is_finite()
            && self.decode_weights.is_finite()
            && self.encode_bias.iter().chain(&self.decode_bias).all(|v| v.is_finite())
    }

    fn merge(&self, c1: &[f64], c2: &[f64]) -> MergeEval {
        let mut c = Vec::with_capacity(2 * self.dim);
        c.extend_from_slice(c1);
        c.extend_from_slice(c2);
        let mut activation = self.encode_weights.matvec(&c);
        for (a, b) in activation.iter_mut().zip(&self.encode_bias) {
            *a = (*a + b).tanh();
        }
        let parent = if self.normalize { unit(&activation) } else { activation.clone() };
        let mut reconstruction = self.decode_weights.matvec(&parent);
        for (r, b) in reconstruction.iter_mut().zip(&self.decode_bias) {
            *r += b;
        }
        let error = squared_distance(&reconstruction, &c);
        MergeEval { activation, parent, reconstruction, error }
    }

    /// Build the greedy merge tree over `leaves`. Ties go to the leftmost pair.
    pub fn greedy_tree(&self, leaves: &[&[f64]]) -> Tree {
        let n = leaves.len();
        let mut nodes: Vec<Vec<f64>> = leaves.iter().map(|l| l.to_vec()).collect();
        let mut frontier: Vec<usize> = (0..n).collect();
        let mut pending: Vec<MergeEval> =
            (0..n.saturating_sub(1)).map(|i| self.merge(&nodes[i], &nodes[i + 1])).collect();
        let mut tree = Tree {
            nodes: Vec::new(),
            merges: Vec::with_capacity(n.saturating_sub(1)),
            activations: Vec::new(),
            reconstructions: Vec::new(),
            loss: 0.0,
        };
        while !pending.is_empty() {
            let mut best = 0;
            for (i, m) in pending.iter().enumerate().skip(1) {
                if m.error < pending[best].error {
                    best = i;
                }
            }
            let eval = pending.remove(best);
            let parent = nodes.len();
            tree.merges.push(Merge { left: frontier[best], right: frontier[best + 1], parent });
            tree.loss += eval.error;
            nodes.push(eval.parent);
            tree.activations.push(eval.activation);
            tree.reconstructions.push(eval.reconstruction);
            frontier.remove(best + 1);
            frontier[best] = parent;
            if best > 0 {
                pending[best - 1] = self.merge(&nodes[frontier[best - 1]], &nodes[parent]);
            }
            if best + 1 < frontier.len() {
                pending[best] = self.merge(&nodes[parent], &nodes[frontier[best + 1]]);
            }
        }
        tree.nodes = nodes;
        tree
    }

    /// Summed merge error when the merge order is fixed to `merges`.
    pub fn tree_loss(&self, leaves: &[&[f64]], merges: &[Merge]) -> f64 {
        let mut nodes: Vec<Vec<f64>> = leaves.iter().map(|l| l.to_vec()).collect();
        let mut loss = 0.0;
        for m in merges {
            let eval = self.merge(&nodes[m.left], &nodes[m.right]);
            loss += eval.error;
            nodes.push(eval.parent);
        }
        loss
    }

    /// Gradient of [`Tree::loss`] with the tree structure held fixed.
    pub fn backprop(&self, tree: &Tree) -> RaeGrads {
        let d = self.dim;
        let mut g = RaeGrads::zeros(d);
        let mut node_grad = vec![vec![0.0; d]; tree.nodes.len()];
        for (k, m) in tree.merges.iter().enumerate().rev() {
            let p = &tree.nodes[m.parent];
            let a = &tree.activations[k];
            let mut c = Vec::with_capacity(2 * d);
            c.extend_from_slice(&tree.nodes[m.left]);
            c.extend_from_slice(&tree.nodes[m.right]);
            let dr: Vec<f64> = tree.reconstructions[k].iter().zip(&c).map(|(r, c)| 2.0 * (r - c)).collect();
            g.decode_weights.add_outer(&dr, p);
            for (b, v) in g.decode_bias.iter_mut().zip(&dr) {
                *b += v;
            }
            let mut gp = std::mem::take(&mut node_grad[m.parent]);
            self.decode_weights.matvec_t_acc(&dr, &mut gp);
            let ga = if self.normalize { unit_backward(a, &gp) } else { gp };
            let dz: Vec<f64> = ga.iter().zip(a).map(|(g, a)| g * (1.0 - a * a)).collect();
            g.encode_weights.add_outer(&dz, &c);
            for (b, v) in g.encode_bias.iter_mut().zip(&dz) {
                *b += v;
            }
            let mut gc: Vec<f64> = dr.iter().map(|v| -v).collect();
            self.encode_weights.matvec_t_acc(&dz, &mut gc);
            for (dst, src) in node_grad[m.left].iter_mut().zip(&gc[..d]) {
                *dst += src;
            }
            for (dst, src) in node_grad[m.right].iter_mut().zip(&gc[d..]) {
                *dst += src;
            }
        }
        g
    }

    fn step(&mut self, mut g: RaeGrads, lr: f64, clip: f64) {
        clip_joint(
            &mut [&mut g.encode_weights.data, &mut g.encode_bias, &mut g.decode_weights.data, &mut g.decode_bias],
            clip,
        );
        let upd = |p: &mut [f64], d: &[f64]| p.iter_mut().zip(d).for_each(|(p, d)| *p -= lr * d);
        upd(&mut self.encode_weights.data, &g.encode_weights.data);
        upd(&mut self.encode_bias, &g.encode_bias);
        upd(&mut self.decode_weights.data, &g.decode_weights.data);
        upd(&mut self.decode_bias, &g.decode_bias);
    }

    /// Sentence vector: the root of the greedy tree, or the word vector
    /// itself for a single leaf.
    pub fn encode(&self, leaves: &[&[f64]]) -> Option<Vec<f64>> {
        match leaves.len() {
            0 => None,
            1 => Some(leaves[0].to_vec()),
            _ => Some(self.greedy_tree(leaves).root().to_vec()),
        }
    }
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    if n == 0.0 {
        v.to_vec()
    } else {
        v.iter().map(|x| x / n).collect()
    }
}

/// Pull a gradient w.r.t. `a/‖a‖` back to `a`.
fn unit_backward(a: &[f64], g: &[f64]) -> Vec<f64> {
    let n = norm(a);
    if n == 0.0 {
        return g.to_vec();
    }
    let proj: f64 = a.iter().zip(g).map(|(a, g)| a * g).sum::<f64>() / (n * n);
    a.iter().zip(g).map(|(a, g)| (g - proj * a) / n).collect()
}

/// Train on sequences of leaf vectors. Sequences shorter than two leaves
/// contribute no merges and are ignored. The log holds the mean merge error
/// before training and after each epoch.
pub fn train_rae(sequences: &[Vec<&[f64]>], dim: usize, config: &RaeTrainConfig) -> Result<(RaeModel, TrainLog)> {
    let mut model = RaeModel::init(dim, config.seed);
    model.normalize = config.normalize;
    let trainable: Vec<&Vec<&[f64]>> = sequences.iter().filter(|s| s.len() >= 2).collect();
    let merges: usize = trainable.iter().map(|s| s.len() - 1).sum();
    let mean_loss = |m: &RaeModel| {
        if merges == 0 {
            0.0
        } else {
            Execution::Parallel.map(&trainable, |s| m.greedy_tree(s).loss).iter().sum::<f64>() / merges as f64
        }
    };
    let mut log = TrainLog { epoch_losses: vec![mean_loss(&model)] };
    for epoch in 0..config.epochs {
        let lr = config.learning_rate / (1.0 + config.lr_decay * epoch as f64);
        for seq in &trainable {
            let tree = model.greedy_tree(seq);
            let g = model.backprop(&tree);
            model.step(g, lr, config.clip_norm);
        }
        let loss = mean_loss(&model);
        if !loss.is_finite() || !model.is_finite() {
            return Err(Error::NonFiniteLoss { epoch: epoch + 1 });
        }
        log::debug!("rae epoch {}: loss {loss:.5}", epoch + 1);
        log.epoch_losses.push(loss);
    }
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn leaves(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect()).collect()
    }

    fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(|x| x.as_slice()).collect()
    }

    #[test]
    fn tree_shape() {
        let m = RaeModel::init(4, 1);
        let l = leaves(5, 4, 2);
        let t = m.greedy_tree(&refs(&l));
        assert_eq!(t.merges.len(), 4);
        assert_eq!(t.nodes.len(), 9);
        assert_eq!(t.merges.last().unwrap().parent, 8);
        let mut used: Vec<usize> = t.merges.iter().flat_map(|m| [m.left, m.right]).collect();
        used.sort();
        assert_eq!(used, (0..8).collect::<Vec<_>>());
        assert!((m.tree_loss(&refs(&l), &t.merges) - t.loss).abs() < 1e-12);
    }

    #[test]
    fn first_merge_is_cheapest_adjacent_pair() {
        let m = RaeModel::init(3, 5);
        let l = leaves(6, 3, 9);
        let t = m.greedy_tree(&refs(&l));
        let errs: Vec<f64> = (0..5).map(|i| m.merge(&l[i], &l[i + 1]).error).collect();
        let best = (0..5).min_by(|&a, &b| errs[a].total_cmp(&errs[b])).unwrap();
        assert_eq!((t.merges[0].left, t.merges[0].right), (best, best + 1));
    }

    #[test]
    fn single_leaf_passthrough_and_empty() {
        let m = RaeModel::init(3, 5);
        let v = [0.1, -0.2, 0.3];
        assert_eq!(m.encode(&[&v]).unwrap(), v.to_vec());
        assert!(m.encode(&[]).is_none());
    }

    #[test]
    fn normalized_parents_have_unit_length() {
        let mut m = RaeModel::init(4, 5);
        m.normalize = true;
        let l = leaves(4, 4, 1);
        let r = m.encode(&refs(&l)).unwrap();
        assert!((norm(&r) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn training_reduces_loss() {
        let data: Vec<Vec<Vec<f64>>> = (0..20).map(|s| leaves(6, 5, s)).collect();
        let seqs: Vec<Vec<&[f64]>> = data.iter().map(|d| refs(d)).collect();
        let cfg = RaeTrainConfig { epochs: 10, learning_rate: 0.05, ..Default::default() };
        let (model, log) = train_rae(&seqs, 5, &cfg).unwrap();
        assert_eq!(log.epoch_losses.len(), 11);
        assert!(log.final_loss() < log.initial_loss(), "{:?}", log.epoch_losses);
        assert!(model.is_finite());
    }
}
