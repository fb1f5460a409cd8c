use std::collections::{BTreeMap, BTreeSet};

use clonekit::embedder::linalg::Matrix;
use clonekit::embedder::{
    build_vocab, combine, detect_by_distance, encode_method, euclidean, train_word_embeddings, EmbeddingTable,
    RaeModel, SentenceEmbedding, WordTrainConfig, UNK,
};
use clonekit::extractor::{ReprKind, RepresentationSequence};
use clonekit::{ClonePair, DetectorTag, Execution, PairKey};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vectors(n: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, dim), n)
}

fn embeddings(vs: &[Vec<f64>]) -> Vec<SentenceEmbedding> {
    vs.iter()
        .enumerate()
        .map(|(i, v)| SentenceEmbedding { method_id: format!("m{i:03}"), kind: ReprKind::Ast, vector: v.clone() })
        .collect()
}

fn keyset(pairs: &[ClonePair]) -> BTreeSet<PairKey> {
    pairs.iter().map(|p| p.key()).collect()
}

fn pair_set(ids: &[(u8, u8)], tag: DetectorTag) -> Vec<ClonePair> {
    let mut v: Vec<ClonePair> = ids
        .iter()
        .filter(|(a, b)| a != b)
        .map(|&(a, b)| ClonePair::new(format!("m{a}"), format!("m{b}"), f64::from(a.max(b)) / 10.0, tag))
        .collect();
    clonekit::pair::canonicalize(&mut v);
    v
}

fn rel_err(num: &[f64], ana: &[f64]) -> f64 {
    let diff: f64 = num.iter().zip(ana).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale = num.iter().map(|a| a * a).sum::<f64>().sqrt() + ana.iter().map(|a| a * a).sum::<f64>().sqrt();
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Central differences of `tree_loss` over every parameter, with the tree
/// shape fixed to the greedy tree at the unperturbed point.
pub fn finite_difference_error(model: &RaeModel, leaves: &[Vec<f64>]) -> f64 {
    let refs: Vec<&[f64]> = leaves.iter().map(|l| l.as_slice()).collect();
    let tree = model.greedy_tree(&refs);
    let g = model.backprop(&tree);
    let h = 1e-5;
    let mut num = Vec::new();
    let mut ana = Vec::new();
    let fields: [(fn(&mut RaeModel) -> &mut Vec<f64>, Vec<f64>); 4] = [
        (|m| &mut m.encode_weights.data, g.encode_weights.data.clone()),
        (|m| &mut m.encode_bias, g.encode_bias.clone()),
        (|m| &mut m.decode_weights.data, g.decode_weights.data.clone()),
        (|m| &mut m.decode_bias, g.decode_bias.clone()),
    ];
    for (field, grad) in fields {
        for k in 0..grad.len() {
            let mut p = model.clone();
            field(&mut p)[k] += h;
            let up = p.tree_loss(&refs, &tree.merges);
            field(&mut p)[k] -= 2.0 * h;
            let down = p.tree_loss(&refs, &tree.merges);
            num.push((up - down) / (2.0 * h));
            ana.push(grad[k]);
        }
    }
    rel_err(&num, &ana)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distance_axioms(x in prop::collection::vec(-1e3f64..1e3, 1..20), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = x.iter().map(|_| rng.gen_range(-1e3..1e3)).collect();
        prop_assert_eq!(euclidean(&x, &x), 0.0);
        prop_assert_eq!(euclidean(&x, &y), euclidean(&y, &x));
        prop_assert!(euclidean(&x, &y) >= 0.0);
        let z: Vec<f64> = x.iter().map(|_| rng.gen_range(-1e3..1e3)).collect();
        prop_assert!(euclidean(&x, &z) <= euclidean(&x, &y) + euclidean(&y, &z) + 1e-9);
    }

    #[test]
    fn distance_detection_equals_brute_force(vs in vectors(30, 3), delta in 0.0f64..4.0) {
        let e = embeddings(&vs);
        let got = keyset(&detect_by_distance(&e, delta, Execution::Parallel).unwrap());
        let mut want = BTreeSet::new();
        for i in 0..vs.len() {
            for j in i + 1..vs.len() {
                let d2: f64 = vs[i].iter().zip(&vs[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2.sqrt() <= delta {
                    want.insert(PairKey::new(e[i].method_id.clone(), e[j].method_id.clone()));
                }
            }
        }
        prop_assert_eq!(got, want);
        prop_assert_eq!(
            detect_by_distance(&e, delta, Execution::Sequential).unwrap(),
            detect_by_distance(&e, delta, Execution::Parallel).unwrap()
        );
    }

    #[test]
    fn growing_delta_never_drops_pairs(vs in vectors(25, 2), a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let e = embeddings(&vs);
        let small = keyset(&detect_by_distance(&e, a.min(b), Execution::Sequential).unwrap());
        let large = keyset(&detect_by_distance(&e, a.max(b), Execution::Sequential).unwrap());
        prop_assert!(small.is_subset(&large));
    }

    #[test]
    fn combine_is_set_union(xs in prop::collection::vec((0u8..15, 0u8..15), 0..30),
                            ys in prop::collection::vec((0u8..15, 0u8..15), 0..30)) {
        let a = pair_set(&xs, DetectorTag::Identifier);
        let b = pair_set(&ys, DetectorTag::Ast);
        let c = combine(&a, &b);
        let union: BTreeSet<PairKey> = keyset(&a).union(&keyset(&b)).cloned().collect();
        prop_assert_eq!(keyset(&c), union);
        prop_assert_eq!(c.len(), keyset(&c).len());
        prop_assert!(c.len() <= a.len() + b.len());
        prop_assert!(c.iter().all(|p| p.detector == DetectorTag::Combination));
        prop_assert_eq!(combine(&b, &a), c.clone());
        prop_assert_eq!(combine(&c, &c), c);
    }

    #[test]
    fn rae_gradients_match_finite_differences(dim in 2usize..5, len in 3usize..9, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = RaeModel::init(dim, seed);
        let leaves: Vec<Vec<f64>> = (0..len).map(|_| (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect()).collect();
        let err = finite_difference_error(&model, &leaves);
        prop_assert!(err <= 1e-4, "relative error {err}");
    }

    #[test]
    fn rae_gradients_match_with_normalization(dim in 2usize..4, len in 3usize..7, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = RaeModel { normalize: true, ..RaeModel::init(dim, seed) };
        let leaves: Vec<Vec<f64>> = (0..len).map(|_| (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect()).collect();
        prop_assert!(finite_difference_error(&model, &leaves) <= 1e-4);
    }

    #[test]
    fn vocab_matches_counting_oracle(seqs in prop::collection::vec(prop::collection::vec("[a-f]{1,2}", 0..12), 1..10),
                                     min_count in 1usize..4) {
        let seqs: Vec<RepresentationSequence> = seqs
            .into_iter()
            .enumerate()
            .map(|(i, tokens)| RepresentationSequence { method_id: format!("m{i}"), kind: ReprKind::Identifier, tokens, degenerate: false })
            .collect();
        let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
        for s in &seqs {
            for t in &s.tokens {
                *freq.entry(t).or_default() += 1;
            }
        }
        let kept: Vec<&str> = freq.iter().filter(|(_, &c)| c >= min_count).map(|(t, _)| *t).collect();
        match build_vocab(&seqs, min_count) {
            Ok(v) => {
                prop_assert_eq!(v.len(), kept.len() + 1);
                prop_assert_eq!(v.id(UNK), v.unk_id());
                for (t, &c) in &freq {
                    prop_assert_eq!(v.contains(t), c >= min_count);
                    if c >= min_count {
                        prop_assert_eq!(v.count(v.id(t)), c as u64);
                    } else {
                        prop_assert_eq!(v.id(t), v.unk_id());
                    }
                }
                let ids: BTreeSet<u32> = kept.iter().map(|t| v.id(t)).chain([v.unk_id()]).collect();
                prop_assert_eq!(ids, (0..v.len() as u32).collect::<BTreeSet<_>>());
            }
            Err(_) => prop_assert!(kept.is_empty()),
        }
    }
}

fn toy_table(vocab: usize, dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    EmbeddingTable { dim, vectors: Matrix::uniform(vocab, dim, 0.5, &mut rng) }
}

#[test]
fn identical_sequences_collapse_to_distance_zero() {
    let tokens: Vec<String> = ["def", "f", "x", "+", "y", "x"].iter().map(|s| s.to_string()).collect();
    let seq = |id: &str| RepresentationSequence { method_id: id.into(), kind: ReprKind::Ast, tokens: tokens.clone(), degenerate: false };
    let seqs = [seq("a"), seq("b")];
    let vocab = build_vocab(&seqs, 1).unwrap();
    let (table, _) =
        train_word_embeddings(&[vocab.encode(&tokens)], vocab.len(), &WordTrainConfig { dim: 4, epochs: 2, ..Default::default() })
            .unwrap();
    let model = RaeModel::init(4, 3);
    let ea = encode_method(&seqs[0], &vocab, &table, &model).unwrap();
    let eb = encode_method(&seqs[1], &vocab, &table, &model).unwrap();
    assert_eq!(euclidean(&ea.vector, &eb.vector), 0.0);
    assert_eq!(detect_by_distance(&[ea, eb], 0.0, Execution::Sequential).unwrap().len(), 1);
}

#[test]
fn token_order_changes_the_embedding() {
    let table = toy_table(5, 3, 1);
    let model = RaeModel::init(3, 2);
    let leaves = |ids: &[u32]| -> Vec<&[f64]> { ids.iter().map(|&i| table.vector(i)).collect() };
    let forward = model.encode(&leaves(&[1, 2, 3, 4])).unwrap();
    let reversed = model.encode(&leaves(&[4, 3, 2, 1])).unwrap();
    assert!(euclidean(&forward, &reversed) > 1e-6);
}

#[test]
fn combination_counts_follow_from_the_intersection() {
    // 58 identifier pairs, 123 AST pairs, 35 shared: the union holds 146.
    let ident: Vec<(u8, u8)> = (0..58).map(|i| (0, i + 1)).collect();
    let ast: Vec<(u8, u8)> = (0..35).map(|i| (0, i + 1)).chain((0..88).map(|i| (1, i + 100))).collect();
    let a = pair_set(&ident, DetectorTag::Identifier);
    let b = pair_set(&ast, DetectorTag::Ast);
    assert_eq!((a.len(), b.len()), (58, 123));
    assert_eq!(combine(&a, &b).len(), 146);
}
