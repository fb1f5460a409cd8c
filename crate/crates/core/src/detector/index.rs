use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{prefix_length, required_overlap, DetectorConfig};
use crate::extractor::TokenBag;
use crate::pair::{canonicalize, ClonePair, DetectorTag};
use crate::par::Execution;

/// Global token order: ascending corpus frequency, ties lexicographic.
#[derive(Debug, Clone, Default)]
pub struct TokenOrder {
    rank: HashMap<String, u32>,
}

impl TokenOrder {
    pub fn from_bags(bags: &[TokenBag]) -> Self {
        let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
        for bag in bags {
            for (t, &c) in &bag.entries {
                *freq.entry(t.as_str()).or_default() += u64::from(c);
            }
        }
        let mut tokens: Vec<(&str, u64)> = freq.into_iter().collect();
        tokens.sort_by(|(ta, fa), (tb, fb)| fa.cmp(fb).then_with(|| ta.cmp(tb)));
        let rank = tokens.into_iter().enumerate().map(|(i, (t, _))| (t.to_string(), i as u32)).collect();
        TokenOrder { rank }
    }

    pub fn rank(&self, token: &str) -> Option<u32> {
        self.rank.get(token).copied()
    }

    pub fn len(&self) -> usize {
        self.rank.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rank.is_empty()
    }
}

/// One token occurrence: the `occurrence`-th copy (0-based) of the token
/// with global rank `rank`. Ordering occurrences by `(rank, occurrence)`
/// turns multiset overlap into set overlap.
type Element = (u32, u32);

#[derive(Debug, Clone)]
struct OrderedBag {
    /// `(rank, frequency)` sorted by rank.
    compact: Vec<(u32, u32)>,
    size: u32,
}

impl OrderedBag {
    fn new(bag: &TokenBag, order: &TokenOrder) -> Self {
        let mut compact: Vec<(u32, u32)> = bag
            .entries
            .iter()
            .map(|(t, &c)| (order.rank(t).expect("order built from these bags"), c))
            .collect();
        compact.sort_unstable();
        OrderedBag { compact, size: bag.size }
    }

    /// First `n` occurrences in global order.
    fn prefix(&self, n: u32) -> impl Iterator<Item = Element> + '_ {
        self.compact
            .iter()
            .flat_map(|&(r, c)| (0..c).map(move |k| (r, k)))
            .take(n as usize)
    }

    fn overlap(&self, other: &OrderedBag) -> u32 {
        let (mut i, mut j, mut acc) = (0, 0, 0);
        while i < self.compact.len() && j < other.compact.len() {
            let (ra, ca) = self.compact[i];
            let (rb, cb) = other.compact[j];
            match ra.cmp(&rb) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += ca.min(cb);
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    /// Position of the bag in size-ascending processing order.
    pub bag: u32,
    pub bag_size: u32,
    /// Position of the occurrence within the bag's ordered token list.
    pub position: u32,
}

/// Inverted index over bag prefixes. Bags are held in `(size, method_id)`
/// order, so every postings list is sorted by bag size.
#[derive(Debug, Clone)]
pub struct PartialIndex {
    order: TokenOrder,
    config: DetectorConfig,
    ids: Vec<String>,
    bags: Vec<OrderedBag>,
    postings: HashMap<Element, Vec<Posting>>,
}

impl PartialIndex {
    pub fn entry_count(&self) -> usize {
        self.postings.values().map(Vec::len).sum()
    }

    pub fn bag_count(&self) -> usize {
        self.bags.len()
    }

    pub fn token_order(&self) -> &TokenOrder {
        &self.order
    }

    /// Postings for the `occurrence`-th copy of `token`.
    pub fn postings(&self, token: &str, occurrence: u32) -> &[Posting] {
        self.order
            .rank(token)
            .and_then(|r| self.postings.get(&(r, occurrence)))
            .map_or(&[], Vec::as_slice)
    }

    /// Method ids in processing order.
    pub fn method_ids(&self) -> &[String] {
        &self.ids
    }
}

/// Sort bags by size, order their tokens globally, and index each prefix.
/// Empty bags are left out.
pub fn build_index(bags: &[TokenBag], config: &DetectorConfig) -> PartialIndex {
    let order = TokenOrder::from_bags(bags);
    let mut sorted: Vec<&TokenBag> = bags.iter().filter(|b| !b.is_empty()).collect();
    sorted.sort_by(|a, b| (a.size, &a.method_id).cmp(&(b.size, &b.method_id)));

    let mut postings: HashMap<Element, Vec<Posting>> = HashMap::new();
    let mut ordered = Vec::with_capacity(sorted.len());
    for (i, bag) in sorted.iter().enumerate() {
        let ob = OrderedBag::new(bag, &order);
        for (pos, elem) in ob.prefix(prefix_length(ob.size, config.theta)).enumerate() {
            postings.entry(elem).or_default().push(Posting {
                bag: i as u32,
                bag_size: ob.size,
                position: pos as u32,
            });
        }
        ordered.push(ob);
    }
    PartialIndex {
        order,
        config: *config,
        ids: sorted.iter().map(|b| b.method_id.clone()).collect(),
        bags: ordered,
        postings,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectStats {
    pub bags: usize,
    pub index_entries: usize,
    /// Candidates that survived every filter and were fully merged.
    pub verified: u64,
    /// `n(n−1)/2`, the comparisons a pairwise scan would make.
    pub brute_force_comparisons: u64,
    pub pairs: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Detection {
    pub pairs: Vec<ClonePair>,
    pub stats: DetectStats,
}

/// Index-pruned detection. Returns exactly the pairs with similarity ≥ θ.
pub fn detect(bags: &[TokenBag], config: &DetectorConfig) -> Detection {
    detect_with(bags, config, Execution::Sequential)
}

/// [`detect`] with the per-query probing loop run under `exec`.
pub fn detect_with(bags: &[TokenBag], config: &DetectorConfig, exec: Execution) -> Detection {
    let index = build_index(bags, config);
    let n = index.bags.len();
    let per_query = exec.map_range(n, |q| probe(&index, q));

    let mut pairs = Vec::new();
    let mut verified = 0u64;
    for (p, v) in per_query {
        pairs.extend(p);
        verified += v;
    }
    canonicalize(&mut pairs);
    let stats = DetectStats {
        bags: n,
        index_entries: index.entry_count(),
        verified,
        brute_force_comparisons: (n as u64) * (n as u64).saturating_sub(1) / 2,
        pairs: pairs.len(),
    };
    Detection { pairs, stats }
}

/// Pairs between bag `q` and bags earlier in processing order.
fn probe(index: &PartialIndex, q: usize) -> (Vec<ClonePair>, u64) {
    let theta = index.config.theta;
    let query = &index.bags[q];
    // Earlier bags are no larger, so max(|q|, |c|) = |q|.
    let needed = required_overlap(query.size, query.size, theta);
    let min_size = needed;

    // Per candidate: matched occurrences so far, or None once pruned.
    let mut seen: HashMap<u32, Option<u32>> = HashMap::new();
    for (i, elem) in query.prefix(prefix_length(query.size, theta)).enumerate() {
        let Some(list) = index.postings.get(&elem) else { continue };
        // Postings are in processing order: restrict to earlier bags that
        // pass the size filter.
        let lo = list.partition_point(|p| p.bag_size < min_size);
        let hi = list.partition_point(|p| (p.bag as usize) < q);
        if lo >= hi {
            continue;
        }
        let rem_q = query.size - i as u32 - 1;
        for p in &list[lo..hi] {
            let state = seen.entry(p.bag).or_insert(Some(0));
            let Some(count) = *state else { continue };
            let rem_c = p.bag_size - p.position - 1;
            if count + 1 + rem_q.min(rem_c) >= needed {
                *state = Some(count + 1);
            } else {
                *state = None;
            }
        }
    }

    let mut out = Vec::new();
    let mut verified = 0u64;
    let mut candidates: Vec<u32> = seen.into_iter().filter_map(|(c, s)| s.map(|_| c)).collect();
    candidates.sort_unstable();
    for c in candidates {
        verified += 1;
        let cand = &index.bags[c as usize];
        let o = query.overlap(cand);
        if o >= needed {
            let score = f64::from(o) / f64::from(query.size);
            out.push(
                ClonePair::new(index.ids[q].clone(), index.ids[c as usize].clone(), score, DetectorTag::Overlap)
                    .with_threshold(theta.as_f64()),
            );
        }
    }
    (out, verified)
}
