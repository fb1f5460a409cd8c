use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractor::RepresentationSequence;

pub const UNK: &str = "<unk>";

/// Token ids are dense: `0` is the unknown token, then tokens by descending
/// corpus frequency, ties lexicographic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    tokens: Vec<String>,
    counts: Vec<u64>,
    #[serde(skip)]
    ids: HashMap<String, u32>,
}

impl Vocab {
    pub fn build(sequences: &[RepresentationSequence], min_count: usize) -> Result<Self> {
        let mut freq: BTreeMap<&str, u64> = BTreeMap::new();
        for seq in sequences {
            for t in &seq.tokens {
                *freq.entry(t.as_str()).or_default() += 1;
            }
        }
        let unk_count: u64 = freq.values().filter(|&&c| c < min_count as u64).sum();
        let mut kept: Vec<(&str, u64)> = freq.into_iter().filter(|&(_, c)| c >= min_count as u64).collect();
        if kept.is_empty() {
            return Err(Error::DegenerateVocab { min_count });
        }
        kept.sort_by(|(ta, ca), (tb, cb)| cb.cmp(ca).then_with(|| ta.cmp(tb)));
        let mut tokens = vec![UNK.to_string()];
        let mut counts = vec![unk_count];
        for (t, c) in kept {
            tokens.push(t.to_string());
            counts.push(c);
        }
        Ok(Vocab::from_parts(tokens, counts))
    }

    fn from_parts(tokens: Vec<String>, counts: Vec<u64>) -> Self {
        let ids = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i as u32)).collect();
        Vocab { tokens, counts, ids }
    }

    /// Rebuild the lookup table after deserialisation.
    pub fn reindex(self) -> Self {
        Vocab::from_parts(self.tokens, self.counts)
    }

    pub fn unk_id(&self) -> u32 {
        0
    }

    /// Size including the unknown token.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 1
    }

    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(0)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.ids.get(token).is_some_and(|&i| i != 0)
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::ReprKind;

    fn seq(tokens: &[&str]) -> RepresentationSequence {
        RepresentationSequence {
            method_id: "m".into(),
            kind: ReprKind::Identifier,
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            degenerate: tokens.is_empty(),
        }
    }

    #[test]
    fn min_count_one_and_two() {
        let v = Vocab::build(&[seq(&["a", "a", "b"])], 1).unwrap();
        assert_eq!(v.len(), 3);
        assert!(v.contains("a") && v.contains("b"));
        assert_eq!(v.id("a"), 1);
        assert_eq!(v.id("zzz"), v.unk_id());

        let v = Vocab::build(&[seq(&["a", "a", "b"])], 2).unwrap();
        assert_eq!(v.len(), 2);
        assert!(v.contains("a"));
        assert!(!v.contains("b"));
        assert_eq!(v.id("b"), v.unk_id());
        assert_eq!(v.count(v.unk_id()), 1);
    }

    #[test]
    fn degenerate() {
        assert!(matches!(Vocab::build(&[seq(&["a", "b"])], 2), Err(Error::DegenerateVocab { min_count: 2 })));
    }

    #[test]
    fn serde_roundtrip_reindexes() {
        let v = Vocab::build(&[seq(&["x", "y", "y"])], 1).unwrap();
        let back: Vocab = serde_json::from_str::<Vocab>(&serde_json::to_string(&v).unwrap()).unwrap().reindex();
        assert_eq!(back.id("y"), v.id("y"));
    }
}
