use std::fmt;

use serde::{Deserialize, Serialize};

/// Which detector produced a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorTag {
    Overlap,
    Identifier,
    Ast,
    Combination,
}

impl DetectorTag {
    pub const ALL: [DetectorTag; 4] =
        [DetectorTag::Overlap, DetectorTag::Identifier, DetectorTag::Ast, DetectorTag::Combination];

    pub fn as_str(self) -> &'static str {
        match self {
            DetectorTag::Overlap => "overlap",
            DetectorTag::Identifier => "identifier",
            DetectorTag::Ast => "ast",
            DetectorTag::Combination => "combination",
        }
    }

    /// Overlap scores are similarities in [0,1]; the rest are distances.
    pub fn is_similarity(self) -> bool {
        self == DetectorTag::Overlap
    }
}

impl fmt::Display for DetectorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DetectorTag {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        DetectorTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| crate::Error::Config(format!("unknown detector {s:?}")))
    }
}

/// Unordered pair of method ids, stored with `a < b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PairKey {
    pub a: String,
    pub b: String,
}

impl PairKey {
    /// # Panics
    /// If both ids are equal.
    pub fn new(x: impl Into<String>, y: impl Into<String>) -> Self {
        let (x, y) = (x.into(), y.into());
        assert_ne!(x, y, "a pair needs two distinct methods");
        if x < y {
            PairKey { a: x, b: y }
        } else {
            PairKey { a: y, b: x }
        }
    }

    /// Text form used as the pair id in label files and the HTTP API.
    pub fn id(&self) -> String {
        format!("{}:{}", self.a, self.b)
    }

    pub fn parse_id(id: &str) -> Option<Self> {
        let (a, b) = id.split_once(':')?;
        (!a.is_empty() && !b.is_empty() && a != b).then(|| PairKey::new(a, b))
    }
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.a, self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClonePair {
    pub a: String,
    pub b: String,
    /// Similarity in [0,1] for the overlap detector, euclidean distance
    /// otherwise.
    pub score: f64,
    pub detector: DetectorTag,
    /// The threshold the pair was reported under (θ or δ).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl ClonePair {
    pub fn new(x: impl Into<String>, y: impl Into<String>, score: f64, detector: DetectorTag) -> Self {
        let key = PairKey::new(x, y);
        ClonePair { a: key.a, b: key.b, score, detector, threshold: None }
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = Some(threshold);
        self
    }

    pub fn key(&self) -> PairKey {
        PairKey { a: self.a.clone(), b: self.b.clone() }
    }
}

/// Sort by key and drop duplicate keys, keeping the first occurrence.
pub fn canonicalize(pairs: &mut Vec<ClonePair>) {
    pairs.sort_by(|x, y| (&x.a, &x.b).cmp(&(&y.a, &y.b)));
    pairs.dedup_by(|x, y| x.a == y.a && x.b == y.b);
}
