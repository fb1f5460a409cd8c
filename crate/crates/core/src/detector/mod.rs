//! Token-bag overlap detection.
//!
//! Two bags `A`, `B` are clones at threshold θ when
//!
//! ```text
//! overlap(A, B)    = Σ_t min(A[t], B[t])
//! similarity(A, B) = overlap(A, B) / max(|A|, |B|)   ≥ θ
//! ```
//!
//! which, with integer sizes, is `overlap ≥ required_overlap = ⌈θ·max(|A|,|B|)⌉`.
//! θ is held in basis points so the ceiling is exact integer arithmetic.
//!
//! Candidate pruning orders every bag's token occurrences by a global order
//! (ascending corpus frequency, ties lexicographic) and indexes only the first
//! `prefix_length(|A|) = |A| − ⌈θ·|A|⌉ + 1` occurrences. Any pair meeting the
//! required overlap must share an occurrence inside both prefixes. While
//! probing, a candidate is dropped as soon as
//!
//! ```text
//! seen + min(remaining_query, remaining_candidate) < required_overlap
//! ```
//!
//! and survivors are verified by a full merge.

mod index;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractor::TokenBag;
use crate::pair::{canonicalize, ClonePair, DetectorTag};
use crate::par::Execution;

pub use index::{build_index, detect, detect_with, Detection, DetectStats, PartialIndex, Posting, TokenOrder};

const THETA_SCALE: u64 = 10_000;

/// Similarity threshold in (0, 1], stored in basis points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Theta(u32);

impl Theta {
    pub const FILTER: Theta = Theta(7_000);
    pub const DETECT: Theta = Theta(9_000);

    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value <= 0.0 || value > 1.0 {
            return Err(Error::Config(format!("threshold {value} is outside (0, 1]")));
        }
        let bp = (value * THETA_SCALE as f64).round() as u32;
        if bp == 0 {
            return Err(Error::Config(format!("threshold {value} rounds to zero")));
        }
        Ok(Theta(bp))
    }

    pub fn from_percent(percent: u32) -> Result<Self> {
        Theta::new(f64::from(percent) / 100.0)
    }

    pub fn basis_points(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / THETA_SCALE as f64
    }
}

impl fmt::Display for Theta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

impl Serialize for Theta {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Theta {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Theta::new(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub theta: Theta,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig { theta: Theta::DETECT }
    }
}

/// Multiset intersection size.
pub fn overlap(a: &TokenBag, b: &TokenBag) -> u32 {
    let (small, large) = if a.entries.len() <= b.entries.len() { (a, b) } else { (b, a) };
    small.entries.iter().map(|(t, &fa)| fa.min(large.freq(t))).sum()
}

pub fn similarity(a: &TokenBag, b: &TokenBag) -> Result<f64> {
    for bag in [a, b] {
        if bag.is_empty() {
            return Err(Error::EmptyBag(bag.method_id.clone()));
        }
    }
    Ok(f64::from(overlap(a, b)) / f64::from(a.size.max(b.size)))
}

/// `⌈θ · max(size_a, size_b)⌉`.
pub fn required_overlap(size_a: u32, size_b: u32, theta: Theta) -> u32 {
    let m = u64::from(size_a.max(size_b));
    (u64::from(theta.0) * m).div_ceil(THETA_SCALE) as u32
}

/// `size − ⌈θ·size⌉ + 1`.
pub fn prefix_length(size: u32, theta: Theta) -> u32 {
    size - required_overlap(size, size, theta) + 1
}

/// True when the pair meets θ.
pub fn is_clone(a: &TokenBag, b: &TokenBag, theta: Theta) -> bool {
    !a.is_empty() && !b.is_empty() && overlap(a, b) >= required_overlap(a.size, b.size, theta)
}

/// Every pair compared directly. Quadratic; the correctness oracle for
/// [`detect`].
pub fn brute_force_detect(bags: &[TokenBag], config: &DetectorConfig) -> Vec<ClonePair> {
    let mut out = Vec::new();
    for (i, a) in bags.iter().enumerate() {
        if a.is_empty() {
            continue;
        }
        for b in &bags[i + 1..] {
            if b.is_empty() {
                continue;
            }
            let o = overlap(a, b);
            if o >= required_overlap(a.size, b.size, config.theta) {
                let score = f64::from(o) / f64::from(a.size.max(b.size));
                out.push(
                    ClonePair::new(a.method_id.clone(), b.method_id.clone(), score, DetectorTag::Overlap)
                        .with_threshold(config.theta.as_f64()),
                );
            }
        }
    }
    canonicalize(&mut out);
    out
}

/// Convenience wrapper: pairs only, parallel when available.
pub fn detect_pairs(bags: &[TokenBag], config: &DetectorConfig) -> Vec<ClonePair> {
    detect_with(bags, config, Execution::Parallel).pairs
}
