use std::collections::{BTreeSet, HashMap};

use clonekit::detector::{brute_force_detect, detect, detect_with, similarity, DetectorConfig, Theta};
use clonekit::extractor::TokenBag;
use clonekit::{Execution, PairKey};
use proptest::prelude::*;

fn bags_strategy(max_bags: usize) -> impl Strategy<Value = Vec<TokenBag>> {
    let bag = prop::collection::vec((0u8..12, 1u32..4), 1..10);
    prop::collection::vec(bag, 0..max_bags).prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(i, entries)| {
                let mut counts: HashMap<String, u32> = HashMap::new();
                for (t, c) in entries {
                    *counts.entry(format!("t{t}")).or_default() += c;
                }
                TokenBag::from_counts(format!("m{i:03}"), counts)
            })
            .collect()
    })
}

fn theta_strategy() -> impl Strategy<Value = Theta> {
    (1u32..=100).prop_map(|p| Theta::from_percent(p).unwrap())
}

/// Expand a bag to a sorted token list and intersect by walking both lists.
fn oracle_similarity(a: &TokenBag, b: &TokenBag) -> f64 {
    fn expand(bag: &TokenBag) -> Vec<&str> {
        let mut v: Vec<&str> =
            bag.entries.iter().flat_map(|(t, &c)| std::iter::repeat(t.as_str()).take(c as usize)).collect();
        v.sort_unstable();
        v
    }
    let (x, y) = (expand(a), expand(b));
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < x.len() && j < y.len() {
        match x[i].cmp(y[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    common as f64 / x.len().max(y.len()) as f64
}

fn keys(pairs: &[clonekit::ClonePair]) -> BTreeSet<PairKey> {
    pairs.iter().map(|p| p.key()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn index_detection_equals_brute_force(bags in bags_strategy(40), theta in theta_strategy()) {
        let cfg = DetectorConfig { theta };
        let fast = detect(&bags, &cfg).pairs;
        let slow = brute_force_detect(&bags, &cfg);
        prop_assert_eq!(&fast, &slow);
        let par = detect_with(&bags, &cfg, Execution::Parallel).pairs;
        prop_assert_eq!(fast, par);
    }

    #[test]
    fn detection_matches_independent_similarity(bags in bags_strategy(25), pct in 1u32..=100) {
        let theta = Theta::from_percent(pct).unwrap();
        let got = keys(&detect(&bags, &DetectorConfig { theta }).pairs);
        let mut want = BTreeSet::new();
        for i in 0..bags.len() {
            for j in i + 1..bags.len() {
                // Compare in integer percent to avoid float edge effects at the threshold.
                let s = oracle_similarity(&bags[i], &bags[j]);
                let num: u64 = (s * (bags[i].size.max(bags[j].size)) as f64).round() as u64;
                let den = u64::from(bags[i].size.max(bags[j].size));
                if 100 * num >= u64::from(pct) * den {
                    want.insert(PairKey::new(bags[i].method_id.clone(), bags[j].method_id.clone()));
                }
            }
        }
        prop_assert_eq!(got, want);
    }

    #[test]
    fn raising_theta_never_adds_pairs(bags in bags_strategy(30), a in 1u32..=100, b in 1u32..=100) {
        let (lo, hi) = (a.min(b), a.max(b));
        let loose = keys(&detect(&bags, &DetectorConfig { theta: Theta::from_percent(lo).unwrap() }).pairs);
        let strict = keys(&detect(&bags, &DetectorConfig { theta: Theta::from_percent(hi).unwrap() }).pairs);
        prop_assert!(strict.is_subset(&loose));
    }

    #[test]
    fn similarity_is_symmetric_and_bounded(bags in bags_strategy(6)) {
        for a in &bags {
            prop_assert_eq!(similarity(a, a).unwrap(), 1.0);
            for b in &bags {
                let s = similarity(a, b).unwrap();
                prop_assert!((0.0..=1.0).contains(&s));
                prop_assert_eq!(s, similarity(b, a).unwrap());
                prop_assert!((s - oracle_similarity(a, b)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scores_reported_meet_theta(bags in bags_strategy(30), theta in theta_strategy()) {
        for p in detect(&bags, &DetectorConfig { theta }).pairs {
            prop_assert!(p.a < p.b);
            prop_assert!(p.score + 1e-12 >= theta.as_f64());
        }
    }
}
