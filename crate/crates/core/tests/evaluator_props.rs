use std::collections::{BTreeMap, BTreeSet, HashMap};

use clonekit::evaluator::{
    confusion, consensus, percent_tenths, precision_recall, type_distribution, CloneLabel, ConfusionMatrix,
    ConsensusRule, GroundTruth, LabelRecord,
};
use clonekit::{ClonePair, DetectorTag, PairKey};
use proptest::prelude::*;

fn records_strategy() -> impl Strategy<Value = Vec<LabelRecord>> {
    prop::collection::vec((0u8..8, 0u8..5, 0usize..5), 0..60).prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(ts, (pair, rater, label))| LabelRecord {
                pair_id: format!("p{pair}:q{pair}"),
                rater: format!("r{rater}"),
                label: CloneLabel::ALL[label],
                timestamp: ts as u64,
            })
            .collect()
    })
}

/// Final vote per (pair, rater), taken as the record with the highest
/// timestamp; then the label with ≥ 2 votes and strictly more than any other.
fn oracle_truth(records: &[LabelRecord]) -> BTreeMap<String, (CloneLabel, usize)> {
    let mut last: HashMap<(&str, &str), &LabelRecord> = HashMap::new();
    for r in records {
        let e = last.entry((&r.pair_id, &r.rater)).or_insert(r);
        if r.timestamp >= e.timestamp {
            *e = r;
        }
    }
    let mut votes: BTreeMap<&str, BTreeMap<CloneLabel, usize>> = BTreeMap::new();
    for r in last.values() {
        *votes.entry(&r.pair_id).or_default().entry(r.label).or_default() += 1;
    }
    let mut out = BTreeMap::new();
    for (pair, by_label) in votes {
        let mut counts: Vec<(usize, CloneLabel)> = by_label.into_iter().map(|(l, c)| (c, l)).collect();
        counts.sort_by(|a, b| b.0.cmp(&a.0));
        let strictly_ahead = counts.len() == 1 || counts[0].0 > counts[1].0;
        if counts[0].0 >= 2 && strictly_ahead {
            out.insert(pair.to_string(), (counts[0].1, counts[0].0));
        }
    }
    out
}

fn truth_strategy() -> impl Strategy<Value = Vec<GroundTruth>> {
    prop::collection::btree_map(0u16..200, 0usize..5, 1..80).prop_map(|m| {
        m.into_iter()
            .map(|(i, l)| GroundTruth { pair_id: format!("a{i}:b{i}"), label: CloneLabel::ALL[l], supporting_raters: 2 })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn consensus_is_strict_plurality_with_two_supporters(records in records_strategy()) {
        let got = consensus(&records, ConsensusRule::StrictPlurality);
        let want = oracle_truth(&records);
        let got_map: BTreeMap<String, (CloneLabel, usize)> =
            got.truth.iter().map(|t| (t.pair_id.clone(), (t.label, t.supporting_raters))).collect();
        prop_assert_eq!(&got_map, &want);
        let labeled: BTreeSet<&str> = records.iter().map(|r| r.pair_id.as_str()).collect();
        prop_assert_eq!(got.truth.len() + got.unresolved + got.insufficient, labeled.len());
        prop_assert!(got.truth.windows(2).all(|w| w[0].pair_id < w[1].pair_id));
    }

    #[test]
    fn majority_is_stricter_than_plurality(records in records_strategy()) {
        let plural: BTreeSet<String> =
            consensus(&records, ConsensusRule::StrictPlurality).truth.into_iter().map(|t| t.pair_id).collect();
        let major = consensus(&records, ConsensusRule::Majority);
        for t in &major.truth {
            prop_assert!(plural.contains(&t.pair_id));
            prop_assert!(t.supporting_raters >= 2);
        }
    }

    #[test]
    fn confusion_conserves_labeled_pairs(truth in truth_strategy(), picks in prop::collection::vec(any::<bool>(), 80),
                                        extra in 0usize..10) {
        let mut predicted: Vec<ClonePair> = truth
            .iter()
            .zip(&picks)
            .filter(|(_, &p)| p)
            .map(|(t, _)| {
                let k = PairKey::parse_id(&t.pair_id).unwrap();
                ClonePair::new(k.a, k.b, 1.0, DetectorTag::Overlap)
            })
            .collect();
        for i in 0..extra {
            predicted.push(ClonePair::new(format!("x{i}"), format!("y{i}"), 1.0, DetectorTag::Overlap));
        }
        let c = confusion(&predicted, &truth).unwrap();
        let m = c.matrix;
        prop_assert_eq!(m.total(), truth.len() as u64);
        prop_assert_eq!(c.unlabeled_predictions, extra as u64);
        let positives = truth.iter().filter(|t| t.label.is_clone()).count() as u64;
        prop_assert_eq!(m.tp + m.fn_, positives);
        prop_assert_eq!(m.tp + m.fp, (predicted.len() - extra) as u64);
        let pr = precision_recall(&m);
        for v in [pr.precision, pr.recall].into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert_eq!(pr.precision.is_none(), m.tp + m.fp == 0);
        prop_assert_eq!(pr.recall.is_none(), positives == 0);
    }

    #[test]
    fn metrics_bounded_for_any_matrix(tp in 0u64..10_000, fp in 0u64..10_000, fn_ in 0u64..10_000, tn in 0u64..10_000) {
        let pr = precision_recall(&ConfusionMatrix::new(tp, fp, fn_, tn));
        for v in [pr.precision, pr.recall].into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn percent_rounds_half_up(num in 0u64..100_000, extra in 1u64..100_000) {
        let den = num + extra;
        let scaled = 1000 * num;
        let (q, r) = (scaled / den, scaled % den);
        let want = if 2 * r >= den { q + 1 } else { q };
        prop_assert_eq!(percent_tenths(num, den), want);
    }

    #[test]
    fn distribution_counts_sum_to_total(truth in truth_strategy()) {
        let d = type_distribution(&truth).unwrap();
        prop_assert_eq!(d.total, truth.len() as u64);
        prop_assert_eq!(d.shares.iter().map(|s| s.count).sum::<u64>(), d.total);
        for s in &d.shares {
            prop_assert_eq!(s.count, truth.iter().filter(|t| t.label == s.label).count() as u64);
        }
    }
}
