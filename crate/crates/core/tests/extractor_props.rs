use clonekit::detector::similarity;
use clonekit::evaluator::{classify_auto, AutoClass, Type2Mode};
use clonekit::extractor::{
    bag_tokens, extract_methods, extract_representation, normalize, tokenize, Method, ReprKind, SourceFile,
    TokenClasses,
};
use clonekit::mutation::{mutate_type1, mutate_type2};
use clonekit::synth::{generate, SynthConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn corpus_methods(seed: u64) -> Vec<Method> {
    let corpus = generate(&SynthConfig { methods: 16, seed, clone_rate: 0.0, ..Default::default() });
    corpus.files.iter().flat_map(|f| extract_methods(f, 1).methods).collect()
}

/// Re-extract a single mutated method by wrapping it in an object.
fn reparse(name: &str, body: &str) -> Method {
    let src = format!("object Wrap {{\n{body}\n}}\n");
    let found = extract_methods(&SourceFile::new(format!("{name}.scala"), src), 1).methods;
    assert_eq!(found.len(), 1, "mutant should hold exactly one method:\n{body}");
    found.into_iter().next().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normalize_is_idempotent(text in "[ -~\t\n]{0,200}") {
        let once = normalize(&text);
        prop_assert_eq!(normalize(&once), once);
    }

    #[test]
    fn normalize_is_idempotent_on_methods(seed in 0u64..1000) {
        for m in corpus_methods(seed) {
            prop_assert_eq!(normalize(&m.normalized_body), m.normalized_body.clone());
            prop_assert_eq!(normalize(&m.raw_body), m.normalized_body.clone());
        }
    }

    #[test]
    fn type1_edits_leave_bags_and_sequences_unchanged(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let classes = TokenClasses::default();
        for m in corpus_methods(seed).into_iter().take(6) {
            let mutant_src = mutate_type1(&m.raw_body, &mut rng);
            prop_assert_ne!(&mutant_src, &m.raw_body);
            let mutant = reparse("T1", &mutant_src);
            prop_assert_eq!(&mutant.normalized_body, &m.normalized_body);
            prop_assert_eq!(bag_tokens(&mutant.normalized_body, &classes), bag_tokens(&m.normalized_body, &classes));
            prop_assert_eq!(similarity(&tokenize(&m, &classes), &tokenize(&mutant, &classes)).unwrap(), 1.0);
            for kind in [ReprKind::Identifier, ReprKind::Ast] {
                prop_assert_eq!(
                    extract_representation(&m, kind).unwrap().tokens,
                    extract_representation(&mutant, kind).unwrap().tokens
                );
            }
            prop_assert_eq!(classify_auto(&m, &mutant, Type2Mode::Blind), AutoClass::Type1);
        }
    }

    #[test]
    fn auto_type1_implies_full_similarity(seed in 0u64..1000, rename in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let classes = TokenClasses::default();
        let methods = corpus_methods(seed);
        for (i, m) in methods.iter().enumerate().take(6) {
            let other = if rename {
                reparse("T2", &mutate_type2(&m.raw_body, &mut rng))
            } else {
                methods[(i + 1) % methods.len()].clone()
            };
            if classify_auto(m, &other, Type2Mode::Bijective) == AutoClass::Type1 {
                prop_assert_eq!(similarity(&tokenize(m, &classes), &tokenize(&other, &classes)).unwrap(), 1.0);
            }
            if rename {
                prop_assert_ne!(classify_auto(m, &other, Type2Mode::Blind), AutoClass::Unknown);
            }
        }
    }
}
