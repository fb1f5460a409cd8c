use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use clonekit::detector::{detect_with, DetectorConfig};
use clonekit::embedder::{detect_by_distance, SentenceEmbedding};
use clonekit::extractor::{extract_corpus, ExtractConfig, ReprKind};
use clonekit::synth::{generate, SynthConfig};
use clonekit::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [Execution; 2] = [Execution::Sequential, Execution::Parallel];

fn label(e: Execution) -> &'static str {
    match e {
        Execution::Sequential => "sequential",
        Execution::Parallel => "parallel",
    }
}

fn extraction(c: &mut Criterion) {
    let corpus = generate(&SynthConfig { methods: 2000, ..Default::default() });
    let mut g = c.benchmark_group("extract");
    g.sample_size(10);
    for mode in MODES {
        g.bench_with_input(BenchmarkId::new(label(mode), 2000), &mode, |b, &m| {
            b.iter(|| extract_corpus(&corpus.files, &ExtractConfig::default(), m))
        });
    }
    g.finish();
}

fn overlap(c: &mut Criterion) {
    let mut g = c.benchmark_group("detect");
    g.sample_size(10);
    for n in [1000, 5000] {
        let corpus = generate(&SynthConfig { methods: n, ..Default::default() });
        let bags = extract_corpus(&corpus.files, &ExtractConfig::default(), Execution::Parallel).bags;
        for mode in MODES {
            g.bench_with_input(BenchmarkId::new(label(mode), n), &mode, |b, &m| {
                b.iter(|| detect_with(&bags, &DetectorConfig::default(), m))
            });
        }
    }
    g.finish();
}

fn distances(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let embeddings: Vec<SentenceEmbedding> = (0..2000)
        .map(|i| SentenceEmbedding {
            method_id: format!("m{i:05}"),
            kind: ReprKind::Identifier,
            vector: (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        })
        .collect();
    let mut g = c.benchmark_group("distance");
    g.sample_size(10);
    for mode in MODES {
        g.bench_with_input(BenchmarkId::new(label(mode), 2000), &mode, |b, &m| {
            b.iter(|| detect_by_distance(&embeddings, 1.0, m).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, extraction, overlap, distances);
criterion_main!(benches);
