//! `bench`: wall time of overlap detection (and optionally the embedding
//! pipeline) per corpus, written as timing.csv sorted by LoC.

use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clonekit::detector::{detect_with, DetectorConfig, Theta};
use clonekit::embedder::{calibrate_delta, combine, detect_by_distance, embed_sequences, EmbedConfig};
use clonekit::evaluator::{timing_report, TimingRun};
use clonekit::extractor::{extract_corpus, ingest_corpus, CorpusExtraction, ExtractConfig, SourceFile};
use clonekit::synth::{generate, SynthConfig};
use clonekit::Execution;

use crate::commands::{open_run, TIMING};
use crate::manifest::RunManifest;
use crate::BenchArgs;

pub const OVERLAP: &str = "overlap";
pub const EMBEDDING: &str = "embedding";

struct Corpus {
    name: String,
    files: Vec<SourceFile>,
}

fn list_corpora(root: &Path, extensions: &[String]) -> Result<Vec<Corpus>> {
    let mut dirs: Vec<_> = std::fs::read_dir(root)
        .with_context(|| format!("missing input artifact {}", root.display()))?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().map(|t| t.is_dir()).unwrap_or(false))
        .map(|e| e.path())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        bail!("{} contains no corpus directories", root.display());
    }
    dirs.into_iter()
        .map(|d| {
            let name = d.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(Corpus { name, files: ingest_corpus(&d, extensions)?.files })
        })
        .collect()
}

fn fastest<T>(repeat: usize, mut f: impl FnMut() -> Result<T>) -> Result<(f64, T)> {
    let mut best = f64::INFINITY;
    let mut last = None;
    for _ in 0..repeat.max(1) {
        let t = Instant::now();
        let out = f()?;
        best = best.min(t.elapsed().as_secs_f64());
        last = Some(out);
    }
    Ok((best, last.expect("at least one run")))
}

/// Identifier and AST embeddings, calibrated distance detection, and their
/// union.
pub fn embedding_pipeline(ex: &CorpusExtraction, config: &EmbedConfig, exec: Execution) -> Result<usize> {
    let mut per_kind = Vec::new();
    for seqs in [&ex.identifier, &ex.ast] {
        let outcome = embed_sequences(seqs, config, exec)?;
        let delta = calibrate_delta(&outcome.embeddings, 0.01, 100_000, config.seed)?;
        per_kind.push(detect_by_distance(&outcome.embeddings, delta, exec)?);
    }
    Ok(combine(&per_kind[0], &per_kind[1]).len())
}

pub fn run(args: &BenchArgs, exec: Execution) -> Result<()> {
    let theta = Theta::new(args.theta)?;
    let extract = ExtractConfig { min_lines: args.min_lines, ..Default::default() };
    let embed = EmbedConfig {
        word_epochs: args.word_epochs,
        rae_epochs: args.rae_epochs,
        seed: args.seed,
        ..Default::default()
    };
    let mut manifest = RunManifest::new("bench", &args.out, args.seed)
        .param("repeat", args.repeat)
        .param("execution", exec);
    manifest.detect_theta = Some(theta.as_f64());
    manifest.min_lines = Some(args.min_lines);
    let corpora = match (&args.corpora, args.synthetic.is_empty()) {
        (Some(root), _) => {
            manifest.corpus = Some(root.display().to_string());
            list_corpora(root, &extract.extensions)?
        }
        (None, false) => {
            manifest = manifest.param("synthetic", &args.synthetic);
            args.synthetic
                .iter()
                .map(|&n| Corpus {
                    name: format!("synthetic-{n}"),
                    files: generate(&SynthConfig { methods: n, seed: args.seed, ..Default::default() }).files,
                })
                .collect()
        }
        (None, true) => bail!("bench needs --corpora DIR or --synthetic N[,N...]"),
    };
    if args.embed {
        manifest = manifest.param("embed", embed).param("embed_max_methods", args.embed_max_methods);
    }
    let dir = open_run(&manifest, false)?;

    let mut runs = Vec::new();
    for corpus in &corpora {
        let loc: u64 = corpus.files.iter().map(|f| f.loc as u64).sum();
        let ex = extract_corpus(&corpus.files, &extract, exec);
        let methods = ex.methods.len() as u64;
        let (secs, det) = fastest(args.repeat, || Ok(detect_with(&ex.bags, &DetectorConfig { theta }, exec)))?;
        log::info!("{}: {loc} LoC, {methods} methods, overlap {secs:.4}s, {} pairs", corpus.name, det.pairs.len());
        runs.push(TimingRun {
            corpus: corpus.name.clone(),
            detector: OVERLAP.into(),
            loc,
            method_count: methods,
            seconds: secs,
        });
        if args.embed && ex.methods.len() <= args.embed_max_methods {
            let (secs, pairs) = fastest(1, || embedding_pipeline(&ex, &embed, exec))?;
            log::info!("{}: embedding {secs:.2}s, {pairs} combined pairs", corpus.name);
            runs.push(TimingRun {
                corpus: corpus.name.clone(),
                detector: EMBEDDING.into(),
                loc,
                method_count: methods,
                seconds: secs,
            });
        }
    }
    let path = dir.join(TIMING);
    std::fs::write(&path, timing_report(&runs)?).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}
