use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clonekit::detector::{detect_with, DetectorConfig, Theta};
use clonekit::embedder::{calibrate_delta, combine, detect_by_distance, detect_by_distance_grouped, embed_sequences, EmbedConfig};
use clonekit::evaluator::{
    confusion, consensus, filter_candidates, parse_timing_csv, percent_tenths, precision_recall, render_report,
    sample_pairs, type_distribution, CandidatePair, ConfusionMatrix, ConsensusRule, EvaluationRow, GroundTruth,
    LabelRecord, ReportInput, TypeDistribution,
};
use clonekit::extractor::{extract_corpus, ingest_corpus, ExtractConfig, Method, ReprKind, RepresentationSequence, TokenBag};
use clonekit::io::{read_json, read_jsonl, write_json, write_jsonl};
use clonekit::{ClonePair, DetectorTag, Execution};
use serde::{Deserialize, Serialize};

use crate::manifest::RunManifest;
use crate::{DetectArgs, EmbedArgs, EvaluateArgs, ExtractArgs, FilterArgs, OutArgs, ReportArgs, ServeArgs};

pub const METHODS: &str = "methods.jsonl";
pub const BAGS: &str = "bags.jsonl";
pub const DIAGNOSTICS: &str = "diagnostics.jsonl";
pub const CANDIDATES: &str = "candidates.jsonl";
pub const TRUTH: &str = "truth.jsonl";
pub const METRICS: &str = "metrics.json";
pub const DISTRIBUTION: &str = "type-distribution.json";
pub const TIMING: &str = "timing.csv";
pub const REPORT: &str = "report.md";

pub fn repr_file(kind: ReprKind) -> String {
    format!("repr-{kind}.jsonl")
}

pub fn pairs_file(tag: DetectorTag) -> String {
    format!("pairs-{tag}.jsonl")
}

/// Fail with the path of a missing input artifact.
fn require(dir: &Path, name: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    if !path.is_file() {
        bail!("missing input artifact {}", path.display());
    }
    Ok(path)
}

fn read_required<T: serde::de::DeserializeOwned>(dir: &Path, name: &str) -> Result<Vec<T>> {
    let path = require(dir, name)?;
    Ok(read_jsonl(&path)?)
}

/// Create the run directory and record the manifest in it.
pub fn open_run(manifest: &RunManifest, per_manifest: bool) -> Result<PathBuf> {
    let dir = manifest.run_dir(per_manifest);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    manifest.record(&dir)?;
    Ok(dir)
}

fn base_manifest(command: &str, io: &OutArgs, seed: u64) -> RunManifest {
    let mut m = RunManifest::new(command, &io.out, seed);
    m.input = io.input.as_ref().map(|p| p.display().to_string());
    m
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub files: usize,
    pub skipped_files: usize,
    pub loc: u64,
    pub methods: usize,
    pub diagnostics: usize,
}

pub fn extract(args: &ExtractArgs, exec: Execution) -> Result<()> {
    let mut classes = clonekit::extractor::TokenClasses { punctuation: args.punctuation, ..Default::default() };
    for class in &args.exclude {
        match class.as_str() {
            "keywords" => classes.keywords = false,
            "identifiers" => classes.identifiers = false,
            "literals" => classes.literals = false,
            "operators" => classes.operators = false,
            other => bail!("unknown token class {other:?}"),
        }
    }
    let config = ExtractConfig {
        extensions: args.ext.clone(),
        min_lines: args.min_lines,
        token_classes: classes,
        max_sequence_len: args.max_sequence_len,
    };
    let mut manifest = base_manifest("extract", &args.io, args.seed).param("extract", &config);
    manifest.corpus = Some(args.corpus.display().to_string());
    manifest.min_lines = Some(args.min_lines);

    let ingested = ingest_corpus(&args.corpus, &config.extensions)?;
    let ex = extract_corpus(&ingested.files, &config, exec);
    let dir = open_run(&manifest, args.io.per_manifest)?;
    let mut diagnostics = ingested.skipped.clone();
    diagnostics.extend(ex.diagnostics.iter().cloned());
    write_jsonl(&dir.join(METHODS), &ex.methods)?;
    write_jsonl(&dir.join(BAGS), &ex.bags)?;
    write_jsonl(&dir.join(repr_file(ReprKind::Identifier)), &ex.identifier)?;
    write_jsonl(&dir.join(repr_file(ReprKind::Ast)), &ex.ast)?;
    write_jsonl(&dir.join(DIAGNOSTICS), &diagnostics)?;
    let summary = CorpusSummary {
        files: ingested.files.len(),
        skipped_files: ingested.skipped.len(),
        loc: ingested.files.iter().map(|f| f.loc as u64).sum(),
        methods: ex.methods.len(),
        diagnostics: diagnostics.len(),
    };
    write_json(&dir.join("corpus.json"), &summary)?;
    log::info!(
        "{} files, {} LoC, {} methods, {} diagnostics -> {}",
        summary.files,
        summary.loc,
        summary.methods,
        summary.diagnostics,
        dir.display()
    );
    Ok(())
}

pub fn detect(args: &DetectArgs, exec: Execution) -> Result<()> {
    let theta = Theta::new(args.theta)?;
    let mut manifest = base_manifest("detect", &args.io, args.seed);
    manifest.detect_theta = Some(theta.as_f64());
    let bags: Vec<TokenBag> = read_required(&args.io.input_dir(), BAGS)?;
    let det = detect_with(&bags, &DetectorConfig { theta }, exec);
    let dir = open_run(&manifest, args.io.per_manifest)?;
    write_jsonl(&dir.join(pairs_file(DetectorTag::Overlap)), &det.pairs)?;
    write_json(&dir.join("detect-stats.json"), &det.stats)?;
    log::info!(
        "{} pairs at theta {} ({} verified of {} possible comparisons)",
        det.pairs.len(),
        theta.as_f64(),
        det.stats.verified,
        det.stats.brute_force_comparisons
    );
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbedLog {
    pub kind: ReprKind,
    pub vocab_size: usize,
    pub embedded: usize,
    pub delta: f64,
    pub pairs: usize,
    pub word_epoch_losses: Vec<f64>,
    pub rae_epoch_losses: Vec<f64>,
    pub diagnostics: Vec<clonekit::extractor::Diagnostic>,
}

/// Project of a method: the first component of its corpus-relative path.
pub fn project_of(method: &Method) -> String {
    method.file.split('/').next().unwrap_or_default().to_string()
}

pub fn embed(args: &EmbedArgs, exec: Execution) -> Result<()> {
    let config = EmbedConfig {
        dim: args.dim,
        word_epochs: args.word_epochs,
        rae_epochs: args.rae_epochs,
        learning_rate: args.learning_rate,
        min_count: args.min_count,
        seed: args.seed,
        normalize: args.normalize,
        ..Default::default()
    };
    let kinds = match args.repr {
        Some(k) => vec![k],
        None => vec![ReprKind::Identifier, ReprKind::Ast],
    };
    let mut manifest = base_manifest("embed", &args.io, args.seed)
        .param("embed", config)
        .param("repr", &kinds)
        .param("per_project", args.per_project);
    manifest.delta = args.delta;
    if args.delta.is_none() {
        manifest = manifest.param("delta_quantile", args.delta_quantile).param("delta_sample", args.delta_sample);
    }
    let input = args.io.input_dir();
    let inputs: Vec<(ReprKind, Vec<RepresentationSequence>)> =
        kinds.iter().map(|&k| Ok((k, read_required(&input, &repr_file(k))?))).collect::<Result<_>>()?;
    let projects: Option<HashMap<String, String>> = if args.per_project {
        let methods: Vec<Method> = read_required(&input, METHODS)?;
        Some(methods.iter().map(|m| (m.id.clone(), project_of(m))).collect())
    } else {
        None
    };

    let dir = open_run(&manifest, args.io.per_manifest)?;
    let mut per_kind = Vec::new();
    for (kind, seqs) in inputs {
        let outcome = embed_sequences(&seqs, &config, exec).with_context(|| format!("embedding {kind} sequences"))?;
        let delta = match args.delta {
            Some(d) => d,
            None => calibrate_delta(&outcome.embeddings, args.delta_quantile, args.delta_sample, args.seed)?,
        };
        let pairs = match &projects {
            Some(p) => detect_by_distance_grouped(&outcome.embeddings, p, delta, exec)?,
            None => detect_by_distance(&outcome.embeddings, delta, exec)?,
        };
        write_jsonl(&dir.join(format!("embeddings-{kind}.jsonl")), &outcome.embeddings)?;
        write_jsonl(&dir.join(pairs_file(DetectorTag::from(kind))), &pairs)?;
        let log = EmbedLog {
            kind,
            vocab_size: outcome.vocab.len(),
            embedded: outcome.embeddings.len(),
            delta,
            pairs: pairs.len(),
            word_epoch_losses: outcome.word_log.epoch_losses.clone(),
            rae_epoch_losses: outcome.rae_log.epoch_losses.clone(),
            diagnostics: outcome.diagnostics.clone(),
        };
        write_json(&dir.join(format!("train-log-{kind}.json")), &log)?;
        log::info!("{kind}: vocab {}, delta {delta:.6}, {} pairs", log.vocab_size, pairs.len());
        per_kind.push(pairs);
    }
    if let [identifier, ast] = per_kind.as_slice() {
        let combined = combine(identifier, ast);
        log::info!("combination: {} pairs", combined.len());
        write_jsonl(&dir.join(pairs_file(DetectorTag::Combination)), &combined)?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FilterStats {
    pub theta: f64,
    pub candidates: usize,
    pub selected: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

pub fn filter(args: &FilterArgs, exec: Execution) -> Result<()> {
    let theta = Theta::new(args.theta)?;
    let mut manifest = base_manifest("filter", &args.io, args.seed).param("sample", args.sample);
    manifest.filter_theta = Some(theta.as_f64());
    let bags: Vec<TokenBag> = read_required(&args.io.input_dir(), BAGS)?;
    let all = filter_candidates(&bags, theta, exec);
    let (selected, diagnostic) = match args.sample {
        Some(n) => {
            let s = sample_pairs(&all, n, args.seed);
            (s.items, s.diagnostic)
        }
        None => (all.clone(), None),
    };
    if let Some(d) = &diagnostic {
        log::warn!("{d}");
    }
    let dir = open_run(&manifest, args.io.per_manifest)?;
    write_jsonl(&dir.join(CANDIDATES), &selected)?;
    let stats = FilterStats { theta: theta.as_f64(), candidates: all.len(), selected: selected.len(), diagnostic };
    write_json(&dir.join("filter-stats.json"), &stats)?;
    log::info!("{} candidates at theta {}, {} selected", stats.candidates, stats.theta, stats.selected);
    Ok(())
}

fn rule(majority: bool) -> ConsensusRule {
    if majority {
        ConsensusRule::Majority
    } else {
        ConsensusRule::StrictPlurality
    }
}

pub fn serve(args: &ServeArgs) -> Result<()> {
    let input = args.io.input_dir();
    let candidates: Vec<CandidatePair> = read_required(&input, CANDIDATES)?;
    let methods: Vec<Method> = read_required(&input, METHODS)?;
    let manifest = base_manifest("serve", &args.io, args.seed)
        .param("port", args.port)
        .param("host", args.host.to_string())
        .param("second_rater_first", args.second_rater_first)
        .param("majority", args.majority);
    let dir = open_run(&manifest, args.io.per_manifest)?;
    let mut cfg = labelsvc::ServiceConfig::new(&dir);
    cfg.ui_dir = args.ui.clone();
    cfg.second_rater_first = args.second_rater_first;
    cfg.seed = args.seed;
    cfg.rule = rule(args.majority);
    let state = Arc::new(labelsvc::AppState::new(cfg, &candidates, &methods)?);
    let addr = std::net::SocketAddr::new(args.host, args.port);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(labelsvc::serve(state, addr))?;
    Ok(())
}

/// One row of metrics.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub corpus: String,
    pub detector: DetectorTag,
    #[serde(flatten)]
    pub matrix: ConfusionMatrix,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    /// Percentages rounded half-up to one decimal.
    pub precision_percent: Option<f64>,
    pub recall_percent: Option<f64>,
}

impl MetricsRow {
    pub fn new(corpus: &str, detector: DetectorTag, matrix: ConfusionMatrix) -> Self {
        let m = precision_recall(&matrix);
        let pct = |num: u64, den: u64| (den > 0).then(|| percent_tenths(num, den) as f64 / 10.0);
        MetricsRow {
            corpus: corpus.to_string(),
            detector,
            matrix,
            precision: m.precision,
            recall: m.recall,
            precision_percent: pct(matrix.tp, matrix.tp + matrix.fp),
            recall_percent: pct(matrix.tp, matrix.tp + matrix.fn_),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub corpus: String,
    pub distribution: TypeDistribution,
}

/// Input of `evaluate --matrices`.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct MatricesInput {
    #[serde(default)]
    pub evaluations: Vec<MatrixEntry>,
    #[serde(default)]
    pub distributions: Vec<CountsEntry>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct MatrixEntry {
    pub corpus: String,
    pub detector: DetectorTag,
    #[serde(flatten)]
    pub matrix: ConfusionMatrix,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CountsEntry {
    pub corpus: String,
    /// Type1, Type2, Type3, Type4, NotClone.
    pub counts: [u64; 5],
}

#[derive(Debug, Serialize)]
struct ConsensusSummary {
    truth: usize,
    unresolved: usize,
    insufficient: usize,
}

fn load_truth(args: &EvaluateArgs, input: &Path, out: &Path) -> Result<Vec<GroundTruth>> {
    if let Some(path) = &args.truth {
        if !path.is_file() {
            bail!("missing input artifact {}", path.display());
        }
        return Ok(read_jsonl(path)?);
    }
    if input.join(TRUTH).is_file() {
        return Ok(read_jsonl(&input.join(TRUTH))?);
    }
    let labels_path = input.join(labelsvc::store::LABELS_FILE);
    if !labels_path.is_file() {
        bail!("missing input artifact {} (or {})", input.join(TRUTH).display(), labels_path.display());
    }
    let records: Vec<LabelRecord> = read_jsonl(&labels_path)?;
    let outcome = consensus(&records, rule(args.majority));
    write_jsonl(&out.join(TRUTH), &outcome.truth)?;
    let summary = ConsensusSummary {
        truth: outcome.truth.len(),
        unresolved: outcome.unresolved,
        insufficient: outcome.insufficient,
    };
    write_json(&out.join("consensus.json"), &summary)?;
    log::info!(
        "consensus: {} pairs, {} unresolved, {} with fewer than two raters",
        summary.truth,
        summary.unresolved,
        summary.insufficient
    );
    Ok(outcome.truth)
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let mut manifest = base_manifest("evaluate", &args.io, args.seed)
        .param("corpus_name", &args.corpus_name)
        .param("majority", args.majority);
    if let Some(t) = &args.truth {
        manifest = manifest.param("truth", t.display().to_string());
    }
    if let Some(m) = &args.matrices {
        manifest = manifest.param("matrices", m.display().to_string());
    }
    let input = args.io.input_dir();

    if let Some(path) = &args.matrices {
        if !path.is_file() {
            bail!("missing input artifact {}", path.display());
        }
        let parsed: MatricesInput = read_json(path)?;
        if parsed.evaluations.is_empty() && parsed.distributions.is_empty() {
            bail!("{} holds no evaluations or distributions", path.display());
        }
        let dir = open_run(&manifest, args.io.per_manifest)?;
        let rows: Vec<MetricsRow> =
            parsed.evaluations.iter().map(|e| MetricsRow::new(&e.corpus, e.detector, e.matrix)).collect();
        let dists = parsed
            .distributions
            .iter()
            .map(|c| Ok(DistributionRow { corpus: c.corpus.clone(), distribution: TypeDistribution::from_counts(c.counts)? }))
            .collect::<Result<Vec<_>>>()?;
        write_json(&dir.join(METRICS), &rows)?;
        if !dists.is_empty() {
            write_json(&dir.join(DISTRIBUTION), &dists)?;
        }
        log::info!("{} metrics rows, {} distributions", rows.len(), dists.len());
        return Ok(());
    }

    let predictions: Vec<(DetectorTag, PathBuf)> = DetectorTag::ALL
        .iter()
        .map(|&t| (t, input.join(pairs_file(t))))
        .filter(|(_, p)| p.is_file())
        .collect();
    if predictions.is_empty() {
        bail!("missing input artifact {}", input.join(pairs_file(DetectorTag::Overlap)).display());
    }
    let dir = open_run(&manifest, args.io.per_manifest)?;
    let truth = load_truth(args, &input, &dir)?;
    if truth.is_empty() {
        bail!("ground truth is empty; label more pairs or supply --truth");
    }
    let mut rows = Vec::new();
    for (tag, path) in predictions {
        let pairs: Vec<ClonePair> = read_jsonl(&path)?;
        let c = confusion(&pairs, &truth)?;
        write_json(&dir.join(format!("confusion-{tag}.json")), &c)?;
        if c.unlabeled_predictions > 0 {
            log::info!("{tag}: {} predicted pairs have no label and are not scored", c.unlabeled_predictions);
        }
        rows.push(MetricsRow::new(&args.corpus_name, tag, c.matrix));
    }
    write_json(&dir.join(METRICS), &rows)?;
    let dist = DistributionRow { corpus: args.corpus_name.clone(), distribution: type_distribution(&truth)? };
    write_json(&dir.join(DISTRIBUTION), &vec![dist])?;
    for r in &rows {
        log::info!(
            "{}: precision {}, recall {}",
            r.detector,
            r.precision_percent.map_or("n/a".into(), |p| format!("{p:.1}")),
            r.recall_percent.map_or("n/a".into(), |p| format!("{p:.1}"))
        );
    }
    Ok(())
}

pub fn report(args: &ReportArgs) -> Result<()> {
    let manifest = base_manifest("report", &args.io, args.seed);
    let input = args.io.input_dir();
    let metrics = input.join(METRICS);
    let dists = input.join(DISTRIBUTION);
    let timing = input.join(TIMING);
    if !metrics.is_file() && !dists.is_file() && !timing.is_file() {
        bail!(
            "missing input artifact {} (also looked for {} and {})",
            metrics.display(),
            dists.display(),
            timing.display()
        );
    }
    let mut report = ReportInput::default();
    if metrics.is_file() {
        let rows: Vec<MetricsRow> = read_json(&metrics)?;
        report.evaluations = rows
            .into_iter()
            .map(|r| EvaluationRow { corpus: r.corpus, detector: r.detector, matrix: r.matrix })
            .collect();
    }
    if dists.is_file() {
        let rows: Vec<DistributionRow> = read_json(&dists)?;
        report.distributions = rows.into_iter().map(|r| (r.corpus, r.distribution)).collect();
    }
    if timing.is_file() {
        let text = std::fs::read_to_string(&timing).with_context(|| format!("reading {}", timing.display()))?;
        report.timing = parse_timing_csv(&text).map_err(|e| anyhow!("{}: {e}", timing.display()))?;
    }
    let dir = open_run(&manifest, args.io.per_manifest)?;
    let path = dir.join(REPORT);
    std::fs::write(&path, render_report(&report)).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}
