use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{format_ratio, precision_recall, CloneLabel, ConfusionMatrix, TypeDistribution};
use crate::error::{Error, Result};
use crate::pair::DetectorTag;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRun {
    pub corpus: String,
    pub detector: String,
    pub loc: u64,
    pub method_count: u64,
    pub seconds: f64,
}

/// CSV with a header row, sorted by LoC then method count.
pub fn timing_report(runs: &[TimingRun]) -> Result<String> {
    let mut sorted = runs.to_vec();
    sorted.sort_by(|x, y| {
        (x.loc, x.method_count, &x.corpus, &x.detector).cmp(&(y.loc, y.method_count, &y.corpus, &y.detector))
    });
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &sorted {
        w.serialize(r).map_err(|e| Error::Config(format!("timing row: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("timing csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_timing_csv(text: &str) -> Result<Vec<TimingRun>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<Vec<TimingRun>, _>>()
        .map_err(|e| Error::Config(format!("timing csv: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub corpus: String,
    pub detector: DetectorTag,
    pub matrix: ConfusionMatrix,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportInput {
    pub evaluations: Vec<EvaluationRow>,
    pub distributions: Vec<(String, TypeDistribution)>,
    pub timing: Vec<TimingRun>,
}

/// Markdown with a confusion-matrix table, a precision/recall table, a
/// clone-type table and a timing table. Empty sections are omitted.
pub fn render_report(input: &ReportInput) -> String {
    let mut s = String::from("# Clone detection evaluation\n");
    if !input.evaluations.is_empty() {
        s.push_str("\n## Confusion matrices\n\n| Corpus | Detector | TP | FP | FN | TN |\n|---|---|---:|---:|---:|---:|\n");
        for e in &input.evaluations {
            let m = &e.matrix;
            let _ = writeln!(s, "| {} | {} | {} | {} | {} | {} |", e.corpus, e.detector, m.tp, m.fp, m.fn_, m.tn);
        }
        s.push_str("\n## Precision and recall\n\n| Corpus | Detector | Precision (%) | Recall (%) |\n|---|---|---:|---:|\n");
        for e in &input.evaluations {
            let pr = precision_recall(&e.matrix);
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} |",
                e.corpus,
                e.detector,
                format_ratio(pr.precision),
                format_ratio(pr.recall)
            );
        }
    }
    if !input.distributions.is_empty() {
        s.push_str("\n## Clone types\n\n| Corpus |");
        for l in CloneLabel::ALL {
            let _ = write!(s, " {l} |");
        }
        s.push_str(" Total |\n|---|---:|---:|---:|---:|---:|---:|\n");
        for (name, d) in &input.distributions {
            let _ = write!(s, "| {name} |");
            for l in CloneLabel::ALL {
                let _ = write!(s, " {} ({:.1}%) |", d.count(l), d.percent(l));
            }
            let _ = writeln!(s, " {} |", d.total);
        }
    }
    if !input.timing.is_empty() {
        s.push_str("\n## Execution time\n\n| Corpus | Detector | LoC | Methods | Seconds |\n|---|---|---:|---:|---:|\n");
        let mut runs = input.timing.clone();
        runs.sort_by(|x, y| (x.loc, x.method_count).cmp(&(y.loc, y.method_count)));
        for r in &runs {
            let _ = writeln!(s, "| {} | {} | {} | {} | {:.3} |", r.corpus, r.detector, r.loc, r.method_count, r.seconds);
        }
    }
    s
}
