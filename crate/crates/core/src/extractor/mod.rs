//! Corpus ingestion, method extraction, normalization, token bags, and the
//! Identifier / AST representation sequences.
//!
//! Methods are named `def` definitions, brace- or expression-bodied,
//! including nested ones. Anonymous functions are not methods. The
//! normalized body is the comment-free token stream joined by single
//! spaces, so layout and comment edits never change it.

mod ast;
pub mod lexer;
mod syntax;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::par::Execution;
use lexer::{Token, TokenKind};

pub use ast::{parse_method, AstNode};

pub const DEFAULT_MIN_LINES: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    /// Corpus-relative path with `/` separators.
    pub path: String,
    pub content: String,
    /// Non-empty, non-comment lines.
    pub loc: usize,
}

impl SourceFile {
    pub fn new(path: impl Into<String>, content: impl Into<String>) -> Self {
        let content = content.into();
        let loc = lexer::effective_lines(&lexer::lex(&content).tokens);
        SourceFile { path: path.into(), content, loc }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Method {
    pub id: String,
    pub file: String,
    pub name: String,
    pub start_line: usize,
    pub end_line: usize,
    pub effective_lines: usize,
    pub normalized_body: String,
    /// Source slice as written, comments included. This is what human
    /// raters see.
    pub raw_body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBag {
    pub method_id: String,
    pub size: u32,
    pub entries: BTreeMap<String, u32>,
}

impl TokenBag {
    pub fn from_tokens<S: AsRef<str>>(method_id: impl Into<String>, tokens: &[S]) -> Self {
        let mut entries = BTreeMap::new();
        for t in tokens {
            *entries.entry(t.as_ref().to_string()).or_insert(0u32) += 1;
        }
        TokenBag { method_id: method_id.into(), size: tokens.len() as u32, entries }
    }

    pub fn from_counts<S: Into<String>>(
        method_id: impl Into<String>,
        counts: impl IntoIterator<Item = (S, u32)>,
    ) -> Self {
        let mut entries = BTreeMap::new();
        for (t, c) in counts {
            if c > 0 {
                *entries.entry(t.into()).or_insert(0) += c;
            }
        }
        let size = entries.values().sum();
        TokenBag { method_id: method_id.into(), size, entries }
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn freq(&self, token: &str) -> u32 {
        self.entries.get(token).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReprKind {
    Identifier,
    Ast,
}

impl ReprKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReprKind::Identifier => "identifier",
            ReprKind::Ast => "ast",
        }
    }
}

impl std::str::FromStr for ReprKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identifier" => Ok(ReprKind::Identifier),
            "ast" => Ok(ReprKind::Ast),
            other => Err(Error::Config(format!("unknown representation {other:?}"))),
        }
    }
}

impl std::fmt::Display for ReprKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepresentationSequence {
    pub method_id: String,
    pub kind: ReprKind,
    pub tokens: Vec<String>,
    /// Set when the sequence is empty (e.g. a method with no identifiers).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate: bool,
}

/// Which lexical classes enter a token bag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenClasses {
    pub keywords: bool,
    pub identifiers: bool,
    pub literals: bool,
    pub operators: bool,
    pub punctuation: bool,
}

impl Default for TokenClasses {
    fn default() -> Self {
        TokenClasses {
            keywords: true,
            identifiers: true,
            literals: true,
            operators: true,
            punctuation: false,
        }
    }
}

impl TokenClasses {
    fn admits(&self, kind: TokenKind) -> bool {
        match kind {
            TokenKind::Keyword => self.keywords,
            TokenKind::Identifier => self.identifiers,
            TokenKind::Literal => self.literals,
            TokenKind::Operator | TokenKind::Unknown => self.operators,
            TokenKind::Punct => self.punctuation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractConfig {
    pub extensions: Vec<String>,
    pub min_lines: usize,
    pub token_classes: TokenClasses,
    /// Representation sequences longer than this are truncated.
    pub max_sequence_len: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig {
            extensions: vec!["scala".into()],
            min_lines: DEFAULT_MIN_LINES,
            token_classes: TokenClasses::default(),
            max_sequence_len: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub path: String,
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}: {}", self.path, self.line, self.message)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub files: Vec<SourceFile>,
    /// Files that were found but could not be decoded.
    pub skipped: Vec<Diagnostic>,
}

/// Walk `root` and load every file whose extension is in `extensions`,
/// sorted by corpus-relative path.
pub fn ingest_corpus(root: &Path, extensions: &[String]) -> Result<Ingested> {
    std::fs::read_dir(root).map_err(|source| Error::Corpus { path: root.to_path_buf(), source })?;

    let mut paths = Vec::new();
    for entry in WalkDir::new(root).follow_links(false) {
        let entry = match entry {
            Ok(e) => e,
            Err(e) if e.depth() == 0 => {
                return Err(Error::Corpus {
                    path: root.to_path_buf(),
                    source: e.into_io_error().unwrap_or_else(|| std::io::Error::other("walk failed")),
                })
            }
            Err(e) => {
                log::warn!("skipping unreadable entry: {e}");
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let matches = entry
            .path()
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| extensions.iter().any(|want| want.trim_start_matches('.') == e));
        if matches {
            paths.push(entry.into_path());
        }
    }

    let mut out = Ingested::default();
    for path in paths {
        let rel = relative_path(root, &path);
        match std::fs::read(&path) {
            Ok(bytes) => match String::from_utf8(bytes) {
                Ok(content) => out.files.push(SourceFile::new(rel, content)),
                Err(_) => out.skipped.push(Diagnostic {
                    path: rel,
                    line: 0,
                    message: "not valid UTF-8; skipped".into(),
                }),
            },
            Err(e) => out.skipped.push(Diagnostic { path: rel, line: 0, message: format!("unreadable: {e}") }),
        }
    }
    for d in &out.skipped {
        log::warn!("{d}");
    }
    out.files.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

fn relative_path(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Comment-free token stream joined by single spaces.
pub fn normalize(text: &str) -> String {
    join_tokens(&lexer::lex(text).tokens)
}

fn join_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(separator(&tokens[i - 1], t));
        }
        out.push_str(&t.text);
    }
    out
}

/// A single space, unless a malformed quoted token would swallow it on
/// re-lexing; then a line break, which ends every single-line quoted form.
fn separator(prev: &Token, next: &Token) -> char {
    let quoted = prev.kind == TokenKind::Unknown || prev.text.contains(['`', '"', '\'']);
    if !quoted {
        return ' ';
    }
    let joined = format!("{} {}", prev.text, next.text);
    let relexed = lexer::lex(&joined).tokens;
    if relexed.len() == 2 && relexed[0].text == prev.text && relexed[1].text == next.text {
        ' '
    } else {
        '\n'
    }
}

/// Stable id for a method: a content address of its location and name.
pub fn method_id(path: &str, start_line: usize, name: &str) -> String {
    let mut h = Sha256::new();
    h.update(path.as_bytes());
    h.update([0]);
    h.update(start_line.to_string().as_bytes());
    h.update([0]);
    h.update(name.as_bytes());
    let digest = h.finalize();
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Default)]
pub struct MethodExtraction {
    pub methods: Vec<Method>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Extract every named method of `file` with at least `min_lines` effective
/// lines. Unbalanced brackets stop extraction at the first imbalance.
pub fn extract_methods(file: &SourceFile, min_lines: usize) -> MethodExtraction {
    let min_lines = min_lines.max(1);
    let lexed = lexer::lex(&file.content);
    let tokens = &lexed.tokens;
    let mut out = MethodExtraction::default();
    for d in &lexed.diagnostics {
        out.diagnostics.push(Diagnostic { path: file.path.clone(), line: d.line, message: d.message.clone() });
    }

    let brackets = syntax::match_brackets(tokens);
    if let Some(im) = &brackets.imbalance {
        out.diagnostics.push(Diagnostic {
            path: file.path.clone(),
            line: im.line,
            message: format!("unbalanced delimiters ({}); methods after this point are not extracted", im.message),
        });
    }

    let mut seen: HashMap<(usize, String), usize> = HashMap::new();
    for i in 0..brackets.cutoff {
        if !tokens[i].is_keyword("def") {
            continue;
        }
        let Some(span) = method_span(tokens, &brackets, i) else {
            continue;
        };
        let body = &tokens[span.start..=span.end];
        let effective = lexer::effective_lines(body);
        if effective < min_lines {
            continue;
        }
        let name = tokens[i + 1].text.clone();
        let start_line = tokens[i].line;
        let n = seen.entry((start_line, name.clone())).or_insert(0);
        let id_name = if *n == 0 { name.clone() } else { format!("{name}#{n}") };
        *n += 1;
        out.methods.push(Method {
            id: method_id(&file.path, start_line, &id_name),
            file: file.path.clone(),
            name,
            start_line,
            end_line: tokens[span.end].end_line,
            effective_lines: effective,
            normalized_body: join_tokens(body),
            raw_body: file.content[tokens[span.start].start..tokens[span.end].end].to_string(),
        });
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct Span {
    start: usize,
    end: usize,
}

/// Token span of the definition whose `def` keyword is at `def_at`, or None
/// for abstract declarations and definitions running into an imbalance.
fn method_span(tokens: &[Token], brackets: &syntax::Brackets, def_at: usize) -> Option<Span> {
    let limit = brackets.cutoff;
    let name = tokens.get(def_at + 1).filter(|_| def_at + 1 < limit)?;
    let named = matches!(name.kind, TokenKind::Identifier | TokenKind::Operator) || name.is_keyword("this");
    if !named {
        return None;
    }

    // Signature: type params, parameter clauses, return type.
    let mut j = def_at + 2;
    let body_start = loop {
        let tok = tokens.get(j).filter(|_| j < limit)?;
        if syntax::is_open(tok) {
            if tok.is("{") {
                // Procedure syntax: `def f(x: Int) { ... }`.
                let close = brackets.partner[j]?;
                return Some(Span { start: def_at, end: close });
            }
            j = brackets.partner[j]? + 1;
            continue;
        }
        if tok.kind == TokenKind::Operator && tok.is("=") {
            break j + 1;
        }
        if syntax::is_close(tok) || tok.is(";") {
            return None;
        }
        if tok.nl_before && (syntax::starts_definition(tok) || tok.is("@")) {
            return None;
        }
        j += 1;
    };

    let end = expression_end(tokens, brackets, body_start, limit)?;
    Some(Span { start: def_at, end })
}

/// Index of the last token of the expression starting at `start`.
fn expression_end(tokens: &[Token], brackets: &syntax::Brackets, start: usize, limit: usize) -> Option<usize> {
    if start >= limit {
        return None;
    }
    let mut k = start;
    let mut last: Option<usize> = None;
    // Set after `if (..)`, `while (..)`, `for (..)`: the body may follow on
    // the next line.
    let mut awaiting_body = false;
    while k < limit {
        let tok = &tokens[k];
        if let Some(prev) = last {
            if syntax::is_close(tok) || tok.is(";") {
                break;
            }
            if !awaiting_body && syntax::newline_terminates(&tokens[prev], tok) {
                break;
            }
        } else if syntax::is_close(tok) || tok.is(";") {
            return None;
        }
        awaiting_body = false;
        if syntax::is_open(tok) {
            let close = brackets.partner[k]?;
            let header = k > 0
                && tok.is("(")
                && ["if", "while", "for"].iter().any(|kw| tokens[k - 1].is_keyword(kw));
            let for_braces = k > 0 && tok.is("{") && tokens[k - 1].is_keyword("for");
            last = Some(close);
            k = close + 1;
            awaiting_body = header || for_braces;
            continue;
        }
        last = Some(k);
        k += 1;
    }
    if k >= limit && limit < tokens.len() {
        // Ran into the imbalance.
        return None;
    }
    last
}

/// Token bag over the normalized body, filtered by token class.
pub fn tokenize(method: &Method, classes: &TokenClasses) -> TokenBag {
    let stream = bag_tokens(&method.normalized_body, classes);
    TokenBag::from_tokens(method.id.clone(), &stream)
}

/// The filtered token stream a bag is built from.
pub fn bag_tokens(normalized_body: &str, classes: &TokenClasses) -> Vec<String> {
    let lexed = lexer::lex(normalized_body);
    for d in &lexed.diagnostics {
        log::debug!("line {}: {}", d.line, d.message);
    }
    lexed.tokens.into_iter().filter(|t| classes.admits(t.kind)).map(|t| t.text).collect()
}

/// Identifier or AST sequence for a method. Identifier extraction always
/// succeeds; AST extraction fails if the method does not parse.
pub fn extract_representation(method: &Method, kind: ReprKind) -> Result<RepresentationSequence> {
    let tokens = match kind {
        ReprKind::Identifier => lexer::lex(&method.normalized_body)
            .tokens
            .into_iter()
            .filter(|t| t.kind == TokenKind::Identifier)
            .map(|t| t.text)
            .collect(),
        ReprKind::Ast => {
            let tree = parse_method(&method.normalized_body).map_err(|e| Error::Parse {
                method: method.id.clone(),
                line: method.start_line,
                message: e.to_string(),
            })?;
            tree.preorder_labels()
        }
    };
    let degenerate = tokens.is_empty();
    Ok(RepresentationSequence { method_id: method.id.clone(), kind, tokens, degenerate })
}

/// Output of [`extract_corpus`], merged in `(file, start_line)` order.
#[derive(Debug, Clone, Default)]
pub struct CorpusExtraction {
    pub methods: Vec<Method>,
    pub bags: Vec<TokenBag>,
    pub identifier: Vec<RepresentationSequence>,
    pub ast: Vec<RepresentationSequence>,
    pub diagnostics: Vec<Diagnostic>,
}

impl CorpusExtraction {
    pub fn representations(&self, kind: ReprKind) -> &[RepresentationSequence] {
        match kind {
            ReprKind::Identifier => &self.identifier,
            ReprKind::Ast => &self.ast,
        }
    }
}

/// Run the full extraction over ingested files. Files are processed
/// independently under `exec`.
pub fn extract_corpus(files: &[SourceFile], config: &ExtractConfig, exec: Execution) -> CorpusExtraction {
    let per_file = exec.map(files, |f| extract_file(f, config));
    let mut out = CorpusExtraction::default();
    for part in per_file {
        out.methods.extend(part.methods);
        out.bags.extend(part.bags);
        out.identifier.extend(part.identifier);
        out.ast.extend(part.ast);
        out.diagnostics.extend(part.diagnostics);
    }
    // Files arrive path-sorted and methods within a file in token order, so
    // only nested definitions can be out of (file, start_line) order.
    out.methods.sort_by(|a, b| (a.file.as_str(), a.start_line).cmp(&(b.file.as_str(), b.start_line)));
    let rank: HashMap<String, usize> =
        out.methods.iter().enumerate().map(|(i, m)| (m.id.clone(), i)).collect();
    out.bags.sort_by_key(|b| rank[&b.method_id]);
    out.identifier.sort_by_key(|s| rank[&s.method_id]);
    out.ast.sort_by_key(|s| rank[&s.method_id]);
    out
}

fn extract_file(file: &SourceFile, config: &ExtractConfig) -> CorpusExtraction {
    let ex = extract_methods(file, config.min_lines);
    let mut out = CorpusExtraction { diagnostics: ex.diagnostics, ..Default::default() };
    for m in ex.methods {
        out.bags.push(tokenize(&m, &config.token_classes));
        for kind in [ReprKind::Identifier, ReprKind::Ast] {
            match extract_representation(&m, kind) {
                Ok(mut seq) => {
                    if seq.tokens.len() > config.max_sequence_len {
                        out.diagnostics.push(Diagnostic {
                            path: m.file.clone(),
                            line: m.start_line,
                            message: format!(
                                "{kind} sequence of {} truncated to {}",
                                seq.tokens.len(),
                                config.max_sequence_len
                            ),
                        });
                        seq.tokens.truncate(config.max_sequence_len);
                    }
                    match kind {
                        ReprKind::Identifier => out.identifier.push(seq),
                        ReprKind::Ast => out.ast.push(seq),
                    }
                }
                Err(e) => out.diagnostics.push(Diagnostic {
                    path: m.file.clone(),
                    line: m.start_line,
                    message: e.to_string(),
                }),
            }
        }
        out.methods.push(m);
    }
    out
}
