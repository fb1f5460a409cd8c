//! Seeded generator of Scala-like corpora with injected clones, for
//! benchmarks and tests where no real corpus is at hand.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractor::{Method, SourceFile};
use crate::mutation::{mutate, MutationKind};
use crate::pair::PairKey;

const NOUNS: &[&str] = &[
    "account", "address", "amount", "batch", "buffer", "cache", "cart", "channel", "client", "config",
    "context", "counter", "customer", "data", "device", "document", "entry", "event", "file", "filter",
    "group", "handler", "header", "index", "invoice", "item", "job", "key", "label", "limit", "line",
    "list", "message", "metric", "model", "node", "offset", "order", "owner", "packet", "page", "path",
    "payload", "policy", "price", "queue", "record", "region", "report", "request", "result", "route",
    "row", "rule", "sample", "schema", "score", "session", "shard", "signal", "size", "slot", "source",
    "state", "status", "stream", "table", "task", "tenant", "token", "total", "trace", "user", "value",
    "vendor", "version", "window", "worker",
];

const VERBS: &[&str] = &[
    "apply", "build", "check", "collect", "compute", "convert", "count", "create", "decode", "encode",
    "evaluate", "extract", "fetch", "find", "format", "group", "handle", "load", "lookup", "merge",
    "normalize", "parse", "prepare", "process", "publish", "read", "refresh", "render", "resolve",
    "sanitize", "save", "scan", "select", "send", "sort", "split", "store", "sum", "transform", "update",
    "validate", "write",
];

const TYPES: &[&str] = &["Int", "Long", "Double", "String", "Boolean", "List[Int]", "Seq[String]", "Option[Int]"];
const OPS: &[&str] = &["+", "-", "*", "/", "%"];
const CMPS: &[&str] = &[">", "<", ">=", "<=", "==", "!="];
const METHODS: &[&str] = &["size", "length", "isEmpty", "nonEmpty", "head", "toString", "hashCode", "trim"];
const HOFS: &[&str] = &["map", "filter", "foreach", "exists", "forall", "flatMap"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub methods: usize,
    pub methods_per_file: usize,
    pub files_per_project: usize,
    /// Fraction of methods that are mutants of an earlier method.
    pub clone_rate: f64,
    pub min_lines: usize,
    pub max_lines: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            methods: 1000,
            methods_per_file: 8,
            files_per_project: 12,
            clone_rate: 0.1,
            min_lines: 10,
            max_lines: 28,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodRef {
    pub path: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectedClone {
    pub original: MethodRef,
    pub mutant: MethodRef,
    pub kind: MutationKind,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub files: Vec<SourceFile>,
    pub injected: Vec<InjectedClone>,
}

impl SynthCorpus {
    pub fn loc(&self) -> u64 {
        self.files.iter().map(|f| f.loc as u64).sum()
    }

    /// Injected clone pairs as method-id keys, for methods present in
    /// `methods`.
    pub fn injected_pairs(&self, methods: &[Method]) -> Vec<(PairKey, MutationKind)> {
        let ids: HashMap<(&str, &str), &str> =
            methods.iter().map(|m| ((m.file.as_str(), m.name.as_str()), m.id.as_str())).collect();
        self.injected
            .iter()
            .filter_map(|c| {
                let a = ids.get(&(c.original.path.as_str(), c.original.name.as_str()))?;
                let b = ids.get(&(c.mutant.path.as_str(), c.mutant.name.as_str()))?;
                (a != b).then(|| (PairKey::new(*a, *b), c.kind))
            })
            .collect()
    }

    /// Write every file under `root`, creating directories as needed.
    pub fn write_to(&self, root: &Path) -> Result<()> {
        for f in &self.files {
            let path = root.join(&f.path);
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            std::fs::write(&path, &f.content).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

struct Gen {
    rng: ChaCha8Rng,
    vars: Vec<String>,
}

impl Gen {
    fn pick<'a>(&mut self, xs: &'a [&'a str]) -> &'a str {
        xs.choose(&mut self.rng).unwrap()
    }

    fn ident(&mut self) -> String {
        let a = self.pick(NOUNS);
        if self.rng.gen_bool(0.5) {
            let b = self.pick(NOUNS);
            let mut cs = b.chars();
            format!("{a}{}{}", cs.next().unwrap().to_ascii_uppercase(), cs.as_str())
        } else {
            a.to_string()
        }
    }

    fn method_name(&mut self) -> String {
        let v = self.pick(VERBS);
        let n = self.pick(NOUNS);
        let mut cs = n.chars();
        format!("{v}{}{}", cs.next().unwrap().to_ascii_uppercase(), cs.as_str())
    }

    fn var(&mut self) -> String {
        if !self.vars.is_empty() && self.rng.gen_bool(0.8) {
            self.vars.choose(&mut self.rng).unwrap().clone()
        } else {
            self.ident()
        }
    }

    fn literal(&mut self) -> String {
        match self.rng.gen_range(0..6) {
            0 => format!("\"{}\"", self.pick(NOUNS)),
            1 => format!("{}.{}", self.rng.gen_range(0..100), self.rng.gen_range(0..10)),
            2 => format!("{}L", self.rng.gen_range(0..10_000)),
            _ => self.rng.gen_range(0..1000).to_string(),
        }
    }

    fn atom(&mut self) -> String {
        match self.rng.gen_range(0..5) {
            0 => self.literal(),
            1 => format!("{}.{}", self.var(), self.pick(METHODS)),
            _ => self.var(),
        }
    }

    fn expr(&mut self) -> String {
        match self.rng.gen_range(0..6) {
            0 => {
                let f = self.method_name();
                format!("{f}({}, {})", self.atom(), self.atom())
            }
            1 => {
                let x = self.pick(&["x", "y", "e", "v"]);
                let hof = self.pick(HOFS);
                let op = self.pick(OPS);
                format!("{}.{hof}({x} => {x} {op} {})", self.var(), self.literal())
            }
            2 => format!("{}.getOrElse({})", self.var(), self.literal()),
            _ => {
                let op = self.pick(OPS);
                format!("{} {op} {}", self.atom(), self.atom())
            }
        }
    }

    fn cond(&mut self) -> String {
        let c = self.pick(CMPS);
        let base = format!("{} {c} {}", self.atom(), self.atom());
        if self.rng.gen_bool(0.2) {
            let v = self.var();
            format!("{base} && {v}.nonEmpty")
        } else {
            base
        }
    }

    /// Lines of one statement at `indent`.
    fn statement(&mut self, indent: usize, depth: usize) -> Vec<String> {
        let pad = " ".repeat(indent);
        let choice = if depth >= 2 { self.rng.gen_range(0..4) } else { self.rng.gen_range(0..11) };
        match choice {
            0 | 1 => {
                let v = self.ident();
                let e = self.expr();
                self.vars.push(v.clone());
                vec![format!("{pad}val {v} = {e}")]
            }
            2 => {
                let v = self.ident();
                let l = self.literal();
                self.vars.push(v.clone());
                vec![format!("{pad}var {v} = {l}")]
            }
            3 => {
                let f = self.method_name();
                vec![format!("{pad}{f}({}, {})", self.var(), self.expr())]
            }
            4 => {
                let mut out = vec![format!("{pad}if ({}) {{", self.cond())];
                out.extend(self.block(indent + 2, depth + 1, 1, 3));
                if self.rng.gen_bool(0.5) {
                    out.push(format!("{pad}}} else {{"));
                    out.extend(self.block(indent + 2, depth + 1, 1, 2));
                }
                out.push(format!("{pad}}}"));
                out
            }
            5 => {
                let x = self.ident();
                let coll = self.var();
                let mut out = vec![format!("{pad}for ({x} <- {coll}) {{")];
                self.vars.push(x);
                out.extend(self.block(indent + 2, depth + 1, 1, 3));
                out.push(format!("{pad}}}"));
                out
            }
            6 => {
                let v = self.var();
                let mut out = vec![format!("{pad}{v} match {{")];
                for _ in 0..self.rng.gen_range(1..3) {
                    let l = self.literal();
                    let e = self.expr();
                    out.push(format!("{pad}  case {l} => {e}"));
                }
                let e = self.expr();
                out.push(format!("{pad}  case _ => {e}"));
                out.push(format!("{pad}}}"));
                out
            }
            7 => {
                let v = self.var();
                let mut out = vec![format!("{pad}while ({}) {{", self.cond())];
                out.extend(self.block(indent + 2, depth + 1, 0, 2));
                out.push(format!("{pad}  {v} += 1"));
                out.push(format!("{pad}}}"));
                out
            }
            8 => {
                let mut out = vec![format!("{pad}try {{")];
                out.extend(self.block(indent + 2, depth + 1, 1, 2));
                out.push(format!("{pad}}} catch {{"));
                let f = self.method_name();
                out.push(format!("{pad}  case e: Exception => {f}(e.getMessage)"));
                out.push(format!("{pad}}}"));
                out
            }
            9 => {
                let v = self.var();
                let w = self.pick(NOUNS);
                vec![format!("{pad}println(s\"{w}: ${{{v}}}\")")]
            }
            _ => {
                let v = self.ident();
                let src = self.var();
                let hof = self.pick(HOFS);
                self.vars.push(v.clone());
                vec![
                    format!("{pad}val {v} = {src}"),
                    format!("{pad}  .{hof}(x => x != {})", self.literal()),
                    format!("{pad}  .take({})", self.rng.gen_range(1..50)),
                ]
            }
        }
    }

    fn block(&mut self, indent: usize, depth: usize, min: usize, max: usize) -> Vec<String> {
        let n = self.rng.gen_range(min..=max);
        (0..n).flat_map(|_| self.statement(indent, depth)).collect()
    }

    fn method(&mut self, name: &str, indent: usize, target_lines: usize) -> String {
        self.vars.clear();
        let pad = " ".repeat(indent);
        let params: Vec<String> = (0..self.rng.gen_range(0..4))
            .map(|_| {
                let p = self.ident();
                self.vars.push(p.clone());
                format!("{p}: {}", self.pick(TYPES))
            })
            .collect();
        let ret = self.pick(TYPES);
        let mut lines = vec![format!("{pad}def {name}({}): {ret} = {{", params.join(", "))];
        while lines.len() + 2 < target_lines {
            lines.extend(self.statement(indent + 2, 0));
        }
        let result = self.expr();
        lines.push(format!("{pad}  {result}"));
        lines.push(format!("{pad}}}"));
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }
}

struct FileSlot {
    path: String,
    header: String,
    methods: Vec<String>,
    names: BTreeMap<String, usize>,
}

fn capitalize(s: &str) -> String {
    let mut cs = s.chars();
    match cs.next() {
        Some(c) => format!("{}{}", c.to_ascii_uppercase(), cs.as_str()),
        None => String::new(),
    }
}

/// Generate a corpus. Deterministic per config.
pub fn generate(config: &SynthConfig) -> SynthCorpus {
    let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(config.seed), vars: Vec::new() };
    let per_file = config.methods_per_file.max(1);
    let n_files = config.methods.div_ceil(per_file).max(1);
    let per_project = config.files_per_project.max(1);
    let mut files: Vec<FileSlot> = (0..n_files)
        .map(|i| {
            let project = format!("project{:03}", i / per_project);
            let obj = format!("{}{}", capitalize(g.pick(NOUNS)), capitalize(g.pick(VERBS)));
            FileSlot {
                path: format!("{project}/src/main/scala/{}/{obj}{i}.scala", g.pick(NOUNS)),
                header: format!("package {project}\n\nobject {obj}{i} {{\n"),
                methods: Vec::new(),
                names: BTreeMap::new(),
            }
        })
        .collect();

    let mut placed: Vec<(usize, String, String)> = Vec::new();
    let mut injected = Vec::new();
    let kinds = [MutationKind::Type1, MutationKind::Type2, MutationKind::Type3];
    for i in 0..config.methods {
        let file = i / per_file;
        let mut chosen: Option<(String, String)> = None;
        if !placed.is_empty() && g.rng.gen_bool(config.clone_rate.clamp(0.0, 1.0)) {
            let (src_file, src_name, src_text) = placed.choose(&mut g.rng).unwrap().clone();
            let kind = *kinds.choose(&mut g.rng).unwrap();
            let text = match kind {
                MutationKind::Type3 => {
                    let fresh = g.method_name();
                    mutate(&src_text.replacen(&format!("def {src_name}("), &format!("def {fresh}("), 1), kind, &mut g.rng)
                }
                _ => mutate(&src_text, kind, &mut g.rng),
            };
            if let Some(text) = text {
                let name = def_name(&text).unwrap_or_default();
                if !name.is_empty() && !files[file].names.contains_key(&name) {
                    injected.push(InjectedClone {
                        original: MethodRef { path: files[src_file].path.clone(), name: src_name },
                        mutant: MethodRef { path: files[file].path.clone(), name: name.clone() },
                        kind,
                    });
                    chosen = Some((text, name));
                }
            }
        }
        let (text, name) = chosen.unwrap_or_else(|| {
            let mut name = g.method_name();
            let mut k = 2;
            while files[file].names.contains_key(&name) {
                name = format!("{}{k}", name.trim_end_matches(|c: char| c.is_ascii_digit()));
                k += 1;
            }
            let target = g.rng.gen_range(config.min_lines..=config.max_lines.max(config.min_lines));
            (g.method(&name, 2, target), name)
        });
        files[file].names.insert(name.clone(), i);
        placed.push((file, name, text.clone()));
        files[file].methods.push(text);
    }

    let files = files
        .into_iter()
        .filter(|f| !f.methods.is_empty())
        .map(|f| {
            let mut content = f.header;
            for (k, m) in f.methods.iter().enumerate() {
                if k > 0 {
                    content.push('\n');
                }
                let _ = write!(content, "{m}");
            }
            content.push_str("}\n");
            SourceFile::new(f.path, content)
        })
        .collect();
    SynthCorpus { files, injected }
}

fn def_name(src: &str) -> Option<String> {
    let (_, rest) = src.split_once("def ")?;
    let name: String = rest.chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect();
    (!name.is_empty()).then_some(name)
}
