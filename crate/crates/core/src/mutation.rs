//! Source-level clone mutators for Scala method text.
//!
//! * Type-1: comments, spacing, indentation and blank lines change; the token
//!   stream does not.
//! * Type-2: identifiers are renamed consistently and literal values change.
//! * Type-3: one statement line is deleted, duplicated with an edit, or a new
//!   statement is inserted.
//!
//! Edits are made only between tokens, so line breaks between tokens are
//! preserved and no token is split or merged.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::extractor::lexer::{lex, Token, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MutationKind {
    Type1,
    Type2,
    Type3,
}

const COMMENTS: &[&str] = &[
    "TODO revisit",
    "edge case",
    "see ticket",
    "keep in sync",
    "fast path",
    "legacy",
    "checked upstream",
    "FIXME",
];

const WORDS: &[&str] = &[
    "alpha", "beta", "item", "node", "value", "entry", "count", "total", "buf", "acc", "key", "res", "tmp",
    "cursor", "elem", "part", "chunk", "slot",
];

/// Source with comment and whitespace edits. The result always differs from
/// the input and lexes to the same token texts.
pub fn mutate_type1(src: &str, rng: &mut impl Rng) -> String {
    let tokens = lex(src).tokens;
    if tokens.is_empty() {
        return format!("// {}\n{src}", COMMENTS.choose(rng).unwrap());
    }
    let mut out = String::with_capacity(src.len() * 2);
    out.push_str(&src[..tokens[0].start]);
    let mut changed = false;
    for (i, tok) in tokens.iter().enumerate() {
        if i > 0 {
            let gap = &src[tokens[i - 1].end..tok.start];
            if gap.chars().all(char::is_whitespace) {
                let newlines = gap.matches('\n').count();
                let mut g = String::new();
                if newlines > 0 {
                    if rng.gen_bool(0.25) {
                        g.push_str(" // ");
                        g.push_str(COMMENTS.choose(rng).unwrap());
                    }
                    let extra = usize::from(rng.gen_bool(0.15));
                    for _ in 0..newlines + extra {
                        g.push('\n');
                    }
                    let indent = gap.rsplit('\n').next().unwrap_or("").len();
                    let indent = match rng.gen_range(0..3) {
                        0 => indent + 2,
                        1 => indent.saturating_sub(1),
                        _ => indent,
                    };
                    g.extend(std::iter::repeat(' ').take(indent));
                } else if rng.gen_bool(0.3) {
                    g.extend(std::iter::repeat(' ').take(rng.gen_range(1..4)));
                } else {
                    g.push_str(gap);
                }
                if rng.gen_bool(0.05) {
                    g.push_str(" /* ");
                    g.push_str(COMMENTS.choose(rng).unwrap());
                    g.push_str(" */ ");
                }
                changed |= g != gap;
                out.push_str(&g);
            } else {
                out.push_str(gap);
            }
        }
        out.push_str(&src[tok.start..tok.end]);
    }
    let tail = &src[tokens.last().unwrap().end..];
    if !changed {
        out.push_str(" // ");
        out.push_str(COMMENTS.choose(rng).unwrap());
    }
    out.push_str(tail);
    out
}

fn fresh_literal(lit: &str, rng: &mut impl Rng) -> String {
    let first = lit.chars().next().unwrap_or('0');
    if lit == "true" {
        "false".into()
    } else if lit == "false" {
        "true".into()
    } else if lit == "null" {
        "None.orNull".into()
    } else if first.is_ascii_digit() || first == '.' {
        let n: u32 = rng.gen_range(2..500);
        let lower = lit.to_ascii_lowercase();
        if lower.starts_with("0x") {
            format!("0x{n:X}")
        } else if lit.contains('.') || lower.ends_with('d') || lower.ends_with('f') {
            let suffix = if lower.ends_with('f') { "f" } else { "" };
            format!("{n}.{}{suffix}", rng.gen_range(0..10))
        } else if lower.ends_with('l') {
            format!("{n}L")
        } else {
            n.to_string()
        }
    } else if first == '\'' {
        if lit.len() >= 3 && lit.ends_with('\'') {
            format!("'{}'", (b'a' + rng.gen_range(0..26u8)) as char)
        } else {
            format!("'{}", WORDS.choose(rng).unwrap())
        }
    } else {
        format!("\"{} {}\"", WORDS.choose(rng).unwrap(), rng.gen_range(0..100))
    }
}

/// Consistent identifier renaming plus fresh literal values.
pub fn mutate_type2(src: &str, rng: &mut impl Rng) -> String {
    let tokens = lex(src).tokens;
    let mut names: HashMap<String, String> = HashMap::new();
    let mut out = String::with_capacity(src.len() + 64);
    let mut last = 0;
    for tok in &tokens {
        let replacement = match tok.kind {
            TokenKind::Identifier => {
                let next = names.len();
                Some(
                    names
                        .entry(tok.text.clone())
                        .or_insert_with(|| {
                            let w = WORDS.choose(rng).unwrap();
                            if tok.text.starts_with(|c: char| c.is_uppercase()) {
                                let mut cs = w.chars();
                                let head = cs.next().unwrap().to_ascii_uppercase();
                                format!("{head}{}{next}", cs.as_str())
                            } else {
                                format!("{w}{next}")
                            }
                        })
                        .clone(),
                )
            }
            TokenKind::Literal => Some(fresh_literal(&tok.text, rng)),
            _ => None,
        };
        if let Some(r) = replacement {
            out.push_str(&src[last..tok.start]);
            out.push_str(&r);
            last = tok.end;
        }
    }
    out.push_str(&src[last..]);
    out
}

fn is_open(t: &Token) -> bool {
    t.kind == TokenKind::Punct && matches!(t.text.as_str(), "(" | "[" | "{")
}

fn is_close(t: &Token) -> bool {
    t.kind == TokenKind::Punct && matches!(t.text.as_str(), ")" | "]" | "}")
}

fn continues(t: &Token) -> bool {
    matches!(t.kind, TokenKind::Operator)
        || t.is(".")
        || t.is(",")
        || is_open(t)
        || ["else", "catch", "finally", "case", "with", "extends", "match", "yield", "do"]
            .iter()
            .any(|k| t.is_keyword(k))
}

/// Byte range of each line that holds exactly one standalone statement.
fn statement_lines(src: &str, tokens: &[Token]) -> Vec<(usize, usize)> {
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for (i, t) in tokens.iter().enumerate() {
        if i == 0 || t.nl_before {
            groups.push((i, i + 1));
        } else {
            groups.last_mut().unwrap().1 = i + 1;
        }
    }
    let mut out = Vec::new();
    for (g, &(s, e)) in groups.iter().enumerate() {
        if g == 0 || g + 1 == groups.len() {
            continue;
        }
        let line = &tokens[s..e];
        let first = &line[0];
        let last = &line[line.len() - 1];
        let next_first = &tokens[groups[g + 1].0];
        let prev_last = &tokens[groups[g - 1].1 - 1];
        let mut depth = 0i32;
        let balanced = line.iter().all(|t| {
            if is_open(t) {
                depth += 1;
            } else if is_close(t) {
                depth -= 1;
            }
            depth >= 0
        }) && depth == 0;
        let single_line = line.iter().all(|t| t.line == t.end_line && t.line == first.line);
        let starts_stmt = (first.kind == TokenKind::Identifier
            || first.is_keyword("val")
            || first.is_keyword("var")
            || first.is_keyword("return"))
            && !first.is_keyword("case");
        let ends_stmt = !continues(last) && !last.is("=") && !last.is("=>") && !last.is(":");
        let isolated = !continues(next_first)
            && !matches!(prev_last.kind, TokenKind::Operator)
            && !prev_last.is("=")
            && !prev_last.is(",")
            && !prev_last.is("(")
            && !(prev_last.is(")") && guards_next_line(tokens, groups[g - 1]));
        let line_start = src[..first.start].rfind('\n').map_or(0, |p| p + 1);
        let line_end = src[last.end..].find('\n').map_or(src.len(), |p| last.end + p + 1);
        let clean_edges = src[line_start..first.start].trim().is_empty() && {
            let rest = src[last.end..line_end].trim();
            rest.is_empty() || (rest.starts_with("//") && !rest.contains("*/"))
        };
        if balanced && single_line && starts_stmt && ends_stmt && isolated && clean_edges {
            out.push((line_start, line_end));
        }
    }
    out
}

/// True when the line `group` is a bare `if (..)`, `while (..)` or `for (..)`
/// header whose body starts on the next line.
fn guards_next_line(tokens: &[Token], group: (usize, usize)) -> bool {
    let t = &tokens[group.0];
    t.is_keyword("if") || t.is_keyword("while") || t.is_keyword("for") || t.is_keyword("else")
}

/// Delete, duplicate-and-edit, or insert one statement line. `None` when the
/// source has no standalone statement line to work with.
pub fn mutate_type3(src: &str, rng: &mut impl Rng) -> Option<String> {
    let tokens = lex(src).tokens;
    let lines = statement_lines(src, &tokens);
    let &(start, end) = lines.choose(rng)?;
    let line = &src[start..end];
    let indent: String = line.chars().take_while(|c| *c == ' ' || *c == '\t').collect();
    let newline = if line.ends_with('\n') { "" } else { "\n" };
    let inserted = format!(
        "{indent}val {}{} = {} * {}\n",
        WORDS.choose(rng).unwrap(),
        rng.gen_range(0..100),
        rng.gen_range(1..50),
        rng.gen_range(1..50)
    );
    let choice = if lines.len() < 2 { rng.gen_range(1..3) } else { rng.gen_range(0..3) };
    let mut out = String::with_capacity(src.len() + inserted.len());
    out.push_str(&src[..start]);
    match choice {
        0 => {}
        1 => {
            out.push_str(line);
            out.push_str(newline);
            out.push_str(&inserted);
        }
        _ => {
            out.push_str(line);
            out.push_str(newline);
            out.push_str(&mutate_type2(line.trim_end_matches('\n'), rng));
            out.push('\n');
        }
    }
    out.push_str(&src[end..]);
    Some(out)
}

pub fn mutate(src: &str, kind: MutationKind, rng: &mut impl Rng) -> Option<String> {
    match kind {
        MutationKind::Type1 => Some(mutate_type1(src, rng)),
        MutationKind::Type2 => Some(mutate_type2(src, rng)),
        MutationKind::Type3 => mutate_type3(src, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extractor::{extract_methods, normalize, SourceFile};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const SRC: &str = r#"def describe(xs: List[Int], label: String): String = {
  val total = xs.sum /* running */
  val avg = if (xs.isEmpty) 0.0 else total.toDouble / xs.size
  if (avg > 10)
    println(s"big $label")
  var count = 0
  for (x <- xs) {
    count += x * 2
  }
  val tag = 'k'
  label + ": " + avg + " " + count
}
"#;

    #[test]
    fn type1_keeps_tokens() {
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = mutate_type1(SRC, &mut rng);
            assert_ne!(m, SRC);
            assert_eq!(normalize(&m), normalize(SRC), "seed {seed}:\n{m}");
            let methods = extract_methods(&SourceFile::new("m.scala", m.as_str()), 1).methods;
            assert_eq!(methods.len(), 1, "{m}");
        }
    }

    #[test]
    fn type2_renames_consistently() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = mutate_type2(SRC, &mut rng);
        let a: Vec<_> = lex(SRC).tokens.into_iter().map(|t| t.kind).collect();
        let b: Vec<_> = lex(&m).tokens.into_iter().map(|t| t.kind).collect();
        assert_eq!(a, b);
        let idents = |s: &str| -> std::collections::HashSet<String> {
            lex(s).tokens.into_iter().filter(|t| t.kind == TokenKind::Identifier).map(|t| t.text).collect()
        };
        assert!(idents(SRC).is_disjoint(&idents(&m)), "{m}");
        assert_eq!(idents(SRC).len(), idents(&m).len());
        assert_eq!(extract_methods(&SourceFile::new("m.scala", m.as_str()), 1).methods.len(), 1);
    }

    #[test]
    fn type3_changes_one_statement() {
        let lines = statement_lines(SRC, &lex(SRC).tokens);
        let picked: Vec<&str> = lines.iter().map(|&(s, e)| SRC[s..e].trim()).collect();
        assert!(picked.contains(&"var count = 0"), "{picked:?}");
        assert!(!picked.iter().any(|l| l.starts_with("println")), "{picked:?}");
        for seed in 0..30 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = mutate_type3(SRC, &mut rng).unwrap();
            assert_ne!(normalize(&m), normalize(SRC));
            let diff = (m.lines().count() as i64 - SRC.lines().count() as i64).abs();
            assert_eq!(diff, 1, "{m}");
            assert_eq!(extract_methods(&SourceFile::new("m.scala", m.as_str()), 1).methods.len(), 1, "{m}");
        }
    }

    #[test]
    fn type3_needs_a_statement() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(mutate_type3("def f = 1\n", &mut rng), None);
    }
}
