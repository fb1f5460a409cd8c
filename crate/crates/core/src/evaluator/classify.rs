use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::extractor::lexer::{lex, TokenKind};
use crate::extractor::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AutoClass {
    Type1,
    Type2,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Type2Mode {
    /// Every identifier becomes the same placeholder.
    #[default]
    Blind,
    /// Identifiers must correspond one-to-one between the two bodies.
    Bijective,
}

const LITERAL: &str = "$lit";

fn abstracted(body: &str, mode: Type2Mode) -> Vec<String> {
    let mut names: HashMap<String, usize> = HashMap::new();
    lex(body)
        .tokens
        .into_iter()
        .map(|t| match t.kind {
            TokenKind::Literal => LITERAL.to_string(),
            TokenKind::Identifier => match mode {
                Type2Mode::Blind => "$id".to_string(),
                Type2Mode::Bijective => {
                    let next = names.len();
                    format!("$id{}", names.entry(t.text).or_insert(next))
                }
            },
            _ => t.text,
        })
        .collect()
}

/// Type-1 when normalized bodies match, Type-2 when they match after
/// abstracting identifiers and literals, otherwise Unknown.
pub fn classify_auto(a: &Method, b: &Method, mode: Type2Mode) -> AutoClass {
    if a.normalized_body == b.normalized_body {
        AutoClass::Type1
    } else if abstracted(&a.normalized_body, mode) == abstracted(&b.normalized_body, mode) {
        AutoClass::Type2
    } else {
        AutoClass::Unknown
    }
}
