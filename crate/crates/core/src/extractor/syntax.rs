//! Newline handling shared by the method-boundary scanner and the AST parser.
//!
//! A line break ends a statement when the token before it can end one and
//! the token after it can begin one. Leading operators and `.` continue the
//! previous line.

use super::lexer::{Token, TokenKind};

pub fn can_end_statement(tok: &Token) -> bool {
    match tok.kind {
        TokenKind::Identifier | TokenKind::Literal | TokenKind::Unknown => true,
        TokenKind::Keyword => matches!(tok.text.as_str(), "this" | "return" | "type" | "_"),
        TokenKind::Punct => matches!(tok.text.as_str(), ")" | "]" | "}"),
        TokenKind::Operator => false,
    }
}

pub fn can_begin_statement(tok: &Token) -> bool {
    match tok.kind {
        TokenKind::Keyword => !matches!(
            tok.text.as_str(),
            "catch" | "else" | "extends" | "finally" | "forSome" | "match" | "with" | "yield"
        ),
        TokenKind::Punct => matches!(tok.text.as_str(), "(" | "[" | "{"),
        TokenKind::Operator => tok.text == "@",
        _ => true,
    }
}

/// True when a line break separates `prev` and `next` into two statements.
pub fn newline_terminates(prev: &Token, next: &Token) -> bool {
    next.nl_before && can_end_statement(prev) && can_begin_statement(next)
}

/// Keywords that open a new member or local definition.
pub fn starts_definition(tok: &Token) -> bool {
    tok.kind == TokenKind::Keyword
        && matches!(
            tok.text.as_str(),
            "def" | "val" | "var" | "class" | "object" | "trait" | "type" | "case" | "private"
                | "protected" | "override" | "final" | "implicit" | "lazy" | "abstract"
                | "sealed" | "import" | "package"
        )
}

pub fn closing_for(open: &str) -> Option<&'static str> {
    match open {
        "(" => Some(")"),
        "[" => Some("]"),
        "{" => Some("}"),
        _ => None,
    }
}

pub fn is_close(tok: &Token) -> bool {
    tok.kind == TokenKind::Punct && matches!(tok.text.as_str(), ")" | "]" | "}")
}

pub fn is_open(tok: &Token) -> bool {
    tok.kind == TokenKind::Punct && matches!(tok.text.as_str(), "(" | "[" | "{")
}

/// Result of matching brackets over a token stream.
#[derive(Debug, Clone)]
pub struct Brackets {
    /// `partner[i]` is the index of the matching bracket for bracket tokens.
    pub partner: Vec<Option<usize>>,
    /// Tokens at or after this index follow the first imbalance and are not
    /// trusted. Equal to the token count for balanced input.
    pub cutoff: usize,
    pub imbalance: Option<Imbalance>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Imbalance {
    pub line: usize,
    pub message: String,
}

pub fn match_brackets(tokens: &[Token]) -> Brackets {
    let mut partner = vec![None; tokens.len()];
    let mut stack: Vec<usize> = Vec::new();
    for (i, tok) in tokens.iter().enumerate() {
        if is_open(tok) {
            stack.push(i);
        } else if is_close(tok) {
            match stack.pop() {
                Some(o) if closing_for(&tokens[o].text) == Some(tok.text.as_str()) => {
                    partner[o] = Some(i);
                    partner[i] = Some(o);
                }
                Some(o) => {
                    // Mismatch: everything from the unclosed opener on is suspect.
                    let cutoff = stack.first().copied().unwrap_or(o).min(o);
                    return Brackets {
                        partner: clear_after(partner, cutoff),
                        cutoff,
                        imbalance: Some(Imbalance {
                            line: tok.line,
                            message: format!(
                                "`{}` closes `{}` opened on line {}",
                                tok.text, tokens[o].text, tokens[o].line
                            ),
                        }),
                    };
                }
                None => {
                    return Brackets {
                        partner,
                        cutoff: i,
                        imbalance: Some(Imbalance {
                            line: tok.line,
                            message: format!("unmatched `{}`", tok.text),
                        }),
                    };
                }
            }
        }
    }
    match stack.first() {
        Some(&o) => Brackets {
            partner: clear_after(partner, o),
            cutoff: o,
            imbalance: Some(Imbalance {
                line: tokens[o].line,
                message: format!("`{}` is never closed", tokens[o].text),
            }),
        },
        None => Brackets { partner, cutoff: tokens.len(), imbalance: None },
    }
}

fn clear_after(mut partner: Vec<Option<usize>>, cutoff: usize) -> Vec<Option<usize>> {
    for p in partner.iter_mut().skip(cutoff) {
        *p = None;
    }
    for p in partner.iter_mut().take(cutoff) {
        if p.is_some_and(|q| q >= cutoff) {
            *p = None;
        }
    }
    partner
}
