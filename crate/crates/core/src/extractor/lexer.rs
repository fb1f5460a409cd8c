//! A lexer for Scala-family source text.
//!
//! Comments (line, and nested block comments) are dropped; every other
//! lexeme becomes a [`Token`] carrying its byte span and line range so the
//! method extractor can slice raw bodies and count effective lines.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Keyword,
    Identifier,
    /// String, interpolated string, char, symbol, numeric or boolean literal.
    Literal,
    /// Operator characters and reserved operators such as `=`, `=>`, `:`.
    Operator,
    /// `( ) [ ] { } , ; .`
    Punct,
    /// A character the lexer does not recognise.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub start: usize,
    pub end: usize,
    /// 1-based line of the first byte.
    pub line: usize,
    /// 1-based line of the last byte.
    pub end_line: usize,
    /// A line break (or a comment containing one) separates this token from
    /// the previous one.
    pub nl_before: bool,
}

impl Token {
    pub fn is(&self, text: &str) -> bool {
        self.text == text
    }

    pub fn is_keyword(&self, text: &str) -> bool {
        self.kind == TokenKind::Keyword && self.text == text
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

pub const KEYWORDS: &[&str] = &[
    "abstract", "case", "catch", "class", "def", "do", "else", "extends", "false", "final",
    "finally", "for", "forSome", "if", "implicit", "import", "lazy", "match", "new", "null",
    "object", "override", "package", "private", "protected", "return", "sealed", "super",
    "this", "throw", "trait", "try", "true", "type", "val", "var", "while", "with", "yield",
    "_",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

fn is_op_char(c: char) -> bool {
    matches!(
        c,
        '!' | '#' | '%' | '&' | '*' | '+' | '-' | '/' | ':' | '<' | '=' | '>' | '?' | '@' | '\\'
            | '^' | '|' | '~'
    )
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

fn is_ident_part(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

/// Something the lexer noticed but recovered from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexDiagnostic {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Default, Clone)]
pub struct Lexed {
    pub tokens: Vec<Token>,
    pub diagnostics: Vec<LexDiagnostic>,
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn starts_with(&self, s: &str) -> bool {
        self.src[self.pos..].starts_with(s)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
        }
        Some(c)
    }

    fn bump_while(&mut self, mut pred: impl FnMut(char) -> bool) {
        while let Some(c) = self.peek() {
            if !pred(c) {
                break;
            }
            self.bump();
        }
    }
}

/// Lex `src` into tokens. Lexing is total: unterminated literals run to end
/// of line (or input) and unknown characters become single-character
/// [`TokenKind::Unknown`] tokens, each with a diagnostic.
pub fn lex(src: &str) -> Lexed {
    let mut cur = Cursor { src, pos: 0, line: 1 };
    let mut out = Lexed::default();
    let mut nl_pending = false;

    while let Some(c) = cur.peek() {
        if c == '\n' {
            nl_pending = true;
            cur.bump();
            continue;
        }
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if cur.starts_with("//") {
            cur.bump_while(|c| c != '\n');
            continue;
        }
        if cur.starts_with("/*") {
            let start_line = cur.line;
            if skip_block_comment(&mut cur) {
                if cur.line > start_line {
                    nl_pending = true;
                }
            } else {
                out.diagnostics.push(LexDiagnostic {
                    line: start_line,
                    message: "unterminated block comment".into(),
                });
            }
            continue;
        }

        let start = cur.pos;
        let line = cur.line;
        let kind = lex_one(&mut cur, &mut out.diagnostics);
        let text = &src[start..cur.pos];
        let end_line = line + text.matches('\n').count();
        let kind = match kind {
            TokenKind::Identifier if is_keyword(text) => {
                if text == "true" || text == "false" || text == "null" {
                    TokenKind::Literal
                } else {
                    TokenKind::Keyword
                }
            }
            k => k,
        };
        out.tokens.push(Token {
            kind,
            text: text.to_string(),
            start,
            end: cur.pos,
            line,
            end_line,
            nl_before: nl_pending,
        });
        nl_pending = false;
    }
    out
}

/// Skips a (possibly nested) block comment. Returns false when the input
/// ends before the comment is closed.
fn skip_block_comment(cur: &mut Cursor<'_>) -> bool {
    let mut depth = 0usize;
    loop {
        if cur.starts_with("/*") {
            depth += 1;
            cur.bump();
            cur.bump();
        } else if cur.starts_with("*/") {
            depth -= 1;
            cur.bump();
            cur.bump();
            if depth == 0 {
                return true;
            }
        } else if cur.bump().is_none() {
            return false;
        }
    }
}

fn lex_one(cur: &mut Cursor<'_>, diags: &mut Vec<LexDiagnostic>) -> TokenKind {
    let c = cur.peek().expect("caller checked");
    match c {
        '(' | ')' | '[' | ']' | '{' | '}' | ',' | ';' => {
            cur.bump();
            TokenKind::Punct
        }
        '.' if !cur.peek_at(1).is_some_and(|d| d.is_ascii_digit()) => {
            cur.bump();
            TokenKind::Punct
        }
        '"' => {
            lex_string(cur, diags);
            TokenKind::Literal
        }
        '`' => {
            cur.bump();
            cur.bump_while(|c| c != '`' && c != '\n');
            if cur.peek() == Some('`') {
                cur.bump();
            } else {
                diags.push(LexDiagnostic {
                    line: cur.line,
                    message: "unterminated backquoted identifier".into(),
                });
            }
            TokenKind::Identifier
        }
        '\'' => lex_quote(cur, diags),
        c if c.is_ascii_digit() || c == '.' => {
            lex_number(cur);
            TokenKind::Literal
        }
        c if is_ident_start(c) => {
            lex_ident(cur);
            // Interpolated string: an identifier immediately followed by a quote.
            if cur.peek() == Some('"') {
                lex_string(cur, diags);
                return TokenKind::Literal;
            }
            TokenKind::Identifier
        }
        c if is_op_char(c) => {
            cur.bump_while(is_op_char);
            TokenKind::Operator
        }
        _ => {
            cur.bump();
            diags.push(LexDiagnostic {
                line: cur.line,
                message: format!("unknown character {c:?}"),
            });
            TokenKind::Unknown
        }
    }
}

fn lex_ident(cur: &mut Cursor<'_>) {
    let first = cur.bump();
    if first == Some('_') && cur.peek().is_some_and(|c| !is_ident_part(c)) {
        // Bare `_` placeholder.
        return;
    }
    loop {
        match cur.peek() {
            Some('_') => {
                cur.bump();
                // `foo_+` style identifiers end in operator characters.
                if cur.peek().is_some_and(is_op_char) {
                    cur.bump_while(is_op_char);
                    return;
                }
            }
            Some(c) if is_ident_part(c) => {
                cur.bump();
            }
            _ => return,
        }
    }
}

fn lex_number(cur: &mut Cursor<'_>) {
    if cur.starts_with("0x") || cur.starts_with("0X") {
        cur.bump();
        cur.bump();
        cur.bump_while(|c| c.is_ascii_hexdigit() || c == '_');
    } else {
        cur.bump_while(|c| c.is_ascii_digit() || c == '_');
        if cur.peek() == Some('.') && cur.peek_at(1).is_some_and(|d| d.is_ascii_digit()) {
            cur.bump();
            cur.bump_while(|c| c.is_ascii_digit() || c == '_');
        }
        if matches!(cur.peek(), Some('e' | 'E'))
            && (cur.peek_at(1).is_some_and(|d| d.is_ascii_digit())
                || (matches!(cur.peek_at(1), Some('+' | '-'))
                    && cur.peek_at(2).is_some_and(|d| d.is_ascii_digit())))
        {
            cur.bump();
            cur.bump();
            cur.bump_while(|c| c.is_ascii_digit());
        }
    }
    if matches!(cur.peek(), Some('L' | 'l' | 'f' | 'F' | 'd' | 'D')) {
        cur.bump();
    }
}

fn lex_string(cur: &mut Cursor<'_>, diags: &mut Vec<LexDiagnostic>) {
    let line = cur.line;
    if cur.starts_with("\"\"\"") {
        for _ in 0..3 {
            cur.bump();
        }
        loop {
            if cur.starts_with("\"\"\"") {
                for _ in 0..3 {
                    cur.bump();
                }
                // Closing run may be longer than three quotes.
                cur.bump_while(|c| c == '"');
                return;
            }
            if cur.bump().is_none() {
                diags.push(LexDiagnostic { line, message: "unterminated multi-line string".into() });
                return;
            }
        }
    }
    cur.bump();
    loop {
        match cur.peek() {
            Some('"') => {
                cur.bump();
                return;
            }
            Some('\\') => {
                cur.bump();
                if cur.peek() != Some('\n') {
                    cur.bump();
                }
            }
            Some('\n') | None => {
                diags.push(LexDiagnostic { line, message: "unterminated string literal".into() });
                return;
            }
            Some(_) => {
                cur.bump();
            }
        }
    }
}

/// `'a'`, `'\n'` are character literals; `'sym` is a symbol literal.
fn lex_quote(cur: &mut Cursor<'_>, diags: &mut Vec<LexDiagnostic>) -> TokenKind {
    cur.bump();
    match (cur.peek(), cur.peek_at(1)) {
        (Some('\\'), _) => {
            cur.bump();
            cur.bump_while(|c| c != '\'' && c != '\n');
            if cur.peek() == Some('\'') {
                cur.bump();
            } else {
                diags.push(LexDiagnostic { line: cur.line, message: "unterminated char literal".into() });
            }
        }
        (Some(c), Some('\'')) if c != '\n' => {
            cur.bump();
            cur.bump();
        }
        (Some(c), _) if is_ident_start(c) => {
            cur.bump_while(is_ident_part);
        }
        _ => {
            diags.push(LexDiagnostic { line: cur.line, message: "stray quote".into() });
            return TokenKind::Unknown;
        }
    }
    TokenKind::Literal
}

/// Source text with every comment removed. Line structure is preserved
/// (block comments keep their newlines) so line numbers stay valid.
pub fn strip_comments(src: &str) -> String {
    let lexed = lex(src);
    let mut out = String::with_capacity(src.len());
    let mut last = 0;
    for tok in &lexed.tokens {
        let gap = &src[last..tok.start];
        out.extend(gap.chars().map(|c| if c == '\n' { '\n' } else { ' ' }));
        out.push_str(&src[tok.start..tok.end]);
        last = tok.end;
    }
    out.extend(src[last..].chars().filter(|&c| c == '\n'));
    out
}

/// Number of lines that contain at least one non-comment lexeme.
pub fn effective_lines(tokens: &[Token]) -> usize {
    let mut lines: Vec<usize> = Vec::new();
    for tok in tokens {
        for l in tok.line..=tok.end_line {
            if lines.last() != Some(&l) {
                lines.push(l);
            }
        }
    }
    lines.sort_unstable();
    lines.dedup();
    lines.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(src: &str) -> Vec<String> {
        lex(src).tokens.into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn lexes_listing_method() {
        let toks = texts("def f(x: Any) = x match { case Array(_, a, _*) => a }");
        assert_eq!(
            toks,
            [
                "def", "f", "(", "x", ":", "Any", ")", "=", "x", "match", "{", "case", "Array",
                "(", "_", ",", "a", ",", "_", "*", ")", "=>", "a", "}"
            ]
        );
    }

    #[test]
    fn nested_block_comments() {
        let toks = texts("a /* outer /* inner */ still comment */ b");
        assert_eq!(toks, ["a", "b"]);
    }

    #[test]
    fn literals() {
        let lexed = lex(r#"s"hi $x" 'c' '\n' 'sym 1.5e3 0xFF 10L """multi
line""" "esc\"aped""#);
        let kinds: Vec<_> = lexed.tokens.iter().map(|t| (t.kind, t.text.as_str())).collect();
        assert!(kinds.iter().all(|(k, _)| *k == TokenKind::Literal), "{kinds:?}");
        assert_eq!(lexed.tokens.len(), 9);
        assert_eq!(lexed.tokens[7].end_line, 2);
        assert!(lexed.diagnostics.is_empty());
    }

    #[test]
    fn unknown_chars_are_single_tokens() {
        let lexed = lex("a ¤ b");
        assert_eq!(lexed.tokens[1].kind, TokenKind::Unknown);
        assert_eq!(lexed.diagnostics.len(), 1);
    }

    #[test]
    fn newline_flags() {
        let lexed = lex("a\n/* c\n */ b c");
        assert!(!lexed.tokens[0].nl_before);
        assert!(lexed.tokens[1].nl_before);
        assert!(!lexed.tokens[2].nl_before);
    }

    #[test]
    fn ident_with_operator_suffix() {
        assert_eq!(texts("foo_+ x"), ["foo_+", "x"]);
        assert_eq!(texts("a_b"), ["a_b"]);
    }

    #[test]
    fn strip_keeps_lines() {
        let src = "a // c\n/* x\ny */\nb";
        let stripped = strip_comments(src);
        assert_eq!(stripped.lines().count(), src.lines().count());
        assert_eq!(lex(&stripped).tokens.len(), 2);
    }

    #[test]
    fn counts_effective_lines() {
        let src = "// only\n\nx\n  /* c */\ny z\n";
        assert_eq!(effective_lines(&lex(src).tokens), 2);
    }
}
