//! Recursive-descent parser for method definitions, producing a syntax tree
//! whose pre-order node labels form the AST representation.
//!
//! The parser works on the normalized (newline-free) token stream, so two
//! methods with the same normalized body always get the same tree. Labels
//! never include identifier or literal text: renaming leaves the tree
//! unchanged.

use std::fmt;

use super::lexer::{self, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AstNode {
    pub label: &'static str,
    pub children: Vec<AstNode>,
}

impl AstNode {
    fn leaf(label: &'static str) -> Self {
        AstNode { label, children: Vec::new() }
    }

    fn new(label: &'static str, children: Vec<AstNode>) -> Self {
        AstNode { label, children }
    }

    pub fn preorder_labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            out.push(n.label.to_string());
            stack.extend(n.children.iter().rev());
        }
        out
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(AstNode::size).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// Token index where parsing failed.
    pub at: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "token {}: {}", self.at, self.message)
    }
}

impl std::error::Error for ParseError {}

type PResult<T> = Result<T, ParseError>;

/// Parse a single method definition (`def ...`).
pub fn parse_method(source: &str) -> PResult<AstNode> {
    let tokens = lexer::lex(source).tokens;
    let mut p = Parser { tokens: &tokens, pos: 0 };
    let def = p.fun_def()?;
    if p.pos != tokens.len() {
        return Err(p.error("trailing tokens after method body"));
    }
    Ok(def)
}

const MODIFIERS: &[&str] =
    &["lazy", "implicit", "final", "private", "protected", "override", "abstract", "sealed"];

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
}

impl<'t> Parser<'t> {
    fn peek(&self) -> Option<&'t Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&'t Token> {
        self.tokens.get(self.pos + n)
    }

    fn at(&self, text: &str) -> bool {
        self.peek().is_some_and(|t| t.text == text && t.kind != TokenKind::Literal)
    }

    fn at_kw(&self, kw: &str) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(kw))
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        let found = self.peek().map_or("end of input".to_string(), |t| format!("`{}`", t.text));
        ParseError { at: self.pos, message: format!("{} (found {found})", message.into()) }
    }

    fn bump(&mut self) -> PResult<&'t Token> {
        let t = self.peek().ok_or_else(|| self.error("unexpected end of input"))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, text: &str) -> PResult<()> {
        if self.at(text) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{text}`")))
        }
    }

    fn eat(&mut self, text: &str) -> bool {
        if self.at(text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    /// Index of the bracket closing the one at `open`.
    fn closing(&self, open: usize) -> Option<usize> {
        let mut depth = 0i32;
        for (i, t) in self.tokens.iter().enumerate().skip(open) {
            if t.kind != TokenKind::Punct {
                continue;
            }
            match t.text.as_str() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(i);
                    }
                }
                _ => {}
            }
        }
        None
    }

    // ---- definitions ----------------------------------------------------

    fn fun_def(&mut self) -> PResult<AstNode> {
        if !self.at_kw("def") {
            return Err(self.error("expected `def`"));
        }
        self.pos += 1;
        let name = self.bump()?;
        if !(matches!(name.kind, TokenKind::Identifier | TokenKind::Operator) || name.is_keyword("this")) {
            return Err(ParseError { at: self.pos - 1, message: "expected method name".into() });
        }
        let mut children = Vec::new();
        if self.at("[") {
            children.push(self.type_params()?);
        }
        while self.at("(") {
            children.push(self.param_clause()?);
        }
        if self.eat(":") {
            children.push(self.ty(true)?);
        }
        if self.eat("=") {
            children.push(AstNode::new("Body", vec![self.expr()?]));
        } else if self.at("{") {
            children.push(AstNode::new("Body", vec![self.block()?]));
        } else {
            return Err(self.error("expected method body"));
        }
        Ok(AstNode::new("FunDef", children))
    }

    fn type_params(&mut self) -> PResult<AstNode> {
        let open = self.pos;
        let close = self.closing(open).ok_or_else(|| self.error("unclosed `[`"))?;
        let count = self.tokens[open + 1..close].iter().filter(|t| t.is(",")).count() + 1;
        self.pos = close + 1;
        Ok(AstNode::new("TypeParams", (0..count).map(|_| AstNode::leaf("TypeParam")).collect()))
    }

    fn param_clause(&mut self) -> PResult<AstNode> {
        self.expect("(")?;
        let mut params = Vec::new();
        self.eat_kw("implicit");
        while !self.at(")") {
            params.push(self.param()?);
            if !self.eat(",") {
                break;
            }
        }
        self.expect(")")?;
        Ok(AstNode::new("Params", params))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn param(&mut self) -> PResult<AstNode> {
        self.skip_annotations()?;
        while self.peek().is_some_and(|t| t.kind == TokenKind::Keyword && MODIFIERS.contains(&t.text.as_str())) {
            self.pos += 1;
        }
        let _ = self.eat_kw("val") || self.eat_kw("var");
        let name = self.bump()?;
        if !matches!(name.kind, TokenKind::Identifier) && !name.is_keyword("_") {
            return Err(ParseError { at: self.pos - 1, message: "expected parameter name".into() });
        }
        let mut children = Vec::new();
        if self.eat(":") {
            // By-name parameters: `x: => Int`.
            self.eat("=>");
            children.push(self.ty(true)?);
        }
        if self.eat("=") {
            children.push(AstNode::new("Default", vec![self.expr()?]));
        }
        Ok(AstNode::new("Param", children))
    }

    fn skip_annotations(&mut self) -> PResult<()> {
        while self.at("@") {
            self.pos += 1;
            self.ty(false)?;
            while self.at("(") {
                let close = self.closing(self.pos).ok_or_else(|| self.error("unclosed annotation args"))?;
                self.pos = close + 1;
            }
        }
        Ok(())
    }

    /// A type is opaque: consumed and reported as one `Type` leaf.
    fn ty(&mut self, allow_arrow: bool) -> PResult<AstNode> {
        let start = self.pos;
        loop {
            let Some(t) = self.peek() else { break };
            match t.kind {
                TokenKind::Identifier => self.pos += 1,
                TokenKind::Keyword if matches!(t.text.as_str(), "_" | "this" | "type" | "with" | "super") => {
                    self.pos += 1
                }
                TokenKind::Keyword if t.text == "forSome" => {
                    self.pos += 1;
                    if self.at("{") {
                        self.pos = self.closing(self.pos).ok_or_else(|| self.error("unclosed `{`"))? + 1;
                    }
                }
                TokenKind::Punct if t.text == "." => self.pos += 1,
                TokenKind::Punct if t.text == "[" => {
                    self.pos = self.closing(self.pos).ok_or_else(|| self.error("unclosed type group"))? + 1;
                }
                // Tuple and function parameter types only open a type.
                TokenKind::Punct if t.text == "(" && (self.pos == start || self.tokens[self.pos - 1].is("=>")) => {
                    self.pos = self.closing(self.pos).ok_or_else(|| self.error("unclosed type group"))? + 1;
                }
                TokenKind::Operator
                    if matches!(t.text.as_str(), "#" | "*" | "<:" | ">:" | "<%" | "+" | "-")
                        || (allow_arrow && t.text == "=>") =>
                {
                    self.pos += 1
                }
                _ => break,
            }
        }
        if self.pos == start {
            return Err(self.error("expected a type"));
        }
        Ok(AstNode::leaf("Type"))
    }

    // ---- statements -----------------------------------------------------

    fn block(&mut self) -> PResult<AstNode> {
        self.expect("{")?;
        if self.at_kw("case") {
            let cases = self.cases()?;
            self.expect("}")?;
            return Ok(AstNode::new("CaseBlock", cases));
        }
        if self.lambda_params_ahead() {
            let params = self.lambda_params()?;
            let body = self.stats_until(&["}"])?;
            self.expect("}")?;
            return Ok(AstNode::new("Lambda", vec![params, AstNode::new("Block", body)]));
        }
        let stats = self.stats_until(&["}"])?;
        self.expect("}")?;
        Ok(AstNode::new("Block", stats))
    }

    /// Statements until one of `stops` (not consumed) or `case`.
    fn stats_until(&mut self, stops: &[&str]) -> PResult<Vec<AstNode>> {
        let mut stats = Vec::new();
        loop {
            while self.eat(";") {}
            match self.peek() {
                None => return Err(self.error("unterminated block")),
                Some(t) if t.kind == TokenKind::Punct && stops.contains(&t.text.as_str()) => break,
                Some(t) if t.is_keyword("case") && !self.is_case_class() => break,
                _ => {}
            }
            let before = self.pos;
            stats.push(self.stat()?);
            if self.pos == before {
                return Err(self.error("statement made no progress"));
            }
        }
        Ok(stats)
    }

    fn is_case_class(&self) -> bool {
        self.at_kw("case")
            && self.peek_at(1).is_some_and(|t| t.is_keyword("class") || t.is_keyword("object"))
    }

    fn stat(&mut self) -> PResult<AstNode> {
        self.skip_annotations()?;
        while self.peek().is_some_and(|t| t.kind == TokenKind::Keyword && MODIFIERS.contains(&t.text.as_str())) {
            self.pos += 1;
        }
        let Some(t) = self.peek() else {
            return Err(self.error("expected statement"));
        };
        if t.kind == TokenKind::Keyword {
            match t.text.as_str() {
                "val" | "var" => return self.val_def(),
                "def" => return self.fun_def(),
                "import" => return self.import(),
                "type" => return self.type_def(),
                "class" | "object" | "trait" | "case" => return self.template_def(),
                _ => {}
            }
        }
        self.expr()
    }

    fn val_def(&mut self) -> PResult<AstNode> {
        let label = if self.bump()?.text == "val" { "ValDef" } else { "VarDef" };
        let mut children = vec![self.pattern2()?];
        while self.eat(",") {
            children.push(self.pattern2()?);
        }
        if self.eat(":") {
            children.push(self.ty(true)?);
        }
        if self.eat("=") {
            children.push(self.expr()?);
        }
        Ok(AstNode::new(label, children))
    }

    fn import(&mut self) -> PResult<AstNode> {
        self.pos += 1;
        loop {
            let t = self.bump()?;
            if !(t.kind == TokenKind::Identifier || t.is_keyword("_")) {
                return Err(ParseError { at: self.pos - 1, message: "malformed import".into() });
            }
            if !self.eat(".") {
                break;
            }
            if self.at("{") {
                self.pos = self.closing(self.pos).ok_or_else(|| self.error("unclosed import selector"))? + 1;
                break;
            }
        }
        while self.eat(",") {
            self.import_tail()?;
        }
        Ok(AstNode::leaf("Import"))
    }

    fn import_tail(&mut self) -> PResult<()> {
        loop {
            self.bump()?;
            if !self.eat(".") {
                return Ok(());
            }
        }
    }

    fn type_def(&mut self) -> PResult<AstNode> {
        self.pos += 1;
        self.bump()?;
        if self.at("[") {
            self.type_params()?;
        }
        if self.eat("=") {
            self.ty(true)?;
        } else {
            while self.eat("<:") || self.eat(">:") {
                self.ty(true)?;
            }
        }
        Ok(AstNode::leaf("TypeDef"))
    }

    fn template_def(&mut self) -> PResult<AstNode> {
        self.eat_kw("case");
        let label = match self.bump()?.text.as_str() {
            "class" => "ClassDef",
            "object" => "ObjectDef",
            "trait" => "TraitDef",
            _ => return Err(ParseError { at: self.pos - 1, message: "expected template".into() }),
        };
        self.bump()?;
        let mut children = Vec::new();
        if self.at("[") {
            children.push(self.type_params()?);
        }
        while self.at("(") {
            children.push(self.param_clause()?);
        }
        if self.eat_kw("extends") {
            children.push(self.parents()?);
        }
        if self.at("{") {
            children.push(self.template_body()?);
        }
        Ok(AstNode::new(label, children))
    }

    fn parents(&mut self) -> PResult<AstNode> {
        let mut kids = vec![self.ty(false)?];
        while self.at("(") {
            kids.push(self.args()?);
        }
        while self.eat_kw("with") {
            kids.push(self.ty(false)?);
        }
        Ok(AstNode::new("Parents", kids))
    }

    fn template_body(&mut self) -> PResult<AstNode> {
        self.expect("{")?;
        // Self type: `{ self: T => ... }`.
        if self.peek().is_some_and(|t| t.kind == TokenKind::Identifier || t.is_keyword("this")) {
            if let Some(arrow) = self.tokens[self.pos..].iter().take(8).position(|t| t.is("=>")) {
                if self.tokens[self.pos + 1].is(":") || arrow == 1 {
                    self.pos += arrow + 1;
                }
            }
        }
        let stats = self.stats_until(&["}"])?;
        self.expect("}")?;
        Ok(AstNode::new("TemplateBody", stats))
    }

    fn cases(&mut self) -> PResult<Vec<AstNode>> {
        let mut cases = Vec::new();
        while self.at_kw("case") && !self.is_case_class() {
            self.pos += 1;
            let mut kids = vec![self.pattern()?];
            if self.eat_kw("if") {
                kids.push(AstNode::new("Guard", vec![self.postfix_expr()?]));
            }
            self.expect("=>")?;
            let body = self.stats_until(&["}"])?;
            kids.push(AstNode::new("CaseBody", body));
            cases.push(AstNode::new("Case", kids));
        }
        if cases.is_empty() {
            return Err(self.error("expected `case`"));
        }
        Ok(cases)
    }

    // ---- expressions ----------------------------------------------------

    fn starts_operand(t: &Token) -> bool {
        match t.kind {
            TokenKind::Identifier | TokenKind::Literal => true,
            TokenKind::Keyword => matches!(
                t.text.as_str(),
                "this" | "super" | "new" | "_" | "if" | "while" | "for" | "try" | "throw" | "do"
                    | "return"
            ),
            TokenKind::Punct => matches!(t.text.as_str(), "(" | "{"),
            TokenKind::Operator => matches!(t.text.as_str(), "-" | "+" | "!" | "~"),
            TokenKind::Unknown => false,
        }
    }

    fn expr(&mut self) -> PResult<AstNode> {
        let Some(t) = self.peek() else {
            return Err(self.error("expected expression"));
        };
        if t.kind == TokenKind::Keyword {
            match t.text.as_str() {
                "if" => return self.if_expr(),
                "while" => {
                    self.pos += 1;
                    let cond = self.paren_expr()?;
                    let body = self.expr()?;
                    return Ok(AstNode::new("While", vec![cond, body]));
                }
                "do" => {
                    self.pos += 1;
                    let body = self.expr()?;
                    self.eat(";");
                    if !self.eat_kw("while") {
                        return Err(self.error("expected `while` after `do` body"));
                    }
                    let cond = self.paren_expr()?;
                    return Ok(AstNode::new("DoWhile", vec![body, cond]));
                }
                "for" => return self.for_expr(),
                "try" => return self.try_expr(),
                "throw" => {
                    self.pos += 1;
                    return Ok(AstNode::new("Throw", vec![self.expr()?]));
                }
                "return" => {
                    self.pos += 1;
                    let kids = if self.peek().is_some_and(Self::starts_operand) {
                        vec![self.expr()?]
                    } else {
                        Vec::new()
                    };
                    return Ok(AstNode::new("Return", kids));
                }
                _ => {}
            }
        }
        if let Some(lambda) = self.try_lambda()? {
            return Ok(lambda);
        }
        let e = self.postfix_expr()?;
        if self.at("=") {
            self.pos += 1;
            let rhs = self.expr()?;
            return Ok(AstNode::new("Assign", vec![e, rhs]));
        }
        if self.at(":") {
            self.pos += 1;
            if self.at_kw("_") && self.peek_at(1).is_some_and(|t| t.is("*")) {
                self.pos += 2;
                return Ok(AstNode::new("SeqArg", vec![e]));
            }
            let t = self.ty(false)?;
            return Ok(AstNode::new("Typed", vec![e, t]));
        }
        Ok(e)
    }

    fn paren_expr(&mut self) -> PResult<AstNode> {
        self.expect("(")?;
        let e = self.expr()?;
        self.expect(")")?;
        Ok(e)
    }

    fn if_expr(&mut self) -> PResult<AstNode> {
        self.pos += 1;
        let mut kids = vec![self.paren_expr()?, self.expr()?];
        let save = self.pos;
        self.eat(";");
        if self.eat_kw("else") {
            kids.push(self.expr()?);
        } else {
            self.pos = save;
        }
        Ok(AstNode::new("If", kids))
    }

    fn for_expr(&mut self) -> PResult<AstNode> {
        self.pos += 1;
        let close = match self.peek() {
            Some(t) if t.is("(") => ")",
            Some(t) if t.is("{") => "}",
            _ => return Err(self.error("expected enumerators")),
        };
        self.pos += 1;
        let mut kids = Vec::new();
        loop {
            while self.eat(";") {}
            if self.eat(close) {
                break;
            }
            if self.eat_kw("if") {
                kids.push(AstNode::new("Guard", vec![self.postfix_expr()?]));
                continue;
            }
            self.eat_kw("val");
            let pat = self.pattern1()?;
            if self.eat("<-") {
                kids.push(AstNode::new("Generator", vec![pat, self.expr()?]));
            } else if self.eat("=") {
                kids.push(AstNode::new("ForVal", vec![pat, self.expr()?]));
            } else {
                return Err(self.error("expected `<-` or `=` in enumerator"));
            }
        }
        if self.eat_kw("yield") {
            kids.push(AstNode::new("Yield", vec![self.expr()?]));
        } else {
            kids.push(AstNode::new("Do", vec![self.expr()?]));
        }
        Ok(AstNode::new("For", kids))
    }

    fn try_expr(&mut self) -> PResult<AstNode> {
        self.pos += 1;
        let mut kids = vec![self.expr()?];
        if self.eat_kw("catch") {
            let handler = if self.at("{") { self.block()? } else { self.expr()? };
            kids.push(AstNode::new("Catch", vec![handler]));
        }
        if self.eat_kw("finally") {
            kids.push(AstNode::new("Finally", vec![self.expr()?]));
        }
        Ok(AstNode::new("Try", kids))
    }

    /// `x =>`, `_ =>`, `(a, b: T) =>`, `implicit x =>` at the cursor.
    fn lambda_params_ahead(&self) -> bool {
        let skip = usize::from(self.at_kw("implicit"));
        let Some(t) = self.peek_at(skip) else { return false };
        if t.kind == TokenKind::Identifier || t.is_keyword("_") {
            return self.peek_at(skip + 1).is_some_and(|n| n.is("=>"));
        }
        if t.is("(") {
            return self
                .closing(self.pos + skip)
                .and_then(|close| self.tokens.get(close + 1))
                .is_some_and(|n| n.is("=>"));
        }
        false
    }

    fn lambda_params(&mut self) -> PResult<AstNode> {
        self.eat_kw("implicit");
        let params = if self.at("(") {
            self.param_clause()?
        } else {
            self.pos += 1;
            AstNode::new("Params", vec![AstNode::leaf("Param")])
        };
        self.expect("=>")?;
        Ok(params)
    }

    fn try_lambda(&mut self) -> PResult<Option<AstNode>> {
        if !self.lambda_params_ahead() {
            return Ok(None);
        }
        let params = self.lambda_params()?;
        let body = self.expr()?;
        Ok(Some(AstNode::new("Lambda", vec![params, body])))
    }

    fn postfix_expr(&mut self) -> PResult<AstNode> {
        let mut e = self.infix_expr()?;
        while self.at_kw("match") {
            self.pos += 1;
            self.expect("{")?;
            let mut kids = vec![e];
            kids.extend(self.cases()?);
            self.expect("}")?;
            e = AstNode::new("Match", kids);
        }
        Ok(e)
    }

    fn is_infix_op(&self) -> bool {
        let Some(t) = self.peek() else { return false };
        let next_operand = self.peek_at(1).is_some_and(Self::starts_operand);
        match t.kind {
            TokenKind::Operator => {
                !matches!(t.text.as_str(), "=" | "=>" | "<-" | ":" | "@" | "#" | "<:" | ">:" | "<%")
                    && next_operand
            }
            TokenKind::Identifier => next_operand,
            _ => false,
        }
    }

    fn infix_expr(&mut self) -> PResult<AstNode> {
        let mut lhs = self.prefix_expr()?;
        while self.is_infix_op() {
            self.pos += 1;
            let rhs = self.prefix_expr()?;
            lhs = AstNode::new("Infix", vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn prefix_expr(&mut self) -> PResult<AstNode> {
        let prefix = self.peek().is_some_and(|t| {
            t.kind == TokenKind::Operator && matches!(t.text.as_str(), "-" | "+" | "!" | "~")
        }) && self.peek_at(1).is_some_and(Self::starts_operand);
        if prefix {
            self.pos += 1;
            let operand = self.simple_expr()?;
            return Ok(AstNode::new("Prefix", vec![operand]));
        }
        self.simple_expr()
    }

    fn simple_expr(&mut self) -> PResult<AstNode> {
        let t = self.peek().ok_or_else(|| self.error("expected expression"))?;
        let mut e = match t.kind {
            TokenKind::Literal => {
                self.pos += 1;
                AstNode::leaf("Literal")
            }
            TokenKind::Identifier => {
                self.pos += 1;
                AstNode::leaf("Ident")
            }
            TokenKind::Keyword => match t.text.as_str() {
                "this" => {
                    self.pos += 1;
                    AstNode::leaf("This")
                }
                "super" => {
                    self.pos += 1;
                    AstNode::leaf("Super")
                }
                "_" => {
                    self.pos += 1;
                    AstNode::leaf("Placeholder")
                }
                "new" => self.new_expr()?,
                "if" | "while" | "for" | "try" | "throw" | "do" | "return" => self.expr()?,
                _ => return Err(self.error("unexpected keyword")),
            },
            TokenKind::Punct if t.text == "(" => {
                self.pos += 1;
                if self.eat(")") {
                    AstNode::leaf("Unit")
                } else {
                    let mut items = vec![self.expr()?];
                    while self.eat(",") {
                        items.push(self.expr()?);
                    }
                    self.expect(")")?;
                    if items.len() == 1 {
                        AstNode::new("Parens", items)
                    } else {
                        AstNode::new("Tuple", items)
                    }
                }
            }
            TokenKind::Punct if t.text == "{" => self.block()?,
            _ => return Err(self.error("unexpected token in expression")),
        };
        loop {
            let Some(t) = self.peek() else { break };
            if t.is(".") && t.kind == TokenKind::Punct {
                self.pos += 1;
                let sel = self.bump()?;
                if !matches!(sel.kind, TokenKind::Identifier | TokenKind::Keyword | TokenKind::Operator) {
                    return Err(ParseError { at: self.pos - 1, message: "expected member name".into() });
                }
                e = AstNode::new("Select", vec![e]);
            } else if t.is("[") && t.kind == TokenKind::Punct {
                self.pos += 1;
                let mut kids = vec![e, self.ty(true)?];
                while self.eat(",") {
                    kids.push(self.ty(true)?);
                }
                self.expect("]")?;
                e = AstNode::new("TypeApply", kids);
            } else if t.is("(") && t.kind == TokenKind::Punct {
                let args = self.args()?;
                e = AstNode::new("Apply", vec![e, args]);
            } else if t.is("{") && t.kind == TokenKind::Punct {
                let arg = self.block()?;
                e = AstNode::new("Apply", vec![e, AstNode::new("Args", vec![arg])]);
            } else if t.is_keyword("_") && !self.peek_at(1).is_some_and(Self::starts_operand) {
                // Eta expansion: `f _`.
                self.pos += 1;
                e = AstNode::new("Eta", vec![e]);
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn args(&mut self) -> PResult<AstNode> {
        self.expect("(")?;
        let mut items = Vec::new();
        while !self.at(")") {
            items.push(self.expr()?);
            if !self.eat(",") {
                break;
            }
        }
        self.expect(")")?;
        Ok(AstNode::new("Args", items))
    }

    fn new_expr(&mut self) -> PResult<AstNode> {
        self.pos += 1;
        let mut kids = Vec::new();
        if !self.at("{") {
            kids.push(self.ty(false)?);
            while self.at("(") {
                kids.push(self.args()?);
            }
            while self.eat_kw("with") {
                kids.push(self.ty(false)?);
            }
        }
        if self.at("{") {
            kids.push(self.template_body()?);
        }
        Ok(AstNode::new("New", kids))
    }

    // ---- patterns -------------------------------------------------------

    fn pattern(&mut self) -> PResult<AstNode> {
        let first = self.pattern1()?;
        if !self.at("|") {
            return Ok(first);
        }
        let mut alts = vec![first];
        while self.eat("|") {
            alts.push(self.pattern1()?);
        }
        Ok(AstNode::new("PatAlt", alts))
    }

    fn pattern1(&mut self) -> PResult<AstNode> {
        let typed = self.peek().is_some_and(|t| t.kind == TokenKind::Identifier || t.is_keyword("_"))
            && self.peek_at(1).is_some_and(|t| t.is(":"));
        if typed {
            self.pos += 2;
            let t = self.ty(false)?;
            return Ok(AstNode::new("PatTyped", vec![t]));
        }
        self.pattern2()
    }

    fn pattern2(&mut self) -> PResult<AstNode> {
        let bind = self.peek().is_some_and(|t| t.kind == TokenKind::Identifier)
            && self.peek_at(1).is_some_and(|t| t.is("@"));
        if bind {
            self.pos += 2;
            let inner = self.pattern3()?;
            return Ok(AstNode::new("PatBind", vec![inner]));
        }
        self.pattern3()
    }

    fn pattern3(&mut self) -> PResult<AstNode> {
        let mut lhs = self.simple_pattern()?;
        loop {
            let infix = self.peek().is_some_and(|t| {
                (t.kind == TokenKind::Operator
                    && !matches!(t.text.as_str(), "|" | "=>" | "@" | ":" | "=" | "<-"))
                    || (t.kind == TokenKind::Identifier
                        && self.peek_at(1).is_some_and(|n| {
                            matches!(n.kind, TokenKind::Identifier | TokenKind::Literal)
                                || n.is("(")
                                || n.is_keyword("_")
                        }))
            });
            if !infix {
                break;
            }
            self.pos += 1;
            let rhs = self.simple_pattern()?;
            lhs = AstNode::new("PatInfix", vec![lhs, rhs]);
        }
        Ok(lhs)
    }

    fn simple_pattern(&mut self) -> PResult<AstNode> {
        let t = self.peek().ok_or_else(|| self.error("expected pattern"))?;
        match t.kind {
            TokenKind::Keyword if t.text == "_" => {
                self.pos += 1;
                if self.at("*") {
                    self.pos += 1;
                    return Ok(AstNode::leaf("PatSeqWildcard"));
                }
                Ok(AstNode::leaf("PatWildcard"))
            }
            TokenKind::Literal => {
                self.pos += 1;
                Ok(AstNode::leaf("PatLiteral"))
            }
            TokenKind::Operator if t.text == "-" && self.peek_at(1).is_some_and(|n| n.kind == TokenKind::Literal) => {
                self.pos += 2;
                Ok(AstNode::leaf("PatLiteral"))
            }
            TokenKind::Identifier | TokenKind::Keyword if t.kind == TokenKind::Identifier || t.text == "this" => {
                self.pos += 1;
                while self.at(".") {
                    self.pos += 1;
                    self.bump()?;
                }
                if self.at("[") {
                    self.pos = self.closing(self.pos).ok_or_else(|| self.error("unclosed `[`"))? + 1;
                }
                if self.at("(") {
                    self.pos += 1;
                    let mut kids = Vec::new();
                    while !self.at(")") {
                        kids.push(self.pattern()?);
                        if !self.eat(",") {
                            break;
                        }
                    }
                    self.expect(")")?;
                    return Ok(AstNode::new("PatApply", kids));
                }
                Ok(AstNode::leaf("PatIdent"))
            }
            TokenKind::Punct if t.text == "(" => {
                self.pos += 1;
                let mut kids = Vec::new();
                while !self.at(")") {
                    kids.push(self.pattern()?);
                    if !self.eat(",") {
                        break;
                    }
                }
                self.expect(")")?;
                if kids.len() == 1 {
                    Ok(kids.pop().expect("one element"))
                } else {
                    Ok(AstNode::new("PatTuple", kids))
                }
            }
            _ => Err(self.error("unexpected token in pattern")),
        }
    }
}
