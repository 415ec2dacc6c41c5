//! Recursive-descent parser for the supported Python subset.
//!
//! Covers the statement and expression grammar of Python 3 minus `match`
//! statements and the contents of f-string replacement fields (f-strings are
//! kept as opaque literals). Context checks that CPython performs at compile
//! time, such as `return` outside a function, are not performed.

use super::ast::*;
use super::lexer::{is_keyword, tokenize, Token, TokenKind};
use super::SyntaxError;

type PResult<T> = Result<T, SyntaxError>;

pub fn parse_module(src: &str) -> PResult<Module> {
    let tokens: Vec<Token> = tokenize(src)?
        .into_iter()
        .filter(|t| !matches!(t.kind, TokenKind::Comment | TokenKind::Nl))
        .collect();
    let mut parser = Parser { src, tokens, pos: 0, prev_end: 0 };
    parser.module()
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    prev_end: usize,
}

const AUG_OPS: &[&str] = &["+=", "-=", "*=", "/=", "//=", "%=", "**=", ">>=", "<<=", "&=", "|=", "^=", "@="];

impl<'a> Parser<'a> {
    // ---- token helpers -------------------------------------------------

    fn peek(&self) -> Token {
        self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek_at(&self, offset: usize) -> Token {
        self.tokens[(self.pos + offset).min(self.tokens.len() - 1)]
    }

    fn text(&self, t: Token) -> &'a str {
        t.text(self.src)
    }

    fn advance(&mut self) -> Token {
        let t = self.peek();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        if !matches!(t.kind, TokenKind::Newline | TokenKind::Indent | TokenKind::Dedent | TokenKind::EndMarker) {
            self.prev_end = t.end;
        }
        t
    }

    fn at_op(&self, op: &str) -> bool {
        self.peek().is_op(self.src, op)
    }

    fn at_kw(&self, kw: &str) -> bool {
        let t = self.peek();
        t.kind == TokenKind::Name && self.text(t) == kw
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.at_op(op) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn error_here(&self, message: impl Into<String>) -> SyntaxError {
        let t = self.peek();
        SyntaxError::new(t.line, t.col, message)
    }

    fn unexpected(&self) -> SyntaxError {
        let t = self.peek();
        match t.kind {
            TokenKind::Newline => self.error_here("invalid syntax: unexpected end of line"),
            TokenKind::EndMarker => self.error_here("invalid syntax: unexpected end of input"),
            TokenKind::Indent => self.error_here("unexpected indent"),
            TokenKind::Dedent => self.error_here("unexpected unindent"),
            _ => self.error_here(format!("invalid syntax near '{}'", self.text(t))),
        }
    }

    fn expect_op(&mut self, op: &str) -> PResult<Token> {
        if self.at_op(op) {
            Ok(self.advance())
        } else {
            Err(self.error_here(format!("expected '{op}'")).with_context(self.describe()))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Token> {
        if self.at_kw(kw) {
            Ok(self.advance())
        } else {
            Err(self.error_here(format!("expected '{kw}'")).with_context(self.describe()))
        }
    }

    fn describe(&self) -> String {
        let t = self.peek();
        match t.kind {
            TokenKind::Newline => "end of line".into(),
            TokenKind::EndMarker => "end of input".into(),
            TokenKind::Indent => "indent".into(),
            TokenKind::Dedent => "dedent".into(),
            _ => format!("'{}'", self.text(t)),
        }
    }

    fn ident(&mut self) -> PResult<Ident> {
        let t = self.peek();
        if t.kind == TokenKind::Name && !is_keyword(self.text(t)) {
            self.advance();
            Ok(Ident { name: self.text(t).to_string(), span: Span::new(t.start, t.end) })
        } else {
            Err(self.error_here("expected identifier").with_context(self.describe()))
        }
    }

    fn at_ident(&self) -> bool {
        let t = self.peek();
        t.kind == TokenKind::Name && !is_keyword(self.text(t))
    }

    fn span_from(&self, start: usize) -> Span {
        Span::new(start, self.prev_end.max(start))
    }

    // ---- statements ----------------------------------------------------

    fn module(&mut self) -> PResult<Module> {
        let mut body = Vec::new();
        loop {
            match self.peek().kind {
                TokenKind::EndMarker => break,
                TokenKind::Newline => {
                    self.advance();
                }
                TokenKind::Indent => return Err(self.error_here("unexpected indent")),
                TokenKind::Dedent => return Err(self.error_here("unexpected unindent")),
                _ => body.extend(self.statement()?),
            }
        }
        Ok(Module { body })
    }

    fn statement(&mut self) -> PResult<Vec<Stmt>> {
        let t = self.peek();
        if t.kind == TokenKind::Name {
            match self.text(t) {
                "def" | "class" | "if" | "while" | "for" | "with" | "try" => return Ok(vec![self.compound(Vec::new())?]),
                "async" if matches!(self.text(self.peek_at(1)), "def" | "for" | "with") => {
                    return Ok(vec![self.compound(Vec::new())?])
                }
                _ => {}
            }
        } else if t.is_op(self.src, "@") {
            let decorators = self.decorators()?;
            return Ok(vec![self.compound(decorators)?]);
        }
        self.simple_statements()
    }

    fn decorators(&mut self) -> PResult<Vec<Expr>> {
        let mut decorators = Vec::new();
        while self.eat_op("@") {
            decorators.push(self.named_expression()?);
            self.expect_newline()?;
        }
        if !(self.at_kw("def") || self.at_kw("class") || (self.at_kw("async") && self.text(self.peek_at(1)) == "def")) {
            return Err(self.error_here("decorator must be followed by 'def' or 'class'"));
        }
        Ok(decorators)
    }

    fn expect_newline(&mut self) -> PResult<()> {
        match self.peek().kind {
            TokenKind::Newline => {
                self.advance();
                Ok(())
            }
            TokenKind::EndMarker => Ok(()),
            _ => Err(self.unexpected()),
        }
    }

    fn stmt(&self, kind: StmtKind, start: Token) -> Stmt {
        Stmt { kind, span: self.span_from(start.start), line: start.line, col: start.col }
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_op(":")?;
        if self.peek().kind != TokenKind::Newline {
            return self.simple_statements();
        }
        self.advance();
        if self.peek().kind != TokenKind::Indent {
            return Err(self.error_here("expected an indented block"));
        }
        self.advance();
        let mut body = Vec::new();
        loop {
            match self.peek().kind {
                TokenKind::Dedent => {
                    self.advance();
                    break;
                }
                TokenKind::EndMarker => break,
                TokenKind::Newline => {
                    self.advance();
                }
                TokenKind::Indent => return Err(self.error_here("unexpected indent")),
                _ => body.extend(self.statement()?),
            }
        }
        Ok(body)
    }

    fn compound(&mut self, decorators: Vec<Expr>) -> PResult<Stmt> {
        let start = self.peek();
        let is_async = self.eat_kw("async");
        let kw = self.text(self.peek());
        let kind = match kw {
            "def" => StmtKind::FunctionDef(self.function_def(decorators, is_async)?),
            "class" => {
                self.advance();
                let name = self.ident()?;
                let bases = if self.eat_op("(") { self.call_arguments()? } else { Vec::new() };
                let body = self.block()?;
                StmtKind::ClassDef(ClassDef { name, bases, decorators, body })
            }
            "if" => return self.if_statement(),
            "while" => {
                self.advance();
                let test = self.named_expression()?;
                let body = self.block()?;
                let orelse = self.else_block()?;
                StmtKind::While { test, body, orelse }
            }
            "for" => {
                self.advance();
                let target = self.target_list()?;
                self.expect_kw("in")?;
                let iter = self.star_expressions()?;
                let body = self.block()?;
                let orelse = self.else_block()?;
                StmtKind::For { target, iter, body, orelse, is_async }
            }
            "with" => {
                self.advance();
                let items = self.with_items()?;
                let body = self.block()?;
                StmtKind::With { items, body, is_async }
            }
            "try" => {
                self.advance();
                let body = self.block()?;
                let mut handlers = Vec::new();
                while self.at_kw("except") {
                    self.advance();
                    self.eat_op("*");
                    let (kind, name) = if self.at_op(":") {
                        (None, None)
                    } else {
                        let kind = self.expression()?;
                        let kind = if self.at_op(",") {
                            // `except A, B:` without parentheses is Python 2 syntax.
                            return Err(self.error_here("multiple exception types must be parenthesized"));
                        } else {
                            kind
                        };
                        let name = if self.eat_kw("as") { Some(self.ident()?) } else { None };
                        (Some(kind), name)
                    };
                    let body = self.block()?;
                    handlers.push(ExceptHandler { kind, name, body });
                }
                let orelse = if !handlers.is_empty() { self.else_block()? } else { Vec::new() };
                let finalbody = if self.eat_kw("finally") { self.block()? } else { Vec::new() };
                if handlers.is_empty() && finalbody.is_empty() {
                    return Err(self.error_here("expected 'except' or 'finally' block"));
                }
                StmtKind::Try { body, handlers, orelse, finalbody }
            }
            _ => return Err(self.unexpected()),
        };
        Ok(self.stmt(kind, start))
    }

    fn if_statement(&mut self) -> PResult<Stmt> {
        let start = self.advance();
        let test = self.named_expression()?;
        let body = self.block()?;
        let orelse = if self.at_kw("elif") {
            vec![self.if_statement()?]
        } else {
            self.else_block()?
        };
        Ok(self.stmt(StmtKind::If { test, body, orelse }, start))
    }

    fn else_block(&mut self) -> PResult<Vec<Stmt>> {
        if self.eat_kw("else") {
            self.block()
        } else {
            Ok(Vec::new())
        }
    }

    fn with_items(&mut self) -> PResult<Vec<WithItem>> {
        if self.at_op("(") {
            // Parenthesized with-items; fall back to a plain expression when
            // the parenthesized form does not fit.
            let saved = (self.pos, self.prev_end);
            if let Ok(items) = self.parenthesized_with_items() {
                if self.at_op(":") {
                    return Ok(items);
                }
            }
            (self.pos, self.prev_end) = saved;
        }
        let mut items = vec![self.with_item()?];
        while self.eat_op(",") {
            items.push(self.with_item()?);
        }
        Ok(items)
    }

    fn parenthesized_with_items(&mut self) -> PResult<Vec<WithItem>> {
        self.expect_op("(")?;
        let mut items = vec![self.with_item()?];
        while self.eat_op(",") {
            if self.at_op(")") {
                break;
            }
            items.push(self.with_item()?);
        }
        self.expect_op(")")?;
        Ok(items)
    }

    fn with_item(&mut self) -> PResult<WithItem> {
        let context = self.expression()?;
        let target = if self.eat_kw("as") {
            let t = self.star_target()?;
            validate_target(&t, self)?;
            Some(t)
        } else {
            None
        };
        Ok(WithItem { context, target })
    }

    fn function_def(&mut self, decorators: Vec<Expr>, is_async: bool) -> PResult<FunctionDef> {
        self.expect_kw("def")?;
        let name = self.ident()?;
        self.expect_op("(")?;
        let params = self.parameters(true, ")")?;
        self.expect_op(")")?;
        let returns = if self.eat_op("->") { Some(self.expression()?) } else { None };
        let body = self.block()?;
        Ok(FunctionDef { name, params, returns, decorators, body, is_async })
    }

    fn parameters(&mut self, annotations: bool, close: &str) -> PResult<Vec<Param>> {
        let mut params: Vec<Param> = Vec::new();
        let mut star_seen = false;
        let mut bare_star_pending = false;
        let mut slash_seen = false;
        let mut default_seen = false;
        let mut kwargs_seen = false;
        while !self.at_op(close) {
            if kwargs_seen {
                return Err(self.error_here("arguments cannot follow var-keyword argument"));
            }
            if self.eat_op("/") {
                if slash_seen || star_seen || params.is_empty() {
                    return Err(self.error_here("invalid position for '/'"));
                }
                slash_seen = true;
                for p in params.iter_mut() {
                    p.kind = ParamKind::PositionalOnly;
                }
            } else if self.eat_op("**") {
                let name = self.ident()?;
                let annotation = self.param_annotation(annotations)?;
                params.push(Param { name, kind: ParamKind::VarKeyword, default: None, annotation });
                kwargs_seen = true;
            } else if self.at_op("*") {
                if star_seen {
                    return Err(self.error_here("* argument may appear only once"));
                }
                self.advance();
                star_seen = true;
                if self.at_op(",") || self.at_op(close) {
                    bare_star_pending = true;
                } else {
                    let name = self.ident()?;
                    let annotation = if annotations && self.eat_op(":") {
                        if self.at_op("*") {
                            let start = self.advance();
                            let inner = self.expression()?;
                            Some(Expr {
                                kind: ExprKind::Starred(Box::new(inner)),
                                span: self.span_from(start.start),
                            })
                        } else {
                            Some(self.expression()?)
                        }
                    } else {
                        None
                    };
                    params.push(Param { name, kind: ParamKind::VarPositional, default: None, annotation });
                }
            } else {
                let name = self.ident()?;
                let annotation = self.param_annotation(annotations)?;
                let default = if self.eat_op("=") { Some(self.expression()?) } else { None };
                let kind = if star_seen { ParamKind::KeywordOnly } else { ParamKind::PositionalOrKeyword };
                if kind == ParamKind::PositionalOrKeyword {
                    if default.is_some() {
                        default_seen = true;
                    } else if default_seen {
                        return Err(SyntaxError::new(
                            self.line_of(name.span.start),
                            self.col_of(name.span.start),
                            "non-default argument follows default argument",
                        ));
                    }
                }
                if params.iter().any(|p| p.name.name == name.name) {
                    return Err(SyntaxError::new(
                        self.line_of(name.span.start),
                        self.col_of(name.span.start),
                        format!("duplicate argument '{}' in function definition", name.name),
                    ));
                }
                if kind == ParamKind::KeywordOnly {
                    bare_star_pending = false;
                }
                params.push(Param { name, kind, default, annotation });
            }
            if !self.eat_op(",") {
                break;
            }
        }
        if bare_star_pending {
            return Err(self.error_here("named arguments must follow bare *"));
        }
        if !self.at_op(close) {
            return Err(self.unexpected());
        }
        Ok(params)
    }

    fn param_annotation(&mut self, annotations: bool) -> PResult<Option<Expr>> {
        if annotations && self.eat_op(":") {
            Ok(Some(self.expression()?))
        } else {
            Ok(None)
        }
    }

    fn line_of(&self, offset: usize) -> u32 {
        self.src[..offset].matches('\n').count() as u32 + 1
    }

    fn col_of(&self, offset: usize) -> u32 {
        let line_start = self.src[..offset].rfind('\n').map_or(0, |i| i + 1);
        self.src[line_start..offset].chars().count() as u32
    }

    fn simple_statements(&mut self) -> PResult<Vec<Stmt>> {
        let mut stmts = vec![self.simple_statement()?];
        while self.eat_op(";") {
            if matches!(self.peek().kind, TokenKind::Newline | TokenKind::EndMarker) {
                break;
            }
            stmts.push(self.simple_statement()?);
        }
        self.expect_newline()?;
        Ok(stmts)
    }

    fn simple_statement(&mut self) -> PResult<Stmt> {
        let start = self.peek();
        let word = if start.kind == TokenKind::Name { self.text(start) } else { "" };
        let kind = match word {
            "pass" => {
                self.advance();
                StmtKind::Pass
            }
            "break" => {
                self.advance();
                StmtKind::Break
            }
            "continue" => {
                self.advance();
                StmtKind::Continue
            }
            "return" => {
                self.advance();
                let value = if self.at_statement_end() { None } else { Some(self.star_expressions()?) };
                StmtKind::Return(value)
            }
            "raise" => {
                self.advance();
                let exc = if self.at_statement_end() { None } else { Some(self.expression()?) };
                let cause = if exc.is_some() && self.eat_kw("from") { Some(self.expression()?) } else { None };
                StmtKind::Raise { exc, cause }
            }
            "global" | "nonlocal" => {
                self.advance();
                let mut names = vec![self.ident()?];
                while self.eat_op(",") {
                    names.push(self.ident()?);
                }
                if word == "global" {
                    StmtKind::Global(names)
                } else {
                    StmtKind::Nonlocal(names)
                }
            }
            "del" => {
                self.advance();
                let target = self.target_list()?;
                let targets = match target.kind {
                    ExprKind::Tuple(items) if !self.src[target.span.start..].starts_with('(') => items,
                    _ => vec![target],
                };
                for t in &targets {
                    validate_target(t, self)?;
                }
                StmtKind::Delete(targets)
            }
            "assert" => {
                self.advance();
                let test = self.expression()?;
                let msg = if self.eat_op(",") { Some(self.expression()?) } else { None };
                StmtKind::Assert { test, msg }
            }
            "import" => {
                self.advance();
                let mut names = vec![self.import_alias(false)?];
                while self.eat_op(",") {
                    names.push(self.import_alias(false)?);
                }
                StmtKind::Import(names)
            }
            "from" => StmtKind::ImportFrom(self.import_from()?),
            _ => self.expression_statement()?,
        };
        Ok(self.stmt(kind, start))
    }

    fn at_statement_end(&self) -> bool {
        matches!(self.peek().kind, TokenKind::Newline | TokenKind::EndMarker) || self.at_op(";")
    }

    fn dotted_name(&mut self) -> PResult<DottedName> {
        let first = self.ident()?;
        let start = first.span.start;
        let mut parts = vec![first];
        while self.at_op(".") {
            self.advance();
            parts.push(self.ident()?);
        }
        Ok(DottedName { parts, span: self.span_from(start) })
    }

    fn import_alias(&mut self, from_import: bool) -> PResult<ImportAlias> {
        let path = if from_import {
            let id = self.ident()?;
            let span = id.span;
            DottedName { parts: vec![id], span }
        } else {
            self.dotted_name()?
        };
        let alias = if self.eat_kw("as") { Some(self.ident()?) } else { None };
        let span = self.span_from(path.span.start);
        Ok(ImportAlias { path, alias, span })
    }

    fn import_from(&mut self) -> PResult<ImportFrom> {
        self.expect_kw("from")?;
        let mut level = 0;
        loop {
            if self.eat_op(".") {
                level += 1;
            } else if self.eat_op("...") {
                level += 3;
            } else {
                break;
            }
        }
        let module = if self.at_kw("import") { None } else { Some(self.dotted_name()?) };
        if module.is_none() && level == 0 {
            return Err(self.error_here("expected module name"));
        }
        self.expect_kw("import")?;
        if self.at_op("*") {
            let t = self.advance();
            return Ok(ImportFrom { module, level, names: Vec::new(), star: true, names_span: Span::new(t.start, t.end) });
        }
        let parenthesized = self.eat_op("(");
        let mut names = vec![self.import_alias(true)?];
        while self.eat_op(",") {
            if parenthesized && self.at_op(")") {
                break;
            }
            names.push(self.import_alias(true)?);
        }
        if parenthesized {
            self.expect_op(")")?;
        }
        let names_span = names[0].span.join(names.last().unwrap().span);
        Ok(ImportFrom { module, level, names, star: false, names_span })
    }

    fn expression_statement(&mut self) -> PResult<StmtKind> {
        let first = if self.at_kw("yield") { self.yield_expression()? } else { self.star_expressions()? };
        if self.at_op("=") {
            let mut targets = vec![first];
            let mut value;
            loop {
                self.expect_op("=")?;
                value = if self.at_kw("yield") { self.yield_expression()? } else { self.star_expressions()? };
                if self.at_op("=") {
                    targets.push(value);
                } else {
                    break;
                }
            }
            for t in &targets {
                validate_target(t, self)?;
            }
            return Ok(StmtKind::Assign { targets, value });
        }
        let t = self.peek();
        if t.kind == TokenKind::Op && AUG_OPS.contains(&self.text(t)) {
            if !matches!(first.kind, ExprKind::Name(_) | ExprKind::Attribute { .. } | ExprKind::Subscript { .. }) {
                return Err(self.error_here("illegal expression for augmented assignment"));
            }
            self.advance();
            let value = if self.at_kw("yield") { self.yield_expression()? } else { self.star_expressions()? };
            return Ok(StmtKind::AugAssign { target: first, value });
        }
        if self.at_op(":") {
            if !matches!(first.kind, ExprKind::Name(_) | ExprKind::Attribute { .. } | ExprKind::Subscript { .. }) {
                return Err(self.error_here("illegal target for annotation"));
            }
            self.advance();
            let annotation = self.expression()?;
            let value = if self.eat_op("=") {
                Some(if self.at_kw("yield") { self.yield_expression()? } else { self.star_expressions()? })
            } else {
                None
            };
            return Ok(StmtKind::AnnAssign { target: first, annotation, value });
        }
        if !self.at_statement_end() {
            return Err(self.unexpected());
        }
        if let ExprKind::Starred(_) = first.kind {
            return Err(self.error_here("can't use starred expression here"));
        }
        Ok(StmtKind::Expr(first))
    }

    // ---- expressions ---------------------------------------------------

    fn compound_expr(&self, label: &'static str, children: Vec<Expr>, start: usize) -> Expr {
        Expr { kind: ExprKind::Compound { label, children }, span: self.span_from(start) }
    }

    fn yield_expression(&mut self) -> PResult<Expr> {
        let start = self.expect_kw("yield")?.start;
        if self.eat_kw("from") {
            let value = self.expression()?;
            return Ok(self.compound_expr("yield from", vec![value], start));
        }
        let children = if self.at_statement_end() || self.at_op(")") || self.at_op("=") {
            Vec::new()
        } else {
            vec![self.star_expressions()?]
        };
        Ok(self.compound_expr("yield", children, start))
    }

    /// Comma-separated expressions, producing a tuple when a comma appears.
    fn star_expressions(&mut self) -> PResult<Expr> {
        let start = self.peek().start;
        let first = self.star_expression()?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_expression_end() {
                break;
            }
            items.push(self.star_expression()?);
        }
        Ok(Expr { kind: ExprKind::Tuple(items), span: self.span_from(start) })
    }

    fn at_expression_end(&self) -> bool {
        let t = self.peek();
        if matches!(t.kind, TokenKind::Newline | TokenKind::EndMarker) {
            return true;
        }
        if t.kind == TokenKind::Op {
            let s = self.text(t);
            return matches!(s, "=" | ")" | "]" | "}" | ":" | ";") || AUG_OPS.contains(&s);
        }
        t.kind == TokenKind::Name && matches!(self.text(t), "in" | "for" | "if" | "async")
    }

    fn star_expression(&mut self) -> PResult<Expr> {
        if self.at_op("*") {
            let start = self.advance().start;
            let inner = self.bitor()?;
            return Ok(Expr { kind: ExprKind::Starred(Box::new(inner)), span: self.span_from(start) });
        }
        self.expression()
    }

    fn star_named_expression(&mut self) -> PResult<Expr> {
        if self.at_op("*") {
            return self.star_expression();
        }
        self.named_expression()
    }

    fn named_expression(&mut self) -> PResult<Expr> {
        if self.at_ident() && self.peek_at(1).is_op(self.src, ":=") {
            let start = self.peek().start;
            let target = self.ident()?;
            self.advance();
            let value = self.expression()?;
            let target = Expr { kind: ExprKind::Name(target.name), span: target.span };
            return Ok(self.compound_expr(":=", vec![target, value], start));
        }
        self.expression()
    }

    fn expression(&mut self) -> PResult<Expr> {
        if self.at_kw("lambda") {
            return self.lambda();
        }
        let start = self.peek().start;
        let body = self.disjunction()?;
        if self.at_kw("if") {
            // Only a conditional expression when an `else` follows; inside
            // comprehensions `if` starts a filter clause instead.
            let saved = (self.pos, self.prev_end);
            self.advance();
            let test = self.disjunction()?;
            if self.eat_kw("else") {
                let orelse = self.expression()?;
                return Ok(self.compound_expr("ifexp", vec![body, test, orelse], start));
            }
            (self.pos, self.prev_end) = saved;
        }
        Ok(body)
    }

    fn lambda(&mut self) -> PResult<Expr> {
        let start = self.expect_kw("lambda")?.start;
        let params = self.parameters(false, ":")?;
        self.expect_op(":")?;
        let body = self.expression()?;
        Ok(Expr { kind: ExprKind::Lambda { params, body: Box::new(body) }, span: self.span_from(start) })
    }

    fn disjunction(&mut self) -> PResult<Expr> {
        let start = self.peek().start;
        let first = self.conjunction()?;
        if !self.at_kw("or") {
            return Ok(first);
        }
        let mut children = vec![first];
        while self.eat_kw("or") {
            children.push(self.conjunction()?);
        }
        Ok(self.compound_expr("or", children, start))
    }

    fn conjunction(&mut self) -> PResult<Expr> {
        let start = self.peek().start;
        let first = self.inversion()?;
        if !self.at_kw("and") {
            return Ok(first);
        }
        let mut children = vec![first];
        while self.eat_kw("and") {
            children.push(self.inversion()?);
        }
        Ok(self.compound_expr("and", children, start))
    }

    fn inversion(&mut self) -> PResult<Expr> {
        if self.at_kw("not") {
            let start = self.advance().start;
            let inner = self.inversion()?;
            return Ok(self.compound_expr("not", vec![inner], start));
        }
        self.comparison()
    }

    fn comparison_operator(&mut self) -> bool {
        let t = self.peek();
        let s = self.text(t);
        match t.kind {
            TokenKind::Op if matches!(s, "==" | "!=" | "<" | ">" | "<=" | ">=") => {
                self.advance();
                true
            }
            TokenKind::Name if s == "in" => {
                self.advance();
                true
            }
            TokenKind::Name if s == "is" => {
                self.advance();
                self.eat_kw("not");
                true
            }
            TokenKind::Name if s == "not" && self.text(self.peek_at(1)) == "in" => {
                self.advance();
                self.advance();
                true
            }
            _ => false,
        }
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let start = self.peek().start;
        let first = self.bitor()?;
        let mut children = vec![first];
        while self.comparison_operator() {
            children.push(self.bitor()?);
        }
        if children.len() == 1 {
            return Ok(children.pop().unwrap());
        }
        Ok(self.compound_expr("compare", children, start))
    }

    fn binary_level(
        &mut self,
        ops: &[&str],
        label: &'static str,
        next: fn(&mut Self) -> PResult<Expr>,
    ) -> PResult<Expr> {
        let start = self.peek().start;
        let mut left = next(self)?;
        loop {
            let t = self.peek();
            if t.kind == TokenKind::Op && ops.contains(&self.text(t)) {
                self.advance();
                let right = next(self)?;
                left = self.compound_expr(label, vec![left, right], start);
            } else {
                return Ok(left);
            }
        }
    }

    fn bitor(&mut self) -> PResult<Expr> {
        self.binary_level(&["|"], "binop", Self::bitxor)
    }

    fn bitxor(&mut self) -> PResult<Expr> {
        self.binary_level(&["^"], "binop", Self::bitand)
    }

    fn bitand(&mut self) -> PResult<Expr> {
        self.binary_level(&["&"], "binop", Self::shift)
    }

    fn shift(&mut self) -> PResult<Expr> {
        self.binary_level(&["<<", ">>"], "binop", Self::sum)
    }

    fn sum(&mut self) -> PResult<Expr> {
        self.binary_level(&["+", "-"], "binop", Self::term)
    }

    fn term(&mut self) -> PResult<Expr> {
        self.binary_level(&["*", "/", "//", "%", "@"], "binop", Self::factor)
    }

    fn factor(&mut self) -> PResult<Expr> {
        if self.at_op("+") || self.at_op("-") || self.at_op("~") {
            let start = self.advance().start;
            let inner = self.factor()?;
            return Ok(self.compound_expr("unary", vec![inner], start));
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expr> {
        let start = self.peek().start;
        let base = self.await_primary()?;
        if self.eat_op("**") {
            let exponent = self.factor()?;
            return Ok(self.compound_expr("binop", vec![base, exponent], start));
        }
        Ok(base)
    }

    fn await_primary(&mut self) -> PResult<Expr> {
        if self.at_kw("await") {
            let start = self.advance().start;
            let inner = self.primary()?;
            return Ok(self.compound_expr("await", vec![inner], start));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.peek().start;
        let mut expr = self.atom()?;
        loop {
            if self.at_op(".") {
                self.advance();
                let attr = self.ident()?;
                expr = Expr {
                    kind: ExprKind::Attribute { value: Box::new(expr), attr },
                    span: self.span_from(start),
                };
            } else if self.at_op("(") {
                let open = self.advance().start;
                let args = self.call_arguments()?;
                let parens = Span::new(open, self.prev_end);
                expr = Expr {
                    kind: ExprKind::Call { func: Box::new(expr), args, parens },
                    span: self.span_from(start),
                };
            } else if self.at_op("[") {
                self.advance();
                let index = self.slices()?;
                self.expect_op("]")?;
                expr = Expr {
                    kind: ExprKind::Subscript { value: Box::new(expr), index: Box::new(index) },
                    span: self.span_from(start),
                };
            } else {
                return Ok(expr);
            }
        }
    }

    /// Parses arguments after an already-consumed `(`, through the `)`.
    fn call_arguments(&mut self) -> PResult<Vec<Arg>> {
        let mut args: Vec<Arg> = Vec::new();
        let mut keyword_seen = false;
        let mut double_star_seen = false;
        while !self.at_op(")") {
            let start = self.peek().start;
            let arg = if self.eat_op("**") {
                double_star_seen = true;
                let value = self.expression()?;
                Arg { kind: ArgKind::DoubleStarred, keyword: None, value, span: self.span_from(start) }
            } else if self.eat_op("*") {
                if double_star_seen {
                    return Err(self.error_here("iterable argument unpacking follows keyword argument unpacking"));
                }
                let value = self.expression()?;
                Arg { kind: ArgKind::Starred, keyword: None, value, span: self.span_from(start) }
            } else if self.at_ident() && self.peek_at(1).is_op(self.src, "=") {
                let keyword = self.ident()?;
                self.advance();
                if args.iter().any(|a| a.keyword.as_ref().is_some_and(|k| k.name == keyword.name)) {
                    return Err(SyntaxError::new(
                        self.line_of(keyword.span.start),
                        self.col_of(keyword.span.start),
                        format!("keyword argument repeated: {}", keyword.name),
                    ));
                }
                keyword_seen = true;
                let value = self.expression()?;
                Arg { kind: ArgKind::Keyword, keyword: Some(keyword), value, span: self.span_from(start) }
            } else {
                if keyword_seen || double_star_seen {
                    return Err(self.error_here("positional argument follows keyword argument"));
                }
                let value = self.named_expression()?;
                let value = if self.at_kw("for") || self.at_kw("async") {
                    self.comprehension("genexp", vec![value], start)?
                } else {
                    value
                };
                Arg { kind: ArgKind::Positional, keyword: None, value, span: self.span_from(start) }
            };
            args.push(arg);
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(")")?;
        Ok(args)
    }

    fn slices(&mut self) -> PResult<Expr> {
        let start = self.peek().start;
        let first = self.slice()?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_op("]") {
                break;
            }
            items.push(self.slice()?);
        }
        Ok(Expr { kind: ExprKind::Tuple(items), span: self.span_from(start) })
    }

    fn slice(&mut self) -> PResult<Expr> {
        let start = self.peek().start;
        if self.at_op("*") {
            return self.star_expression();
        }
        let lower = if self.at_op(":") { None } else { Some(self.named_expression()?) };
        if !self.at_op(":") {
            return lower.ok_or_else(|| self.unexpected());
        }
        let mut children: Vec<Expr> = lower.into_iter().collect();
        self.advance();
        if !self.at_op(":") && !self.at_op("]") && !self.at_op(",") {
            children.push(self.expression()?);
        }
        if self.eat_op(":") && !self.at_op("]") && !self.at_op(",") {
            children.push(self.expression()?);
        }
        Ok(self.compound_expr("slice", children, start))
    }

    fn comprehension(&mut self, label: &'static str, mut children: Vec<Expr>, start: usize) -> PResult<Expr> {
        let mut clauses = 0;
        loop {
            let is_async = self.at_kw("async") && self.text(self.peek_at(1)) == "for";
            if is_async {
                self.advance();
            }
            if !self.eat_kw("for") {
                break;
            }
            let target = self.target_list()?;
            validate_target(&target, self)?;
            children.push(target);
            self.expect_kw("in")?;
            children.push(self.disjunction()?);
            while self.eat_kw("if") {
                children.push(self.disjunction()?);
            }
            clauses += 1;
        }
        if clauses == 0 {
            return Err(self.unexpected());
        }
        Ok(self.compound_expr(label, children, start))
    }

    fn star_target(&mut self) -> PResult<Expr> {
        if self.at_op("*") {
            let start = self.advance().start;
            let inner = self.bitor()?;
            return Ok(Expr { kind: ExprKind::Starred(Box::new(inner)), span: self.span_from(start) });
        }
        self.bitor()
    }

    /// Loop / comprehension targets: stops before `in`.
    fn target_list(&mut self) -> PResult<Expr> {
        let start = self.peek().start;
        let first = self.star_target()?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_kw("in") || self.at_op("=") || matches!(self.peek().kind, TokenKind::Newline) {
                break;
            }
            items.push(self.star_target()?);
        }
        Ok(Expr { kind: ExprKind::Tuple(items), span: self.span_from(start) })
    }

    fn atom(&mut self) -> PResult<Expr> {
        let t = self.peek();
        let start = t.start;
        match t.kind {
            TokenKind::Name => {
                let word = self.text(t);
                let literal = match word {
                    "True" => Some(LiteralKind::True),
                    "False" => Some(LiteralKind::False),
                    "None" => Some(LiteralKind::None),
                    _ => None,
                };
                if let Some(kind) = literal {
                    self.advance();
                    return Ok(Expr { kind: ExprKind::Literal(kind), span: Span::new(t.start, t.end) });
                }
                if is_keyword(word) {
                    return Err(self.unexpected());
                }
                self.advance();
                Ok(Expr { kind: ExprKind::Name(word.to_string()), span: Span::new(t.start, t.end) })
            }
            TokenKind::Number => {
                self.advance();
                Ok(Expr { kind: ExprKind::Literal(LiteralKind::Number), span: Span::new(t.start, t.end) })
            }
            TokenKind::String => {
                while self.peek().kind == TokenKind::String {
                    self.advance();
                }
                Ok(Expr { kind: ExprKind::Literal(LiteralKind::String), span: self.span_from(start) })
            }
            TokenKind::Op => match self.text(t) {
                "..." => {
                    self.advance();
                    Ok(Expr { kind: ExprKind::Literal(LiteralKind::Ellipsis), span: Span::new(t.start, t.end) })
                }
                "(" => self.paren_atom(),
                "[" => {
                    self.advance();
                    if self.eat_op("]") {
                        return Ok(Expr { kind: ExprKind::List(Vec::new()), span: self.span_from(start) });
                    }
                    let first = self.star_named_expression()?;
                    if self.at_kw("for") || self.at_kw("async") {
                        let comp = self.comprehension("listcomp", vec![first], start)?;
                        self.expect_op("]")?;
                        return Ok(Expr { span: self.span_from(start), ..comp });
                    }
                    let mut items = vec![first];
                    while self.eat_op(",") {
                        if self.at_op("]") {
                            break;
                        }
                        items.push(self.star_named_expression()?);
                    }
                    self.expect_op("]")?;
                    Ok(Expr { kind: ExprKind::List(items), span: self.span_from(start) })
                }
                "{" => self.brace_atom(),
                _ => Err(self.unexpected()),
            },
            _ => Err(self.unexpected()),
        }
    }

    fn paren_atom(&mut self) -> PResult<Expr> {
        let start = self.expect_op("(")?.start;
        if self.eat_op(")") {
            return Ok(Expr { kind: ExprKind::Tuple(Vec::new()), span: self.span_from(start) });
        }
        if self.at_kw("yield") {
            let inner = self.yield_expression()?;
            self.expect_op(")")?;
            return Ok(Expr { kind: inner.kind, span: self.span_from(start) });
        }
        let first = self.star_named_expression()?;
        if self.at_kw("for") || self.at_kw("async") {
            let comp = self.comprehension("genexp", vec![first], start)?;
            self.expect_op(")")?;
            return Ok(Expr { span: self.span_from(start), ..comp });
        }
        if self.eat_op(")") {
            if let ExprKind::Starred(_) = first.kind {
                return Err(self.error_here("cannot use starred expression here"));
            }
            return Ok(Expr { kind: first.kind, span: self.span_from(start) });
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_op(")") {
                break;
            }
            items.push(self.star_named_expression()?);
        }
        self.expect_op(")")?;
        Ok(Expr { kind: ExprKind::Tuple(items), span: self.span_from(start) })
    }

    fn brace_atom(&mut self) -> PResult<Expr> {
        let start = self.expect_op("{")?.start;
        if self.eat_op("}") {
            return Ok(self.compound_expr("dict", Vec::new(), start));
        }
        let mut children = Vec::new();
        let is_dict;
        if self.eat_op("**") {
            is_dict = true;
            children.push(self.bitor()?);
        } else {
            let first = self.star_named_expression()?;
            if self.eat_op(":") {
                is_dict = true;
                let value = self.expression()?;
                if self.at_kw("for") || self.at_kw("async") {
                    let comp = self.comprehension("dictcomp", vec![first, value], start)?;
                    self.expect_op("}")?;
                    return Ok(Expr { span: self.span_from(start), ..comp });
                }
                children.push(first);
                children.push(value);
            } else {
                is_dict = false;
                if self.at_kw("for") || self.at_kw("async") {
                    let comp = self.comprehension("setcomp", vec![first], start)?;
                    self.expect_op("}")?;
                    return Ok(Expr { span: self.span_from(start), ..comp });
                }
                children.push(first);
            }
        }
        while self.eat_op(",") {
            if self.at_op("}") {
                break;
            }
            if is_dict {
                if self.eat_op("**") {
                    children.push(self.bitor()?);
                } else {
                    children.push(self.expression()?);
                    self.expect_op(":")?;
                    children.push(self.expression()?);
                }
            } else {
                children.push(self.star_named_expression()?);
            }
        }
        self.expect_op("}")?;
        Ok(self.compound_expr(if is_dict { "dict" } else { "set" }, children, start))
    }
}

fn validate_target(e: &Expr, p: &Parser) -> PResult<()> {
    match &e.kind {
        ExprKind::Name(_) | ExprKind::Attribute { .. } | ExprKind::Subscript { .. } => Ok(()),
        ExprKind::Tuple(items) | ExprKind::List(items) => items.iter().try_for_each(|i| validate_target(i, p)),
        ExprKind::Starred(inner) => validate_target(inner, p),
        _ => {
            let what = match &e.kind {
                ExprKind::Call { .. } => "function call",
                ExprKind::Literal(_) => "literal",
                _ => "expression",
            };
            Err(SyntaxError::new(p.line_of(e.span.start), p.col_of(e.span.start), format!("cannot assign to {what}")))
        }
    }
}
