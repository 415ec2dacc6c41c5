//! Syntax tree for the supported Python subset.
//!
//! The tree keeps byte spans for everything so callers can slice verbatim
//! source text (defaults, annotations, keyword values) or splice edits.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.start..self.end]
    }

    pub fn join(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ident {
    pub name: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Module {
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    FunctionDef(FunctionDef),
    ClassDef(ClassDef),
    If { test: Expr, body: Vec<Stmt>, orelse: Vec<Stmt> },
    While { test: Expr, body: Vec<Stmt>, orelse: Vec<Stmt> },
    For { target: Expr, iter: Expr, body: Vec<Stmt>, orelse: Vec<Stmt>, is_async: bool },
    With { items: Vec<WithItem>, body: Vec<Stmt>, is_async: bool },
    Try { body: Vec<Stmt>, handlers: Vec<ExceptHandler>, orelse: Vec<Stmt>, finalbody: Vec<Stmt> },
    Import(Vec<ImportAlias>),
    ImportFrom(ImportFrom),
    Expr(Expr),
    Assign { targets: Vec<Expr>, value: Expr },
    AugAssign { target: Expr, value: Expr },
    AnnAssign { target: Expr, annotation: Expr, value: Option<Expr> },
    Return(Option<Expr>),
    Raise { exc: Option<Expr>, cause: Option<Expr> },
    Assert { test: Expr, msg: Option<Expr> },
    Delete(Vec<Expr>),
    Global(Vec<Ident>),
    Nonlocal(Vec<Ident>),
    Pass,
    Break,
    Continue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub name: Ident,
    pub params: Vec<Param>,
    pub returns: Option<Expr>,
    pub decorators: Vec<Expr>,
    pub body: Vec<Stmt>,
    pub is_async: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    PositionalOnly,
    PositionalOrKeyword,
    VarPositional,
    KeywordOnly,
    VarKeyword,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: Ident,
    pub kind: ParamKind,
    pub default: Option<Expr>,
    pub annotation: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDef {
    pub name: Ident,
    pub bases: Vec<Arg>,
    pub decorators: Vec<Expr>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WithItem {
    pub context: Expr,
    pub target: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExceptHandler {
    pub kind: Option<Expr>,
    pub name: Option<Ident>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DottedName {
    pub parts: Vec<Ident>,
    pub span: Span,
}

impl DottedName {
    pub fn dotted(&self) -> String {
        self.parts.iter().map(|p| p.name.as_str()).collect::<Vec<_>>().join(".")
    }
}

/// One `a.b [as c]` entry of an import statement.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportAlias {
    pub path: DottedName,
    pub alias: Option<Ident>,
    pub span: Span,
}

impl ImportAlias {
    /// The name this entry binds in the importing namespace.
    pub fn bound_name(&self, from_import: bool) -> &str {
        match (&self.alias, from_import) {
            (Some(a), _) => &a.name,
            (None, true) => &self.path.parts.last().unwrap().name,
            (None, false) => &self.path.parts[0].name,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportFrom {
    pub module: Option<DottedName>,
    pub level: usize,
    /// Empty for `from x import *`.
    pub names: Vec<ImportAlias>,
    pub star: bool,
    /// Span from the first entry through the last entry (excluding parens).
    pub names_span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiteralKind {
    Number,
    String,
    True,
    False,
    None,
    Ellipsis,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Name(String),
    Attribute { value: Box<Expr>, attr: Ident },
    Call { func: Box<Expr>, args: Vec<Arg>, parens: Span },
    Subscript { value: Box<Expr>, index: Box<Expr> },
    Literal(LiteralKind),
    Tuple(Vec<Expr>),
    List(Vec<Expr>),
    Starred(Box<Expr>),
    Lambda { params: Vec<Param>, body: Box<Expr> },
    /// Any other construct: operators, comparisons, comprehensions, dicts,
    /// sets, slices, conditional expressions, `await`, `yield`, walrus.
    Compound { label: &'static str, children: Vec<Expr> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgKind {
    Positional,
    Starred,
    Keyword,
    DoubleStarred,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arg {
    pub kind: ArgKind,
    pub keyword: Option<Ident>,
    pub value: Expr,
    pub span: Span,
}

impl Expr {
    pub fn children(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Name(_) | ExprKind::Literal(_) => Vec::new(),
            ExprKind::Attribute { value, .. } => vec![value],
            ExprKind::Call { func, args, .. } => {
                let mut v: Vec<&Expr> = vec![func];
                v.extend(args.iter().map(|a| &a.value));
                v
            }
            ExprKind::Subscript { value, index } => vec![value, index],
            ExprKind::Tuple(items) | ExprKind::List(items) => items.iter().collect(),
            ExprKind::Starred(inner) => vec![inner],
            ExprKind::Lambda { params, body } => {
                let mut v: Vec<&Expr> = params.iter().filter_map(|p| p.default.as_ref()).collect();
                v.push(body);
                v
            }
            ExprKind::Compound { children, .. } => children.iter().collect(),
        }
    }

    /// Dotted path for `a.b.c` chains rooted at a plain name.
    pub fn dotted_path(&self) -> Option<Vec<&str>> {
        match &self.kind {
            ExprKind::Name(n) => Some(vec![n.as_str()]),
            ExprKind::Attribute { value, attr } => {
                let mut p = value.dotted_path()?;
                p.push(attr.name.as_str());
                Some(p)
            }
            _ => None,
        }
    }

    /// Final identifier of a name or attribute chain (`c` in `a.b.c`).
    pub fn terminal_name(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Name(n) => Some(n),
            ExprKind::Attribute { attr, .. } => Some(&attr.name),
            _ => None,
        }
    }
}

impl Stmt {
    /// Expressions directly owned by this statement (not nested bodies).
    pub fn expressions(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::FunctionDef(f) => {
                let mut v: Vec<&Expr> = f.decorators.iter().collect();
                for p in &f.params {
                    v.extend(p.default.iter());
                    v.extend(p.annotation.iter());
                }
                v.extend(f.returns.iter());
                v
            }
            StmtKind::ClassDef(c) => {
                let mut v: Vec<&Expr> = c.decorators.iter().collect();
                v.extend(c.bases.iter().map(|a| &a.value));
                v
            }
            StmtKind::If { test, .. } | StmtKind::While { test, .. } => vec![test],
            StmtKind::For { target, iter, .. } => vec![target, iter],
            StmtKind::With { items, .. } => {
                let mut v = Vec::new();
                for item in items {
                    v.push(&item.context);
                    v.extend(item.target.iter());
                }
                v
            }
            StmtKind::Try { handlers, .. } => handlers.iter().filter_map(|h| h.kind.as_ref()).collect(),
            StmtKind::Import(_) | StmtKind::ImportFrom(_) => Vec::new(),
            StmtKind::Expr(e) => vec![e],
            StmtKind::Assign { targets, value } => {
                let mut v: Vec<&Expr> = targets.iter().collect();
                v.push(value);
                v
            }
            StmtKind::AugAssign { target, value } => vec![target, value],
            StmtKind::AnnAssign { target, annotation, value } => {
                let mut v = vec![target, annotation];
                v.extend(value.iter());
                v
            }
            StmtKind::Return(e) => e.iter().collect(),
            StmtKind::Raise { exc, cause } => exc.iter().chain(cause.iter()).collect(),
            StmtKind::Assert { test, msg } => std::iter::once(test).chain(msg.iter()).collect(),
            StmtKind::Delete(targets) => targets.iter().collect(),
            StmtKind::Global(_) | StmtKind::Nonlocal(_) | StmtKind::Pass | StmtKind::Break | StmtKind::Continue => {
                Vec::new()
            }
        }
    }

    /// Nested statement blocks, in source order.
    pub fn blocks(&self) -> Vec<&[Stmt]> {
        match &self.kind {
            StmtKind::FunctionDef(f) => vec![&f.body],
            StmtKind::ClassDef(c) => vec![&c.body],
            StmtKind::If { body, orelse, .. }
            | StmtKind::While { body, orelse, .. }
            | StmtKind::For { body, orelse, .. } => vec![body, orelse],
            StmtKind::With { body, .. } => vec![body],
            StmtKind::Try { body, handlers, orelse, finalbody } => {
                let mut v: Vec<&[Stmt]> = vec![body];
                v.extend(handlers.iter().map(|h| h.body.as_slice()));
                v.push(orelse);
                v.push(finalbody);
                v
            }
            _ => Vec::new(),
        }
    }
}

/// Depth-first walk over every expression in source order, calling `visit`
/// with the expression and the stack of `with` context expressions that
/// enclose it.
pub fn walk_exprs<'a>(body: &'a [Stmt], visit: &mut dyn FnMut(&'a Expr, &[&'a Expr])) {
    let mut contexts = Vec::new();
    walk_block(body, &mut contexts, visit);
}

fn walk_block<'a>(body: &'a [Stmt], contexts: &mut Vec<&'a Expr>, visit: &mut dyn FnMut(&'a Expr, &[&'a Expr])) {
    for stmt in body {
        for e in stmt.expressions() {
            walk_expr(e, contexts, visit);
        }
        if let StmtKind::With { items, body, .. } = &stmt.kind {
            let depth = contexts.len();
            contexts.extend(items.iter().map(|i| &i.context));
            walk_block(body, contexts, visit);
            contexts.truncate(depth);
        } else {
            for block in stmt.blocks() {
                walk_block(block, contexts, visit);
            }
        }
    }
}

fn walk_expr<'a>(e: &'a Expr, contexts: &[&'a Expr], visit: &mut dyn FnMut(&'a Expr, &[&'a Expr])) {
    visit(e, contexts);
    for child in e.children() {
        walk_expr(child, contexts, visit);
    }
}

/// Every statement in the tree, pre-order.
pub fn walk_stmts<'a>(body: &'a [Stmt], visit: &mut dyn FnMut(&'a Stmt)) {
    for stmt in body {
        visit(stmt);
        for block in stmt.blocks() {
            walk_stmts(block, visit);
        }
    }
}
