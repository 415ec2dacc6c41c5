//! API surface extraction from a library source tree.
//!
//! Every `.py` file becomes a module entity; module-level and class-level
//! `def`/`class` statements become class, function and method entities with
//! their parameters, annotations and docstrings. Function bodies are never
//! descended into.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::syntax::{self, ExprKind, LiteralKind, ParamKind, Stmt, StmtKind, SyntaxError};

pub const SOURCE_SUFFIX: &str = ".py";

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("source tree contains no files")]
    EmptyTree,
    #[error("invalid source tree: {0}")]
    InvalidTree(String),
    #[error("failed to read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{} file(s) failed to parse: {}", .0.len(), summarize(.0))]
    Syntax(Vec<FileSyntaxError>),
}

fn summarize(errors: &[FileSyntaxError]) -> String {
    errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileSyntaxError {
    pub path: String,
    pub error: SyntaxError,
}

impl fmt::Display for FileSyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.error)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnitError {
    #[error("syntax error at {0}")]
    Syntax(SyntaxError),
    #[error("unsupported construct at line {line}, column {column}: {construct}")]
    UnsupportedConstruct { line: u32, column: u32, construct: String },
}

/// One release of a library as a set of `(relative path, source)` pairs.
#[derive(Debug, Clone)]
pub struct SourceTree {
    pub root_path: PathBuf,
    pub version_label: String,
    files: Vec<(String, String)>,
}

impl SourceTree {
    pub fn new(
        root_path: impl Into<PathBuf>,
        version_label: impl Into<String>,
        files: Vec<(String, String)>,
    ) -> Result<Self, ExtractError> {
        let mut seen = std::collections::BTreeSet::new();
        for (path, _) in &files {
            if !path.ends_with(SOURCE_SUFFIX) {
                return Err(ExtractError::InvalidTree(format!("'{path}' is not a {SOURCE_SUFFIX} file")));
            }
            if !seen.insert(path.clone()) {
                return Err(ExtractError::InvalidTree(format!("duplicate path '{path}'")));
            }
        }
        Ok(Self { root_path: root_path.into(), version_label: version_label.into(), files })
    }

    /// Reads every `.py` file below `root`. Hidden directories are skipped.
    pub fn from_dir(root: &Path, version_label: &str) -> Result<Self, ExtractError> {
        let mut files = Vec::new();
        let walker = walkdir::WalkDir::new(root).sort_by_file_name().into_iter().filter_entry(|e| {
            e.depth() == 0 || !e.file_name().to_string_lossy().starts_with('.')
        });
        for entry in walker {
            let entry = entry.map_err(|e| ExtractError::Io {
                path: e.path().map(Path::to_path_buf).unwrap_or_else(|| root.to_path_buf()),
                source: e.into(),
            })?;
            if !entry.file_type().is_file() || !entry.file_name().to_string_lossy().ends_with(SOURCE_SUFFIX) {
                continue;
            }
            let rel = entry.path().strip_prefix(root).unwrap_or(entry.path());
            let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            let text = std::fs::read_to_string(entry.path())
                .map_err(|source| ExtractError::Io { path: entry.path().to_path_buf(), source })?;
            files.push((rel, text));
        }
        Self::new(root, version_label, files)
    }

    pub fn files(&self) -> &[(String, String)] {
        &self.files
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }
}

/// `acme/utils.py` -> `acme.utils`, `acme/__init__.py` -> `acme`.
pub fn module_name_for_path(rel_path: &str) -> String {
    let stem = rel_path.strip_suffix(SOURCE_SUFFIX).unwrap_or(rel_path);
    let mut parts: Vec<&str> = stem.split(['/', '\\']).filter(|p| !p.is_empty()).collect();
    if parts.len() > 1 && parts.last() == Some(&"__init__") {
        parts.pop();
    }
    parts.join(".")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParameterKind {
    Positional,
    PositionalOrKeyword,
    KeywordOnly,
    VarPositional,
    VarKeyword,
}

impl ParameterKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Positional => "positional",
            Self::PositionalOrKeyword => "positional-or-keyword",
            Self::KeywordOnly => "keyword-only",
            Self::VarPositional => "var-positional",
            Self::VarKeyword => "var-keyword",
        }
    }

    pub fn is_variadic(self) -> bool {
        matches!(self, Self::VarPositional | Self::VarKeyword)
    }
}

impl From<ParamKind> for ParameterKind {
    fn from(k: ParamKind) -> Self {
        match k {
            ParamKind::PositionalOnly => Self::Positional,
            ParamKind::PositionalOrKeyword => Self::PositionalOrKeyword,
            ParamKind::KeywordOnly => Self::KeywordOnly,
            ParamKind::VarPositional => Self::VarPositional,
            ParamKind::VarKeyword => Self::VarKeyword,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub kind: ParameterKind,
    pub default_text: Option<String>,
    pub annotation_text: Option<String>,
}

impl Parameter {
    pub fn new(name: &str, kind: ParameterKind) -> Self {
        Self { name: name.to_string(), kind, default_text: None, annotation_text: None }
    }

    pub fn with_default(mut self, default: &str) -> Self {
        self.default_text = Some(default.to_string());
        self
    }

    /// A caller must supply this parameter.
    pub fn is_required(&self) -> bool {
        self.default_text.is_none() && !self.kind.is_variadic()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Library,
    Module,
    Class,
    Function,
    Method,
}

impl EntityKind {
    pub fn is_callable(self) -> bool {
        matches!(self, Self::Function | Self::Method)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Library => "library",
            Self::Module => "module",
            Self::Class => "class",
            Self::Function => "function",
            Self::Method => "method",
        }
    }
}

/// How a method is bound on its class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Binding {
    Instance,
    StaticMethod,
    ClassMethod,
    Property,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiEntity {
    pub kind: EntityKind,
    pub name: String,
    pub qualified_name: String,
    pub defined_in_module: String,
    pub parameters: Vec<Parameter>,
    pub return_annotation: Option<String>,
    pub docstring: Option<String>,
    pub private: bool,
    pub binding: Option<Binding>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub decorators: Vec<String>,
}

impl ApiEntity {
    pub fn module(qualified_name: &str) -> Self {
        Self {
            kind: EntityKind::Module,
            name: qualified_name.rsplit('.').next().unwrap_or(qualified_name).to_string(),
            qualified_name: qualified_name.to_string(),
            defined_in_module: qualified_name.to_string(),
            parameters: Vec::new(),
            return_annotation: None,
            docstring: None,
            private: qualified_name.split('.').any(is_private_name),
            binding: None,
            decorators: Vec::new(),
        }
    }

    /// Builds a function or method entity; mostly useful in tests and
    /// generated fixtures.
    pub fn callable(kind: EntityKind, module: &str, path: &str, parameters: Vec<Parameter>) -> Self {
        let name = path.rsplit('.').next().unwrap_or(path).to_string();
        let private = module.split('.').chain(path.split('.')).any(is_private_name);
        Self {
            kind,
            name,
            qualified_name: format!("{module}.{path}"),
            defined_in_module: module.to_string(),
            parameters,
            return_annotation: None,
            docstring: None,
            private,
            binding: (kind == EntityKind::Method).then_some(Binding::Instance),
            decorators: Vec::new(),
        }
    }

    pub fn with_docstring(mut self, doc: &str) -> Self {
        self.docstring = Some(doc.to_string());
        self
    }

    /// The class path between the module and the name (`C` in `mod.C.m`).
    pub fn enclosing_path(&self) -> &str {
        let rest = self.qualified_name.strip_prefix(&self.defined_in_module).unwrap_or("");
        let rest = rest.strip_prefix('.').unwrap_or(rest);
        match rest.rfind('.') {
            Some(i) => &rest[..i],
            None => "",
        }
    }
}

/// Single leading underscore, not a dunder.
pub fn is_private_name(name: &str) -> bool {
    name.starts_with('_') && !(name.starts_with("__") && name.ends_with("__") && name.len() > 4)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiInventory {
    pub version_label: String,
    pub library: ApiEntity,
    /// Modules, classes and callables keyed by qualified name.
    pub entities: BTreeMap<String, ApiEntity>,
}

impl ApiInventory {
    pub fn get(&self, qualified_name: &str) -> Option<&ApiEntity> {
        self.entities.get(qualified_name)
    }

    pub fn callables(&self) -> impl Iterator<Item = &ApiEntity> {
        self.entities.values().filter(|e| e.kind.is_callable())
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.library.kind != EntityKind::Library {
            return Err("library entity has the wrong kind".into());
        }
        for (qn, e) in &self.entities {
            if qn != &e.qualified_name {
                return Err(format!("entity keyed '{qn}' has qualified name '{}'", e.qualified_name));
            }
            if e.kind == EntityKind::Library {
                return Err(format!("second library entity '{qn}'"));
            }
            match self.entities.get(&e.defined_in_module) {
                Some(m) if m.kind == EntityKind::Module => {}
                _ => return Err(format!("'{qn}' refers to missing module '{}'", e.defined_in_module)),
            }
            if e.kind != EntityKind::Module {
                let prefix = format!("{}.", e.defined_in_module);
                let expected_tail = qn.strip_prefix(&prefix).ok_or_else(|| format!("'{qn}' is outside its module"))?;
                if !(expected_tail == e.name || expected_tail.ends_with(&format!(".{}", e.name))) {
                    return Err(format!("'{qn}' does not end with its name '{}'", e.name));
                }
                let parent = e.enclosing_path();
                let parent_is_class = !parent.is_empty();
                if (e.kind == EntityKind::Method) != parent_is_class {
                    return Err(format!("'{qn}' kind {} does not match its lexical parent", e.kind.as_str()));
                }
                if parent_is_class {
                    let parent_qn = format!("{}.{}", e.defined_in_module, parent);
                    match self.entities.get(&parent_qn) {
                        Some(p) if p.kind == EntityKind::Class => {}
                        _ => return Err(format!("'{qn}' has no enclosing class '{parent_qn}'")),
                    }
                }
            }
            check_parameters(&e.parameters).map_err(|m| format!("'{qn}': {m}"))?;
        }
        Ok(())
    }

    /// JSON Lines dump: one entity per line sorted by qualified name, the
    /// library entity first.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in std::iter::once(&self.library).chain(self.entities.values()) {
            out.push_str(&serde_json::to_string(e).expect("entities serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str, version_label: &str) -> Result<Self, String> {
        let mut library = None;
        let mut entities = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let e: ApiEntity = serde_json::from_str(line).map_err(|err| format!("line {}: {err}", i + 1))?;
            if e.kind == EntityKind::Library {
                if library.replace(e).is_some() {
                    return Err(format!("line {}: more than one library entity", i + 1));
                }
            } else if entities.insert(e.qualified_name.clone(), e).is_some() {
                return Err(format!("line {}: duplicate qualified name", i + 1));
            }
        }
        let library = library.ok_or("inventory has no library entity")?;
        let inv = Self { version_label: version_label.to_string(), library, entities };
        inv.validate()?;
        Ok(inv)
    }
}

fn check_parameters(params: &[Parameter]) -> Result<(), String> {
    let count = |k| params.iter().filter(|p| p.kind == k).count();
    if count(ParameterKind::VarPositional) > 1 || count(ParameterKind::VarKeyword) > 1 {
        return Err("more than one variadic parameter of the same kind".into());
    }
    let mut default_seen = false;
    for p in params.iter().filter(|p| p.kind == ParameterKind::PositionalOrKeyword) {
        if p.default_text.is_some() {
            default_seen = true;
        } else if default_seen {
            return Err(format!("parameter '{}' without default follows a defaulted parameter", p.name));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    SyntaxError,
    UnsupportedConstruct,
    Shadowing,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExtractIssue {
    pub path: String,
    pub kind: IssueKind,
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl fmt::Display for ExtractIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: {}", self.path, self.line, self.column, self.message)
    }
}

/// Entities of one source unit plus the shadowing warnings found in it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedUnit {
    pub entities: Vec<ApiEntity>,
    pub warnings: Vec<(u32, u32, String)>,
}

pub fn parse_source_unit(source_text: &str, module_qualified_name: &str) -> Result<ParsedUnit, UnitError> {
    let module = syntax::parse_module(source_text).map_err(UnitError::Syntax)?;
    check_supported(&module.body, "module")?;
    let mut module_entity = ApiEntity::module(module_qualified_name);
    module_entity.docstring = docstring(&module.body, source_text);
    let mut collector = Collector {
        src: source_text,
        module: module_qualified_name,
        module_private: module_entity.private,
        entities: Vec::new(),
        warnings: Vec::new(),
    };
    collector.block(&module.body, &[], false);
    let mut entities = vec![module_entity];
    entities.extend(collector.entities.into_iter().map(|(_, e)| e));
    Ok(ParsedUnit { entities, warnings: collector.warnings })
}

/// Rejects definitions hidden behind control flow at module or class level.
fn check_supported(body: &[Stmt], scope: &str) -> Result<(), UnitError> {
    for stmt in body {
        match &stmt.kind {
            StmtKind::ClassDef(c) => check_supported(&c.body, "class")?,
            StmtKind::FunctionDef(_) => {}
            _ => {
                let blocks = stmt.blocks();
                if blocks.iter().any(|b| contains_definition(b)) {
                    let construct = match &stmt.kind {
                        StmtKind::If { .. } => "if",
                        StmtKind::While { .. } => "while",
                        StmtKind::For { .. } => "for",
                        StmtKind::With { .. } => "with",
                        StmtKind::Try { .. } => "try",
                        _ => "block",
                    };
                    return Err(UnitError::UnsupportedConstruct {
                        line: stmt.line,
                        column: stmt.col,
                        construct: format!("definition inside {scope}-level '{construct}' statement"),
                    });
                }
            }
        }
    }
    Ok(())
}

fn contains_definition(body: &[Stmt]) -> bool {
    body.iter().any(|s| {
        matches!(s.kind, StmtKind::FunctionDef(_) | StmtKind::ClassDef(_)) || s.blocks().iter().any(|b| contains_definition(b))
    })
}

fn docstring(body: &[Stmt], src: &str) -> Option<String> {
    let first = body.first()?;
    let StmtKind::Expr(e) = &first.kind else { return None };
    if e.kind != ExprKind::Literal(LiteralKind::String) {
        return None;
    }
    let tokens = syntax::tokenize_lenient(e.span.text(src));
    let text = e.span.text(src);
    let mut raw = String::new();
    for t in tokens.iter().filter(|t| t.kind == syntax::TokenKind::String) {
        let (prefix, _, body) = syntax::lexer::split_string_literal(t.text(text))?;
        if prefix.to_ascii_lowercase().contains(['b', 'f']) {
            return None;
        }
        raw.push_str(body);
    }
    Some(clean_docstring(&raw))
}

/// Strips surrounding blank lines and the common indentation of all lines
/// after the first.
pub fn clean_docstring(raw: &str) -> String {
    let raw = raw.replace("\r\n", "\n");
    let lines: Vec<&str> = raw.lines().collect();
    let indent = lines
        .iter()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    let mut out: Vec<String> = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if i == 0 {
            out.push(line.trim().to_string());
        } else {
            out.push(line.get(indent..).unwrap_or("").trim_end().to_string());
        }
    }
    while out.first().is_some_and(|l| l.is_empty()) {
        out.remove(0);
    }
    while out.last().is_some_and(|l| l.is_empty()) {
        out.pop();
    }
    out.join("\n")
}

struct Collector<'a> {
    src: &'a str,
    module: &'a str,
    module_private: bool,
    /// (source offset, entity); later definitions replace earlier ones.
    entities: Vec<(usize, ApiEntity)>,
    warnings: Vec<(u32, u32, String)>,
}

impl<'a> Collector<'a> {
    fn qualify(&self, classes: &[&str], name: &str) -> String {
        let mut qn = self.module.to_string();
        for c in classes {
            qn.push('.');
            qn.push_str(c);
        }
        qn.push('.');
        qn.push_str(name);
        qn
    }

    fn insert(&mut self, stmt: &Stmt, entity: ApiEntity) {
        if self.entities.iter().any(|(_, e)| e.qualified_name == entity.qualified_name) {
            self.warnings.push((
                stmt.line,
                stmt.col,
                format!("'{}' is redefined; the later definition wins", entity.qualified_name),
            ));
            // Drop the shadowed definition and anything nested under it.
            let prefix = format!("{}.", entity.qualified_name);
            self.entities
                .retain(|(_, e)| e.qualified_name != entity.qualified_name && !e.qualified_name.starts_with(&prefix));
        }
        self.entities.push((stmt.span.start, entity));
    }

    fn block(&mut self, body: &[Stmt], classes: &[&str], parent_private: bool) {
        for stmt in body {
            match &stmt.kind {
                StmtKind::FunctionDef(f) => {
                    let decorators: Vec<String> = f.decorators.iter().map(|d| d.span.text(self.src).to_string()).collect();
                    if !classes.is_empty() && is_accessor_decorator(&decorators, &f.name.name) {
                        // `@x.setter` and friends extend the property `x`.
                        continue;
                    }
                    let kind = if classes.is_empty() { EntityKind::Function } else { EntityKind::Method };
                    let binding = (kind == EntityKind::Method).then(|| binding_of(&decorators));
                    let parameters = f
                        .params
                        .iter()
                        .map(|p| Parameter {
                            name: p.name.name.clone(),
                            kind: p.kind.into(),
                            default_text: p.default.as_ref().map(|d| d.span.text(self.src).to_string()),
                            annotation_text: p.annotation.as_ref().map(|a| a.span.text(self.src).to_string()),
                        })
                        .collect();
                    let entity = ApiEntity {
                        kind,
                        name: f.name.name.clone(),
                        qualified_name: self.qualify(classes, &f.name.name),
                        defined_in_module: self.module.to_string(),
                        parameters,
                        return_annotation: f.returns.as_ref().map(|r| r.span.text(self.src).to_string()),
                        docstring: docstring(&f.body, self.src),
                        private: self.module_private || parent_private || is_private_name(&f.name.name),
                        binding,
                        decorators,
                    };
                    self.insert(stmt, entity);
                }
                StmtKind::ClassDef(c) => {
                    let private = self.module_private || parent_private || is_private_name(&c.name.name);
                    let entity = ApiEntity {
                        kind: EntityKind::Class,
                        name: c.name.name.clone(),
                        qualified_name: self.qualify(classes, &c.name.name),
                        defined_in_module: self.module.to_string(),
                        parameters: Vec::new(),
                        return_annotation: None,
                        docstring: docstring(&c.body, self.src),
                        private,
                        binding: None,
                        decorators: c.decorators.iter().map(|d| d.span.text(self.src).to_string()).collect(),
                    };
                    self.insert(stmt, entity);
                    let mut nested: Vec<&str> = classes.to_vec();
                    nested.push(&c.name.name);
                    self.block(&c.body, &nested, private);
                }
                _ => {}
            }
        }
    }
}

fn is_accessor_decorator(decorators: &[String], name: &str) -> bool {
    decorators.iter().any(|d| {
        [".setter", ".deleter", ".getter"].iter().any(|suffix| d.strip_suffix(suffix) == Some(name))
    })
}

fn binding_of(decorators: &[String]) -> Binding {
    for d in decorators {
        match d.as_str() {
            "staticmethod" => return Binding::StaticMethod,
            "classmethod" => return Binding::ClassMethod,
            "property" | "functools.cached_property" | "cached_property" => return Binding::Property,
            _ => {}
        }
    }
    Binding::Instance
}

/// Result of extracting a whole tree. Files that fail to parse are reported
/// in `issues` and contribute no entities.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub inventory: ApiInventory,
    pub issues: Vec<ExtractIssue>,
}

impl Extraction {
    pub fn syntax_errors(&self) -> Vec<FileSyntaxError> {
        self.issues
            .iter()
            .filter(|i| i.kind == IssueKind::SyntaxError)
            .map(|i| FileSyntaxError { path: i.path.clone(), error: SyntaxError::new(i.line, i.column, i.message.clone()) })
            .collect()
    }

    /// Turns per-file syntax errors into a hard error.
    pub fn into_result(self) -> Result<ApiInventory, ExtractError> {
        let errors = self.syntax_errors();
        if errors.is_empty() {
            Ok(self.inventory)
        } else {
            Err(ExtractError::Syntax(errors))
        }
    }
}

pub fn extract_inventory(tree: &SourceTree) -> Result<Extraction, ExtractError> {
    if tree.is_empty() {
        return Err(ExtractError::EmptyTree);
    }
    let mut files: Vec<&(String, String)> = tree.files().iter().collect();
    files.sort_by(|a, b| a.0.cmp(&b.0));

    let parse = |(path, text): &&(String, String)| {
        let module = module_name_for_path(path);
        (path.clone(), module.clone(), parse_source_unit(text, &module))
    };
    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        files.par_iter().map(parse).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = files.iter().map(parse).collect();

    let mut issues = Vec::new();
    let mut entities: BTreeMap<String, ApiEntity> = BTreeMap::new();
    // Packages (`x/__init__.py`) win over same-named plain modules (`x.py`).
    let mut module_sources: BTreeMap<String, String> = BTreeMap::new();
    let mut shadowed = std::collections::BTreeSet::new();
    let mut units: Vec<(String, String, ParsedUnit)> = Vec::new();
    for (path, module, result) in results {
        match result {
            Ok(unit) => {
                for (line, column, message) in &unit.warnings {
                    issues.push(ExtractIssue {
                        path: path.clone(),
                        kind: IssueKind::Shadowing,
                        line: *line,
                        column: *column,
                        message: message.clone(),
                    });
                }
                units.push((path, module, unit));
            }
            Err(UnitError::Syntax(e)) => issues.push(ExtractIssue {
                path,
                kind: IssueKind::SyntaxError,
                line: e.line,
                column: e.column,
                message: e.message,
            }),
            Err(UnitError::UnsupportedConstruct { line, column, construct }) => issues.push(ExtractIssue {
                path,
                kind: IssueKind::UnsupportedConstruct,
                line,
                column,
                message: construct,
            }),
        }
    }
    units.sort_by_key(|(path, _, _)| (!path.ends_with("__init__.py"), path.clone()));
    for (path, module, unit) in units {
        if let Some(first) = module_sources.get(&module) {
            issues.push(ExtractIssue {
                path: path.clone(),
                kind: IssueKind::Shadowing,
                line: 1,
                column: 0,
                message: format!("module '{module}' is already provided by '{first}'; file ignored"),
            });
            continue;
        }
        module_sources.insert(module.clone(), path.clone());
        for e in unit.entities {
            match entities.get(&e.qualified_name) {
                Some(existing) if existing.kind == EntityKind::Module && e.kind != EntityKind::Module => {
                    shadowed.insert(e.qualified_name.clone());
                }
                Some(existing) if existing.kind != EntityKind::Module && e.kind == EntityKind::Module => {
                    shadowed.insert(e.qualified_name.clone());
                    entities.insert(e.qualified_name.clone(), e);
                }
                _ => {
                    entities.insert(e.qualified_name.clone(), e);
                }
            }
        }
    }
    // A submodule shadows a same-named definition in its parent package,
    // together with anything nested under that definition.
    for qn in shadowed {
        let prefix = format!("{qn}.");
        entities.retain(|k, e| {
            let from_submodule = e.defined_in_module == qn || e.defined_in_module.starts_with(&prefix);
            !k.starts_with(&prefix) || e.kind == EntityKind::Module || from_submodule
        });
        issues.push(ExtractIssue {
            path: module_sources[&qn].clone(),
            kind: IssueKind::Shadowing,
            line: 1,
            column: 0,
            message: format!("submodule '{qn}' shadows a definition of the same name in its parent package"),
        });
    }

    let module_names: Vec<String> =
        entities.values().filter(|e| e.kind == EntityKind::Module).map(|e| e.qualified_name.clone()).collect();
    let library_name = library_name(&module_names, &tree.root_path);
    let library = ApiEntity {
        kind: EntityKind::Library,
        name: library_name.clone(),
        qualified_name: library_name.clone(),
        defined_in_module: library_name,
        parameters: Vec::new(),
        return_annotation: None,
        docstring: None,
        private: false,
        binding: None,
        decorators: Vec::new(),
    };
    issues.sort();
    Ok(Extraction {
        inventory: ApiInventory { version_label: tree.version_label.clone(), library, entities },
        issues,
    })
}

fn library_name(modules: &[String], root: &Path) -> String {
    let mut heads: Vec<&str> = modules.iter().map(|m| m.split('.').next().unwrap_or(m)).collect();
    heads.dedup();
    heads.sort_unstable();
    heads.dedup();
    if heads.len() == 1 {
        return heads[0].to_string();
    }
    root.file_name().map(|n| n.to_string_lossy().into_owned()).filter(|n| !n.is_empty()).unwrap_or_else(|| "library".into())
}
