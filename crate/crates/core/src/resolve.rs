//! Resolution of names in a user snippet against a version graph: import
//! bindings, maximal dotted chains and longest-prefix lookup.

use std::collections::BTreeMap;

use crate::graph::{EdgeKind, NodeId, VersionGraph};
use crate::syntax::{Expr, ExprKind, ImportAlias, Module, Span, Stmt, StmtKind};

/// Where a name binding comes from.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportSite {
    /// Span of the whole import statement.
    pub stmt_span: Span,
    /// Span of this `a.b [as c]` entry.
    pub entry_span: Span,
    /// `from x import y` rather than `import x`.
    pub from_import: bool,
    pub has_alias: bool,
    /// For `from` imports: module path and the number of entries in the
    /// statement.
    pub from_module: Option<Vec<String>>,
    pub entries: usize,
    pub names_span: Span,
    pub line_indent: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NameBinding {
    pub name: String,
    /// Fully qualified path the name stands for.
    pub target: Vec<String>,
    /// None for implicit top-level package names.
    pub site: Option<ImportSite>,
}

#[derive(Debug, Default, Clone)]
pub struct Bindings {
    pub names: BTreeMap<String, NameBinding>,
    /// `import a.b.c` entries, which bind `a` but also load `a.b.c`.
    pub module_imports: Vec<(Vec<String>, ImportSite)>,
    /// Relative imports and other entries that cannot be followed.
    pub unresolvable: Vec<String>,
    /// Top-level package names of the library.
    pub roots: Vec<String>,
}

impl Bindings {
    pub fn get(&self, name: &str) -> Option<&NameBinding> {
        self.names.get(name)
    }
}

fn indent_of(src: &str, offset: usize) -> usize {
    let line_start = src[..offset].rfind('\n').map(|i| i + 1).unwrap_or(0);
    src[line_start..].len() - src[line_start..].trim_start_matches([' ', '\t']).len()
}

fn site(src: &str, stmt: &Stmt, entry: &ImportAlias, from: Option<(&[String], usize, Span)>) -> ImportSite {
    ImportSite {
        stmt_span: stmt.span,
        entry_span: entry.span,
        from_import: from.is_some(),
        has_alias: entry.alias.is_some(),
        from_module: from.map(|(m, _, _)| m.to_vec()),
        entries: from.map(|(_, n, _)| n).unwrap_or(1),
        names_span: from.map(|(_, _, s)| s).unwrap_or(entry.span),
        line_indent: indent_of(src, stmt.span.start),
    }
}

/// Collects import bindings from every statement of the snippet; later
/// imports of the same name replace earlier ones. Top-level packages of the
/// library are bound implicitly.
pub fn collect_bindings(src: &str, module: &Module, graph: &VersionGraph) -> Bindings {
    let mut b = Bindings { roots: top_level_names(graph), ..Bindings::default() };
    for top in b.roots.clone() {
        b.names.insert(top.clone(), NameBinding { name: top.clone(), target: vec![top], site: None });
    }
    crate::syntax::walk_stmts(&module.body, &mut |stmt| match &stmt.kind {
        StmtKind::Import(entries) => {
            for entry in entries {
                let path: Vec<String> = entry.path.parts.iter().map(|p| p.name.clone()).collect();
                let s = site(src, stmt, entry, None);
                let name = entry.bound_name(false).to_string();
                let target = if entry.alias.is_some() { path.clone() } else { vec![path[0].clone()] };
                b.module_imports.push((path, s.clone()));
                b.names.insert(name.clone(), NameBinding { name, target, site: Some(s) });
            }
        }
        StmtKind::ImportFrom(f) => {
            let module_path: Vec<String> =
                f.module.iter().flat_map(|m| m.parts.iter().map(|p| p.name.clone())).collect();
            if f.level > 0 {
                let text = format!("{}{}", ".".repeat(f.level), module_path.join("."));
                for entry in &f.names {
                    b.unresolvable.push(format!("{text}.{}", entry.path.dotted()).replace("..", "."));
                }
                if f.star || f.names.is_empty() {
                    b.unresolvable.push(text);
                }
                return;
            }
            if f.star {
                let qn = module_path.join(".");
                if let Some(id) = graph.lookup_node(&qn) {
                    for e in graph.out_edges(id).filter(|e| e.kind.is_containment() && e.kind != EdgeKind::HasParameter) {
                        if let Some(child) = graph.entity(&e.target) {
                            let mut target = module_path.clone();
                            target.push(child.name.clone());
                            b.names.insert(child.name.clone(), NameBinding { name: child.name.clone(), target, site: None });
                        }
                    }
                }
                return;
            }
            for entry in &f.names {
                let mut target = module_path.clone();
                target.extend(entry.path.parts.iter().map(|p| p.name.clone()));
                let s = site(src, stmt, entry, Some((&module_path, f.names.len(), f.names_span)));
                let name = entry.bound_name(true).to_string();
                b.names.insert(name.clone(), NameBinding { name, target, site: Some(s) });
            }
        }
        _ => {}
    });
    b
}

/// Names of the modules directly under the library node.
pub fn top_level_names(graph: &VersionGraph) -> Vec<String> {
    graph
        .out_edges(graph.root())
        .filter(|e| e.kind == EdgeKind::HasModule)
        .filter_map(|e| graph.entity(&e.target).map(|m| m.qualified_name.clone()))
        .collect()
}

/// Longest prefix of `path` that names an entity in `graph`, with the
/// number of segments it covers.
pub fn resolve_prefix<'g>(graph: &'g VersionGraph, path: &[String]) -> Option<(&'g NodeId, usize)> {
    (1..=path.len()).rev().find_map(|n| graph.lookup_node(&path[..n].join(".")).map(|id| (id, n)))
}

/// Maximal `a.b.c` chains in source order, including those nested inside
/// other expressions (call arguments, subscripts, ...).
pub fn dotted_chains(body: &[Stmt]) -> Vec<&Expr> {
    let mut out = Vec::new();
    crate::syntax::walk_stmts(body, &mut |stmt| {
        for e in stmt.expressions() {
            chains_in(e, &mut out);
        }
    });
    out
}

fn chains_in<'a>(e: &'a Expr, out: &mut Vec<&'a Expr>) {
    match &e.kind {
        ExprKind::Name(_) => out.push(e),
        ExprKind::Attribute { value, .. } => {
            if e.dotted_path().is_some() {
                out.push(e);
            } else {
                chains_in(value, out);
            }
        }
        _ => {
            for c in e.children() {
                chains_in(c, out);
            }
        }
    }
}

/// What a source chain refers to after binding expansion.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainTarget<'g> {
    /// A function or method; `consumed` counts source segments that make up
    /// the callable reference (the rest are attribute accesses on it).
    Callable { node: &'g NodeId, consumed: usize },
    /// A module or class named in full.
    Container(&'g NodeId),
    /// Rooted at the library but not found.
    Unresolved(String),
    /// Not a library name at all.
    Foreign,
}

/// Expands the first segment through `bindings` and resolves the result.
pub fn resolve_chain<'g>(graph: &'g VersionGraph, bindings: &Bindings, segments: &[&str]) -> ChainTarget<'g> {
    let Some(binding) = bindings.get(segments[0]) else { return ChainTarget::Foreign };
    if !bindings.roots.contains(&binding.target[0]) {
        return ChainTarget::Foreign;
    }
    let mut full: Vec<String> = binding.target.clone();
    let base_len = full.len();
    full.extend(segments[1..].iter().map(|s| s.to_string()));
    match resolve_prefix(graph, &full) {
        Some((node, n)) => {
            let entity = graph.entity(node).expect("lookup returns entity nodes");
            if entity.kind.is_callable() {
                let consumed = (n + 1).saturating_sub(base_len).max(1);
                ChainTarget::Callable { node, consumed }
            } else if n == full.len() {
                ChainTarget::Container(node)
            } else {
                ChainTarget::Unresolved(full.join("."))
            }
        }
        None => ChainTarget::Unresolved(full.join(".")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{extract_inventory, SourceTree};
    use crate::graph::build_graph;
    use crate::syntax::parse_module;

    fn graph() -> VersionGraph {
        let files = vec![
            ("acme/__init__.py".to_string(), String::new()),
            ("acme/utils.py".to_string(), "def load(path): pass\nclass Reader:\n    def read(self): pass\n".to_string()),
        ];
        let inv = extract_inventory(&SourceTree::new("/x/acme", "1", files).unwrap()).unwrap().inventory;
        build_graph(&inv).unwrap()
    }

    fn resolve(src: &str) -> Vec<String> {
        let g = graph();
        let m = parse_module(src).unwrap();
        let b = collect_bindings(src, &m, &g);
        dotted_chains(&m.body)
            .into_iter()
            .map(|e| {
                let segs = e.dotted_path().unwrap();
                match resolve_chain(&g, &b, &segs) {
                    ChainTarget::Callable { node, consumed } => format!("call {node} {consumed}"),
                    ChainTarget::Container(n) => format!("container {n}"),
                    ChainTarget::Unresolved(s) => format!("unresolved {s}"),
                    ChainTarget::Foreign => format!("foreign {}", segs.join(".")),
                }
            })
            .collect()
    }

    #[test]
    fn chains_through_bindings() {
        assert_eq!(resolve("from acme.utils import load as ld\nld(p).close()\n"), vec![
            "call 1::acme.utils.load 1",
            "foreign p",
        ]);
        assert_eq!(resolve("import acme.utils\nacme.utils.load(x)\n"), vec!["call 1::acme.utils.load 3", "foreign x"]);
        assert_eq!(resolve("import acme.utils as u\nu.Reader.read\nu.nothing\n"), vec![
            "call 1::acme.utils.Reader.read 3",
            "unresolved acme.utils.nothing",
        ]);
        assert_eq!(resolve("acme.utils\n"), vec!["container 1::acme.utils"]);
        assert_eq!(resolve("import numpy as np\nnp.zeros(3)\n"), vec!["foreign np.zeros"]);
        assert_eq!(resolve("from acme.utils import *\nload(1)\n"), vec!["call 1::acme.utils.load 1"]);
    }

    #[test]
    fn maximal_chains_only() {
        let m = parse_module("a.b.c(d.e, f[g].h)\n").unwrap();
        let texts: Vec<String> = dotted_chains(&m.body).iter().map(|e| e.dotted_path().unwrap().join(".")).collect();
        assert_eq!(texts, vec!["a.b.c", "d.e", "f", "g"]);
    }

    #[test]
    fn relative_imports_are_unresolvable() {
        let g = graph();
        let src = "from .utils import load\n";
        let m = parse_module(src).unwrap();
        let b = collect_bindings(src, &m, &g);
        assert_eq!(b.unresolvable, vec![".utils.load"]);
    }
}
