//! Deterministic source rewriting along evolution paths.
//!
//! Each reference to a path source is rewritten in one of three ways:
//! the call site alone when the import binding still leads to the target;
//! the import statement (plus call sites when the bound name changes) when
//! every use of that binding moves the same way; otherwise a fresh
//! `import <module>` and a fully qualified call site.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::{MigrateError, MigrationResult, Outcome, DETERMINISTIC};
use crate::diff::ParamChangeKind;
use crate::extract::Parameter;
use crate::graph::NodeId;
use crate::resolve::{collect_bindings, dotted_chains, resolve_chain, Bindings, ChainTarget, ImportSite};
use crate::retrieval::{EvolutionPath, VersionChain};
use crate::syntax::{self, Arg, ArgKind, Expr, ExprKind, Span, StmtKind};

#[derive(Debug, Clone, PartialEq, Eq)]
struct Edit {
    start: usize,
    end: usize,
    text: String,
}

impl Edit {
    fn replace(span: Span, text: impl Into<String>) -> Self {
        Self { start: span.start, end: span.end, text: text.into() }
    }

    fn insert(at: usize, text: impl Into<String>) -> Self {
        Self { start: at, end: at, text: text.into() }
    }
}

/// Applies non-overlapping edits. Identical duplicates collapse; insertions
/// at one offset keep their creation order.
fn apply_edits(src: &str, mut edits: Vec<Edit>) -> Result<String, MigrateError> {
    edits.sort_by_key(|e| (e.start, e.end != e.start, e.end));
    edits.dedup_by(|b, a| a.start == b.start && a.end == b.end && a.text == b.text && a.start != a.end);
    let mut out = String::with_capacity(src.len());
    let mut cursor = 0;
    for e in &edits {
        if e.start < cursor {
            return Err(MigrateError::RewriteConflict(format!(
                "edits overlap at byte {}: '{}' vs earlier edit ending at {cursor}",
                e.start,
                &src[e.start..e.end.max(e.start)]
            )));
        }
        out.push_str(&src[cursor..e.start]);
        out.push_str(&e.text);
        cursor = e.end;
    }
    out.push_str(&src[cursor..]);
    Ok(out)
}

/// Net effect of one path on its source API.
#[derive(Debug, Clone)]
struct Transform {
    new_path: Vec<String>,
    new_module: Vec<String>,
    /// Keyword renames, original name -> final name.
    renames: BTreeMap<String, String>,
    removed: BTreeSet<String>,
    required_added: Vec<Parameter>,
    final_params: Option<Vec<Parameter>>,
}

fn split(qn: &str) -> Vec<String> {
    qn.split('.').map(str::to_string).collect()
}

fn transform_for(path: &EvolutionPath, chain: &VersionChain) -> Result<Transform, MigrateError> {
    path.validate().map_err(MigrateError::InvalidPath)?;
    let source = path.source().ok_or_else(|| MigrateError::InvalidPath("path has no source".into()))?;
    let terminal = crate::retrieval::parse_rendered(&path.terminal)
        .ok_or_else(|| MigrateError::InvalidPath(format!("terminal '{}' is not an API", path.terminal)))?;

    // (original name, current name, removed)
    let mut names: Vec<(String, String, bool)> = Vec::new();
    let mut added: Vec<Parameter> = Vec::new();
    for t in &path.triplets {
        let from = t.subject_node().ok_or_else(|| MigrateError::InvalidPath(t.render()))?;
        let to = t.object_node();
        let edge = chain
            .edge(&from, to.as_ref(), t.relation)
            .ok_or_else(|| MigrateError::InvalidPath(format!("'{}' is not an edge of the chain", t.render())))?;
        for c in &edge.param_changes {
            let old_name = c.old_param.as_ref().map(|p| p.name.as_str());
            let current = |names: &mut Vec<(String, String, bool)>, n: &str| -> Option<usize> {
                if let Some(i) = names.iter().position(|(_, cur, removed)| cur == n && !removed) {
                    return Some(i);
                }
                None
            };
            match c.change {
                ParamChangeKind::ParamRenamed => {
                    let (o, n) = (old_name.unwrap(), c.new_param.as_ref().unwrap());
                    if let Some(a) = added.iter_mut().find(|p| p.name == o) {
                        *a = n.clone();
                    } else if let Some(i) = current(&mut names, o) {
                        names[i].1 = n.name.clone();
                    } else {
                        names.push((o.to_string(), n.name.clone(), false));
                    }
                }
                ParamChangeKind::ParamRemoved => {
                    let o = old_name.unwrap();
                    if let Some(pos) = added.iter().position(|p| p.name == o) {
                        added.remove(pos);
                    } else if let Some(i) = current(&mut names, o) {
                        names[i].2 = true;
                    } else {
                        names.push((o.to_string(), o.to_string(), true));
                    }
                }
                ParamChangeKind::ParamAdded => added.push(c.new_param.clone().unwrap()),
                _ => {}
            }
        }
    }

    let old_graph = chain.graph(chain.first());
    let new_graph = chain.graph(chain.last());
    let new_qn = terminal.local().to_string();
    let new_path = split(&new_qn);
    let new_entity = new_graph.and_then(|g| g.lookup_node(&new_qn).and_then(|id| g.entity(id)));
    let new_module = match new_entity {
        Some(e) => split(&e.defined_in_module),
        None => {
            // Assume the same class nesting as the source.
            let depth = old_graph
                .and_then(|g| g.entity(&source))
                .map(|e| split(&e.qualified_name).len() - split(&e.defined_in_module).len())
                .unwrap_or(1);
            new_path[..new_path.len().saturating_sub(depth).max(1)].to_vec()
        }
    };
    Ok(Transform {
        new_path,
        new_module,
        renames: names.iter().filter(|(o, n, r)| !r && o != n).map(|(o, n, _)| (o.clone(), n.clone())).collect(),
        removed: names.iter().filter(|(_, _, r)| *r).map(|(o, _, _)| o.clone()).collect(),
        required_added: added.into_iter().filter(Parameter::is_required).collect(),
        final_params: new_entity.map(|e| e.parameters.clone()),
    })
}

/// A chain in the snippet that refers to a path source.
struct SiteRef<'a> {
    /// The part of the chain naming the callable.
    callee: &'a Expr,
    /// The whole maximal chain.
    chain: &'a Expr,
    binding: String,
    /// Source segments after the bound name, up to the callable.
    rest: Vec<String>,
    source: NodeId,
}

/// Descends `n` attribute levels from the end of a chain.
fn chain_prefix(e: &Expr, drop: usize) -> &Expr {
    let mut cur = e;
    for _ in 0..drop {
        if let ExprKind::Attribute { value, .. } = &cur.kind {
            cur = value;
        }
    }
    cur
}

fn starts_with(path: &[String], prefix: &[String]) -> bool {
    path.len() >= prefix.len() && path[..prefix.len()] == *prefix
}

fn dotted(parts: &[String]) -> String {
    parts.join(".")
}

/// Rewrites `old_code` along the first path of every source.
pub fn apply_path_rewrite(old_code: &str, paths: &[EvolutionPath], chain: &VersionChain) -> Result<MigrationResult, MigrateError> {
    let module = syntax::parse_module(old_code).map_err(MigrateError::UnparseableSnippet)?;
    let mut chosen: Vec<(NodeId, &EvolutionPath)> = Vec::new();
    for p in paths {
        let source = p.source().ok_or_else(|| MigrateError::InvalidPath("path has no source".into()))?;
        if !chosen.iter().any(|(s, _)| *s == source) {
            chosen.push((source, p));
        }
    }
    let used_paths: Vec<EvolutionPath> = chosen.iter().map(|(_, p)| (*p).clone()).collect();
    if chosen.iter().any(|(_, p)| !p.is_live()) {
        return Ok(MigrationResult {
            new_code: old_code.to_string(),
            used_paths,
            backend: DETERMINISTIC.to_string(),
            outcome: Outcome::NoTargetApiRemoved,
            warnings: Vec::new(),
        });
    }
    let old_graph = chain
        .graph(chain.first())
        .ok_or_else(|| MigrateError::MissingGraph(chain.first().to_string()))?;
    let mut transforms: HashMap<NodeId, Transform> = HashMap::new();
    for (source, p) in &chosen {
        transforms.insert(source.clone(), transform_for(p, chain)?);
    }

    let bindings = collect_bindings(old_code, &module, old_graph);
    let mut sites: Vec<SiteRef> = Vec::new();
    // Binding name -> whether every chain through it is a migrated source.
    let mut binding_only_sources: BTreeMap<String, bool> = BTreeMap::new();
    // Full old paths reached through each binding, for module-import upkeep.
    let mut binding_paths: Vec<(String, Vec<String>, Option<NodeId>)> = Vec::new();
    for expr in dotted_chains(&module.body) {
        let segs = expr.dotted_path().unwrap();
        let Some(binding) = bindings.get(segs[0]) else { continue };
        let target = resolve_chain(old_graph, &bindings, &segs);
        if matches!(target, ChainTarget::Foreign) {
            continue;
        }
        let mut full = binding.target.clone();
        full.extend(segs[1..].iter().map(|s| s.to_string()));
        let entry = binding_only_sources.entry(segs[0].to_string()).or_insert(true);
        match target {
            ChainTarget::Callable { node, consumed } if transforms.contains_key(node) => {
                binding_paths.push((segs[0].to_string(), full, Some(node.clone())));
                sites.push(SiteRef {
                    callee: chain_prefix(expr, segs.len() - consumed),
                    chain: expr,
                    binding: segs[0].to_string(),
                    rest: segs[1..consumed].iter().map(|s| s.to_string()).collect(),
                    source: node.clone(),
                });
            }
            _ => {
                binding_paths.push((segs[0].to_string(), full, None));
                *entry = false;
            }
        }
    }

    let mut edits: Vec<Edit> = Vec::new();
    let mut new_imports: Vec<String> = Vec::new();
    // From-import entries to move: entry span start -> (module, name).
    let mut from_moves: BTreeMap<usize, (Vec<String>, String)> = BTreeMap::new();

    // Decide per binding whether its import can be rewritten as a whole.
    let mut import_rewrites: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let by_binding: BTreeMap<&str, Vec<&SiteRef>> = sites.iter().fold(BTreeMap::new(), |mut m, s| {
        m.entry(s.binding.as_str()).or_default().push(s);
        m
    });
    for (name, refs) in &by_binding {
        let binding = bindings.get(name).unwrap();
        let needs_move = refs.iter().any(|r| !starts_with(&transforms[&r.source].new_path, &binding.target));
        if !needs_move || binding.site.is_none() || !binding_only_sources[*name] {
            continue;
        }
        let site = binding.site.as_ref().unwrap();
        let mut common: Option<Vec<String>> = None;
        let mut ok = true;
        for r in refs {
            let t = &transforms[&r.source];
            if t.new_path.len() < r.rest.len() + 1 || t.new_path[t.new_path.len() - r.rest.len()..] != r.rest[..] {
                ok = false;
                break;
            }
            let prefix = t.new_path[..t.new_path.len() - r.rest.len()].to_vec();
            // The rewritten import must still name a module (plain import)
            // or something inside a module (from import).
            let importable = if site.from_import {
                prefix.len() >= 2 && prefix.len() - 1 <= t.new_module.len()
            } else {
                prefix.len() <= t.new_module.len()
            };
            if !importable || common.as_ref().is_some_and(|c| *c != prefix) {
                ok = false;
                break;
            }
            common = Some(prefix);
        }
        if ok {
            import_rewrites.insert(name.to_string(), common.unwrap());
        }
    }

    for (name, new_target) in &import_rewrites {
        let binding = bindings.get(name).unwrap();
        let site: &ImportSite = binding.site.as_ref().unwrap();
        if site.from_import {
            let (last, module_path) = new_target.split_last().unwrap();
            from_moves.insert(site.entry_span.start, (module_path.to_vec(), last.clone()));
        } else {
            edits.push(Edit::replace(site.entry_span, format!("{} as {}", dotted(new_target), name)));
        }
    }

    for s in &sites {
        let t = &transforms[&s.source];
        let binding = bindings.get(&s.binding).unwrap();
        let original: Vec<String> = s.callee.dotted_path().unwrap().iter().map(|x| x.to_string()).collect();
        let replacement: Vec<String> = if let Some(new_target) = import_rewrites.get(&s.binding) {
            let site = binding.site.as_ref().unwrap();
            let bound = if site.has_alias || !site.from_import { s.binding.clone() } else { new_target.last().unwrap().clone() };
            std::iter::once(bound).chain(s.rest.iter().cloned()).collect()
        } else if starts_with(&t.new_path, &binding.target) {
            std::iter::once(s.binding.clone()).chain(t.new_path[binding.target.len()..].iter().cloned()).collect()
        } else {
            let module = dotted(&t.new_module);
            if !new_imports.contains(&module) && !already_imported(&bindings, &t.new_module) {
                new_imports.push(module);
            }
            t.new_path.clone()
        };
        if replacement != original {
            edits.push(Edit::replace(s.callee.span, dotted(&replacement)));
        }
    }

    module_import_upkeep(&bindings, &binding_paths, &transforms, &mut edits, &mut new_imports);
    regenerate_from_imports(old_code, &module.body, &from_moves, &mut edits);
    call_argument_edits(old_code, &module.body, &sites, &transforms, &mut edits);

    if !new_imports.is_empty() {
        let last_import = module
            .body
            .iter()
            .filter(|s| matches!(s.kind, StmtKind::Import(_) | StmtKind::ImportFrom(_)))
            .last();
        let block: Vec<String> = new_imports.iter().map(|m| format!("import {m}")).collect();
        match last_import {
            Some(stmt) => edits.push(Edit::insert(stmt.span.end, format!("\n{}", block.join("\n")))),
            None => edits.push(Edit::insert(0, format!("{}\n", block.join("\n")))),
        }
    }

    let new_code = apply_edits(old_code, edits)?;
    let pure_retain = used_paths.iter().all(EvolutionPath::is_pure_retain);
    let outcome = if pure_retain && same_modulo_whitespace(old_code, &new_code) {
        Outcome::UnchangedRetain
    } else {
        Outcome::Migrated
    };
    Ok(MigrationResult { new_code, used_paths, backend: DETERMINISTIC.to_string(), outcome, warnings: Vec::new() })
}

pub(crate) fn same_modulo_whitespace(a: &str, b: &str) -> bool {
    a.split_whitespace().eq(b.split_whitespace())
}

fn already_imported(bindings: &Bindings, module: &[String]) -> bool {
    bindings.module_imports.iter().any(|(p, site)| p == module && !site.has_alias)
}

/// Keeps `import a.b` statements in step with relocations made through the
/// plain `a` binding: a module import that no longer serves any reference
/// is replaced by the new module, otherwise the new module is added.
fn module_import_upkeep(
    bindings: &Bindings,
    binding_paths: &[(String, Vec<String>, Option<NodeId>)],
    transforms: &HashMap<NodeId, Transform>,
    edits: &mut Vec<Edit>,
    new_imports: &mut Vec<String>,
) {
    let mut replaced = BTreeSet::new();
    for (path, site) in &bindings.module_imports {
        if site.has_alias || path.len() < 2 {
            continue;
        }
        let root = &path[0];
        let mut moved_to: Vec<String> = Vec::new();
        let mut still_needed = false;
        for (binding, full, source) in binding_paths {
            if binding != root || !starts_with(full, path) {
                continue;
            }
            match source.as_ref().map(|s| &transforms[s]) {
                Some(t) if !starts_with(&t.new_path, path) => {
                    let m = dotted(&t.new_module);
                    if !moved_to.contains(&m) {
                        moved_to.push(m);
                    }
                }
                _ => still_needed = true,
            }
        }
        moved_to.retain(|m| !bindings.module_imports.iter().any(|(p, s)| dotted(p) == *m && !s.has_alias));
        if moved_to.is_empty() {
            continue;
        }
        let mut rest = moved_to.into_iter();
        if !still_needed && replaced.insert(site.entry_span.start) {
            edits.push(Edit::replace(site.entry_span, rest.next().unwrap()));
        }
        for m in rest {
            if !new_imports.contains(&m) {
                new_imports.push(m);
            }
        }
    }
}

/// Rebuilds `from m import a, b` statements whose entries move to other
/// modules, one statement per target module in first-appearance order.
fn regenerate_from_imports(src: &str, body: &[syntax::Stmt], moves: &BTreeMap<usize, (Vec<String>, String)>, edits: &mut Vec<Edit>) {
    if moves.is_empty() {
        return;
    }
    syntax::walk_stmts(body, &mut |stmt| {
        let StmtKind::ImportFrom(f) = &stmt.kind else { return };
        if f.level > 0 || !f.names.iter().any(|e| moves.contains_key(&e.span.start)) {
            return;
        }
        let original_module = f.module.as_ref().map(|m| m.span.text(src).to_string()).unwrap_or_default();
        let mut groups: Vec<(String, Vec<String>)> = Vec::new();
        for entry in &f.names {
            let (module, text) = match moves.get(&entry.span.start) {
                Some((m, name)) => {
                    let alias = entry.alias.as_ref().map(|a| format!(" as {}", a.name)).unwrap_or_default();
                    (dotted(m), format!("{name}{alias}"))
                }
                None => (original_module.clone(), entry.span.text(src).to_string()),
            };
            match groups.iter_mut().find(|(m, _)| *m == module) {
                Some((_, entries)) => entries.push(text),
                None => groups.push((module, vec![text])),
            }
        }
        let line_start = src[..stmt.span.start].rfind('\n').map(|i| i + 1).unwrap_or(0);
        let indent: String = src[line_start..stmt.span.start].chars().take_while(|c| c.is_whitespace()).collect();
        let text = groups
            .iter()
            .map(|(m, entries)| format!("from {m} import {}", entries.join(", ")))
            .collect::<Vec<_>>()
            .join(&format!("\n{indent}"));
        edits.push(Edit::replace(stmt.span, text));
    });
}

fn call_argument_edits(src: &str, body: &[syntax::Stmt], sites: &[SiteRef], transforms: &HashMap<NodeId, Transform>, edits: &mut Vec<Edit>) {
    let mut calls: HashMap<(usize, usize), (&Vec<Arg>, Span)> = HashMap::new();
    syntax::walk_exprs(body, &mut |e, _| {
        if let ExprKind::Call { func, args, parens } = &e.kind {
            calls.insert((func.span.start, func.span.end), (args, *parens));
        }
    });
    for s in sites {
        if s.callee.span != s.chain.span {
            continue;
        }
        let Some((args, parens)) = calls.get(&(s.callee.span.start, s.callee.span.end)) else { continue };
        let t = &transforms[&s.source];

        let removed: Vec<usize> = args
            .iter()
            .enumerate()
            .filter(|(_, a)| a.keyword.as_ref().is_some_and(|k| t.removed.contains(&k.name)))
            .map(|(i, _)| i)
            .collect();
        for (i, a) in args.iter().enumerate() {
            if let Some(k) = &a.keyword {
                if let Some(new_name) = t.renames.get(&k.name) {
                    if !removed.contains(&i) {
                        edits.push(Edit::replace(k.span, new_name.clone()));
                    }
                }
            }
        }
        edits.extend(removal_edits(args, &removed));

        let has_double_star = args.iter().any(|a| a.kind == ArgKind::DoubleStarred);
        let positional = args.iter().filter(|a| a.kind == ArgKind::Positional).count();
        let missing: Vec<&Parameter> = t
            .required_added
            .iter()
            .filter(|p| {
                let passed_by_keyword = args.iter().any(|a| a.keyword.as_ref().is_some_and(|k| k.name == p.name));
                let passed_by_position = t
                    .final_params
                    .as_ref()
                    .and_then(|ps| ps.iter().position(|q| q.name == p.name))
                    .is_some_and(|idx| idx < positional && p.kind != crate::extract::ParameterKind::KeywordOnly);
                !passed_by_keyword && !passed_by_position && !has_double_star
            })
            .collect();
        if missing.is_empty() {
            continue;
        }
        let kwargs: Vec<String> = missing.iter().map(|p| format!("{}=...", p.name)).collect();
        let kept = args.len() > removed.len();
        let insertion = match args.iter().enumerate().rev().find(|(i, _)| !removed.contains(i)) {
            Some((_, last)) if kept => Edit::insert(last.span.end, format!(", {}", kwargs.join(", "))),
            _ => Edit::insert(parens.start + 1, kwargs.join(", ")),
        };
        edits.push(insertion);
        let eol = src[parens.end..].find('\n').map(|i| parens.end + i).unwrap_or(src.len());
        let names: Vec<&str> = missing.iter().map(|p| p.name.as_str()).collect();
        edits.push(Edit::insert(eol, format!("  # TODO: supply {}", names.join(", "))));
    }
}

/// Deletes the given arguments together with one adjacent comma each.
fn removal_edits(args: &[Arg], removed: &[usize]) -> Vec<Edit> {
    let mut out = Vec::new();
    if removed.is_empty() {
        return out;
    }
    if removed.len() == args.len() {
        out.push(Edit::replace(args[0].span.join(args[args.len() - 1].span), ""));
        return out;
    }
    let first_kept = (0..args.len()).find(|i| !removed.contains(i)).unwrap();
    if first_kept > 0 {
        out.push(Edit::replace(Span::new(args[0].span.start, args[first_kept].span.start), ""));
    }
    for &i in removed.iter().filter(|&&i| i > first_kept) {
        out.push(Edit::replace(Span::new(args[i - 1].span.end, args[i].span.end), ""));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edits_apply_in_order() {
        let src = "abcdef";
        let out = apply_edits(src, vec![Edit::insert(3, "X"), Edit::replace(Span::new(0, 1), "A"), Edit::insert(3, "Y")]).unwrap();
        assert_eq!(out, "AbcXYdef");
        let dup = vec![Edit::replace(Span::new(1, 2), "Z"), Edit::replace(Span::new(1, 2), "Z")];
        assert_eq!(apply_edits(src, dup).unwrap(), "aZcdef");
        let clash = vec![Edit::replace(Span::new(1, 3), "Z"), Edit::replace(Span::new(2, 4), "W")];
        assert!(matches!(apply_edits(src, clash), Err(MigrateError::RewriteConflict(_))));
    }

    #[test]
    fn argument_removal_keeps_commas_balanced() {
        let check = |src: &str, removed: &[usize], expected: &str| {
            let m = syntax::parse_module(src).unwrap();
            let syntax::StmtKind::Expr(e) = &m.body[0].kind else { panic!() };
            let ExprKind::Call { args, .. } = &e.kind else { panic!() };
            assert_eq!(apply_edits(src, removal_edits(args, removed)).unwrap(), expected);
        };
        check("f(a, b=1, c=2)\n", &[1], "f(a, c=2)\n");
        check("f(a, b=1, c=2)\n", &[0, 1], "f(c=2)\n");
        check("f(a, b=1, c=2)\n", &[1, 2], "f(a)\n");
        check("f(b=1)\n", &[0], "f()\n");
        check("f(a, b=1,)\n", &[1], "f(a,)\n");
    }
}
