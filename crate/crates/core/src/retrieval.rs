//! Locating library references in a snippet, aligning version graphs along a
//! chain of releases and ranking evolution paths.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diff::{EvolutionEdge, EvolutionGraph, EvolutionKind};
use crate::graph::{NodeId, VersionGraph};
use crate::resolve::{collect_bindings, dotted_chains, resolve_chain, resolve_prefix, ChainTarget};
use crate::syntax::{parse_module, StmtKind, SyntaxError};

pub const DEFAULT_PATH_LIMIT: usize = 5;
pub const TOMBSTONE: &str = "(removed)";

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("snippet does not parse: {0}")]
    UnparseableSnippet(SyntaxError),
    #[error("no evolution graph for {old} -> {new}")]
    ChainGap { old: String, new: String },
    #[error("'{0}' is not a source of the aligned subgraph")]
    SourceNotInSubgraph(NodeId),
    #[error("invalid version chain: {0}")]
    InvalidChain(String),
    #[error("graph is for version '{found}' but the query starts at '{expected}'")]
    VersionMismatch { expected: String, found: String },
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("path limit must be positive")]
    InvalidLimit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MigrationQuery {
    pub old_code: String,
    pub old_version: String,
    pub new_version: String,
    #[serde(default)]
    pub description: String,
}

impl MigrationQuery {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.old_version == self.new_version {
            return Err(RetrievalError::InvalidQuery("old and new version are the same".into()));
        }
        if self.old_code.trim().is_empty() {
            return Err(RetrievalError::InvalidQuery("old_code is empty".into()));
        }
        Ok(())
    }
}

/// Ordered releases with a graph per label (where available) and an
/// evolution graph per consecutive pair.
#[derive(Debug, Clone)]
pub struct VersionChain {
    labels: Vec<String>,
    graphs: BTreeMap<String, VersionGraph>,
    evolutions: HashMap<(String, String), EvolutionGraph>,
}

impl VersionChain {
    pub fn new(labels: Vec<String>) -> Result<Self, RetrievalError> {
        if labels.len() < 2 {
            return Err(RetrievalError::InvalidChain("a chain needs at least two versions".into()));
        }
        let unique: BTreeSet<&String> = labels.iter().collect();
        if unique.len() != labels.len() {
            return Err(RetrievalError::InvalidChain("version labels repeat".into()));
        }
        Ok(Self { labels, graphs: BTreeMap::new(), evolutions: HashMap::new() })
    }

    pub fn with_graph(mut self, graph: VersionGraph) -> Result<Self, RetrievalError> {
        if !self.labels.contains(&graph.version_label) {
            return Err(RetrievalError::InvalidChain(format!("graph '{}' is not part of the chain", graph.version_label)));
        }
        self.graphs.insert(graph.version_label.clone(), graph);
        Ok(self)
    }

    pub fn with_evolution(mut self, evolution: EvolutionGraph) -> Result<Self, RetrievalError> {
        let consecutive = self.labels.windows(2).any(|w| w[0] == evolution.old_version && w[1] == evolution.new_version);
        if !consecutive {
            return Err(RetrievalError::InvalidChain(format!(
                "evolution {} -> {} does not join consecutive versions",
                evolution.old_version, evolution.new_version
            )));
        }
        self.evolutions.insert((evolution.old_version.clone(), evolution.new_version.clone()), evolution);
        Ok(self)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn first(&self) -> &str {
        &self.labels[0]
    }

    pub fn last(&self) -> &str {
        self.labels.last().unwrap()
    }

    pub fn graph(&self, label: &str) -> Option<&VersionGraph> {
        self.graphs.get(label)
    }

    pub fn evolution(&self, old: &str, new: &str) -> Option<&EvolutionGraph> {
        self.evolutions.get(&(old.to_string(), new.to_string()))
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Evolution edge between two nodes of consecutive versions; `to` of
    /// None looks up a remove edge.
    pub fn edge(&self, from: &NodeId, to: Option<&NodeId>, kind: EvolutionKind) -> Option<&EvolutionEdge> {
        let i = self.position(from.version())?;
        let next = self.labels.get(i + 1)?;
        self.evolution(&self.labels[i], next)?
            .edges
            .iter()
            .find(|e| e.old.as_ref() == Some(from) && e.new.as_ref() == to && e.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvolutionTriplet {
    pub subject: String,
    pub relation: EvolutionKind,
    pub object: String,
}

/// `1.0.0::acme.utils.load` -> `acme.utils.load@1.0.0`.
pub fn render_node(id: &NodeId) -> String {
    format!("{}@{}", id.local(), id.version())
}

/// Inverse of [`render_node`]; None for the tombstone and malformed text.
pub fn parse_rendered(text: &str) -> Option<NodeId> {
    let (qn, version) = text.trim().split_once('@')?;
    if qn.is_empty() || version.is_empty() {
        return None;
    }
    Some(NodeId::entity(version, qn))
}

impl EvolutionTriplet {
    pub fn subject_node(&self) -> Option<NodeId> {
        parse_rendered(&self.subject)
    }

    pub fn object_node(&self) -> Option<NodeId> {
        parse_rendered(&self.object)
    }

    pub fn is_tombstone(&self) -> bool {
        self.object == TOMBSTONE
    }

    pub fn render(&self) -> String {
        format!("{} -[{}]-> {}", self.subject, self.relation.as_str(), self.object)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionPath {
    pub triplets: Vec<EvolutionTriplet>,
    pub hop_count: usize,
    pub cumulative_score: f64,
    pub terminal: String,
}

impl EvolutionPath {
    pub fn is_live(&self) -> bool {
        self.terminal != TOMBSTONE
    }

    pub fn source(&self) -> Option<NodeId> {
        self.triplets.first().and_then(EvolutionTriplet::subject_node)
    }

    pub fn is_pure_retain(&self) -> bool {
        self.triplets.iter().all(|t| t.relation == EvolutionKind::Retain)
    }

    fn text_key(&self) -> String {
        self.triplets.iter().map(EvolutionTriplet::render).collect::<Vec<_>>().join("\n")
    }

    /// Checks chaining and the hop count invariant.
    pub fn validate(&self) -> Result<(), String> {
        if self.triplets.is_empty() {
            return Err("path has no triplets".into());
        }
        if self.hop_count != self.triplets.len() {
            return Err("hop_count differs from the number of triplets".into());
        }
        for w in self.triplets.windows(2) {
            if w[0].object != w[1].subject {
                return Err(format!("'{}' does not chain into '{}'", w[0].render(), w[1].render()));
            }
        }
        if self.triplets.last().unwrap().object != self.terminal {
            return Err("terminal differs from the last object".into());
        }
        Ok(())
    }
}

/// Live paths first, then fewer hops, higher score, terminal name and
/// finally the triplet text.
pub fn rank_order(a: &EvolutionPath, b: &EvolutionPath) -> Ordering {
    b.is_live()
        .cmp(&a.is_live())
        .then(a.hop_count.cmp(&b.hop_count))
        .then(b.cumulative_score.total_cmp(&a.cumulative_score))
        .then_with(|| a.terminal.cmp(&b.terminal))
        .then_with(|| a.text_key().cmp(&b.text_key()))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "id", rename_all = "snake_case")]
pub enum SubNode {
    Api(NodeId),
    /// Removal marker for the given API.
    Tombstone(NodeId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubEdge {
    pub from: NodeId,
    pub to: Option<NodeId>,
    pub kind: EvolutionKind,
    pub score: f64,
}

impl SubEdge {
    pub fn target(&self) -> SubNode {
        match &self.to {
            Some(t) => SubNode::Api(t.clone()),
            None => SubNode::Tombstone(self.from.clone()),
        }
    }

    pub fn triplet(&self) -> EvolutionTriplet {
        EvolutionTriplet {
            subject: render_node(&self.from),
            relation: self.kind,
            object: self.to.as_ref().map(render_node).unwrap_or_else(|| TOMBSTONE.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub node: SubNode,
    pub hop: usize,
}

/// Nodes and evolution edges reachable forward from the source APIs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedSubgraph {
    pub labels: Vec<String>,
    pub sources: Vec<NodeId>,
    pub nodes: BTreeSet<SubNode>,
    pub edges: Vec<SubEdge>,
    pub visit_log: Vec<Visit>,
    /// Per source, the nodes its BFS reached.
    pub reach: BTreeMap<NodeId, BTreeSet<SubNode>>,
}

impl AlignedSubgraph {
    pub fn final_version(&self) -> &str {
        self.labels.last().map(String::as_str).unwrap_or("")
    }

    pub fn outgoing<'a>(&'a self, node: &'a NodeId) -> impl Iterator<Item = &'a SubEdge> {
        self.edges.iter().filter(move |e| &e.from == node)
    }

    pub fn contains_triplet(&self, t: &EvolutionTriplet) -> bool {
        self.edges.iter().any(|e| &e.triplet() == t)
    }

    /// One triplet per line, in edge order.
    pub fn render(&self) -> String {
        self.edges.iter().map(|e| e.triplet().render() + "\n").collect()
    }
}

const TRAVERSED: [EvolutionKind; 5] = [
    EvolutionKind::Retain,
    EvolutionKind::Rename,
    EvolutionKind::Relocate,
    EvolutionKind::ParameterChange,
    EvolutionKind::Remove,
];

pub fn build_aligned_subgraph(chain: &VersionChain, sources: &[NodeId]) -> Result<AlignedSubgraph, RetrievalError> {
    for w in chain.labels.windows(2) {
        if chain.evolution(&w[0], &w[1]).is_none() {
            return Err(RetrievalError::ChainGap { old: w[0].clone(), new: w[1].clone() });
        }
    }
    for s in sources {
        if s.version() != chain.first() {
            return Err(RetrievalError::InvalidChain(format!("source '{s}' is not in version {}", chain.first())));
        }
    }
    // Outgoing edges per old node, per consecutive pair.
    let mut out: HashMap<&NodeId, Vec<&EvolutionEdge>> = HashMap::new();
    for w in chain.labels.windows(2) {
        for e in &chain.evolution(&w[0], &w[1]).unwrap().edges {
            if let Some(old) = &e.old {
                if TRAVERSED.contains(&e.kind) {
                    out.entry(old).or_default().push(e);
                }
            }
        }
    }

    let mut nodes = BTreeSet::new();
    let mut edges: Vec<SubEdge> = Vec::new();
    let mut edge_seen: HashSet<(NodeId, Option<NodeId>, EvolutionKind)> = HashSet::new();
    let mut visit_log = Vec::new();
    let mut reach = BTreeMap::new();
    let mut unique_sources = Vec::new();
    for s in sources {
        if !unique_sources.contains(s) {
            unique_sources.push(s.clone());
        }
    }
    let last = chain.labels.len() - 1;
    for source in &unique_sources {
        let mut seen: BTreeSet<SubNode> = BTreeSet::new();
        let mut queue = VecDeque::new();
        seen.insert(SubNode::Api(source.clone()));
        queue.push_back((source.clone(), 0usize));
        visit_log.push(Visit { node: SubNode::Api(source.clone()), hop: 0 });
        while let Some((node, hop)) = queue.pop_front() {
            if chain.position(node.version()) == Some(last) {
                continue;
            }
            let mut next: Vec<&&EvolutionEdge> = out.get(&node).map(|v| v.iter().collect()).unwrap_or_default();
            next.sort_by(|a, b| a.new.cmp(&b.new).then(a.kind.cmp(&b.kind)));
            for e in next {
                let sub = SubEdge { from: node.clone(), to: e.new.clone(), kind: e.kind, score: e.score };
                let target = sub.target();
                if edge_seen.insert((sub.from.clone(), sub.to.clone(), sub.kind)) {
                    edges.push(sub);
                }
                if seen.insert(target.clone()) {
                    visit_log.push(Visit { node: target.clone(), hop: hop + 1 });
                    if let SubNode::Api(id) = target {
                        queue.push_back((id, hop + 1));
                    }
                }
            }
        }
        nodes.extend(seen.iter().cloned());
        reach.insert(source.clone(), seen);
    }
    Ok(AlignedSubgraph { labels: chain.labels.clone(), sources: unique_sources, nodes, edges, visit_log, reach })
}

/// All source-to-terminal paths ranked, at most `limit` of them. Terminals
/// are nodes of the final version and removal tombstones; branches that stop
/// earlier are dropped.
pub fn retrieve_paths(subgraph: &AlignedSubgraph, source: &NodeId, limit: usize) -> Result<Vec<EvolutionPath>, RetrievalError> {
    if limit == 0 {
        return Err(RetrievalError::InvalidLimit);
    }
    if !subgraph.sources.contains(source) {
        return Err(RetrievalError::SourceNotInSubgraph(source.clone()));
    }
    let mut adjacency: HashMap<&NodeId, Vec<&SubEdge>> = HashMap::new();
    for e in &subgraph.edges {
        adjacency.entry(&e.from).or_default().push(e);
    }
    let final_version = subgraph.final_version();
    let mut paths = Vec::new();
    let mut stack: Vec<&SubEdge> = Vec::new();
    enumerate(source, &adjacency, final_version, &mut stack, &mut paths);
    paths.sort_by(rank_order);
    paths.truncate(limit);
    Ok(paths)
}

fn enumerate<'a>(
    node: &NodeId,
    adjacency: &HashMap<&NodeId, Vec<&'a SubEdge>>,
    final_version: &str,
    stack: &mut Vec<&'a SubEdge>,
    out: &mut Vec<EvolutionPath>,
) {
    if node.version() == final_version {
        if !stack.is_empty() {
            out.push(path_from(stack));
        }
        return;
    }
    for e in adjacency.get(node).into_iter().flatten() {
        stack.push(e);
        match &e.to {
            Some(next) => enumerate(next, adjacency, final_version, stack, out),
            None => out.push(path_from(stack)),
        }
        stack.pop();
    }
}

fn path_from(edges: &[&SubEdge]) -> EvolutionPath {
    let triplets: Vec<EvolutionTriplet> = edges.iter().map(|e| e.triplet()).collect();
    EvolutionPath {
        hop_count: triplets.len(),
        cumulative_score: edges.iter().map(|e| e.score).product(),
        terminal: triplets.last().map(|t| t.object.clone()).unwrap_or_default(),
        triplets,
    }
}

/// Paths for every source, keyed by source.
pub fn retrieve_all(subgraph: &AlignedSubgraph, limit: usize) -> Result<Vec<(NodeId, Vec<EvolutionPath>)>, RetrievalError> {
    subgraph.sources.iter().map(|s| Ok((s.clone(), retrieve_paths(subgraph, s, limit)?))).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct References {
    pub matched: Vec<NodeId>,
    pub advisory: Vec<String>,
}

pub fn locate_api_references(query: &MigrationQuery, graph: &VersionGraph) -> Result<References, RetrievalError> {
    if graph.version_label != query.old_version {
        return Err(RetrievalError::VersionMismatch { expected: query.old_version.clone(), found: graph.version_label.clone() });
    }
    locate_in_source(&query.old_code, graph)
}

/// Same as [`locate_api_references`] without the version check.
pub fn locate_in_source(src: &str, graph: &VersionGraph) -> Result<References, RetrievalError> {
    let module = parse_module(src).map_err(RetrievalError::UnparseableSnippet)?;
    let bindings = collect_bindings(src, &module, graph);
    let mut refs = References::default();
    let push_match = |refs: &mut References, id: &NodeId| {
        if !refs.matched.contains(id) {
            refs.matched.push(id.clone());
        }
    };
    let push_advisory = |refs: &mut References, s: String| {
        if !refs.advisory.contains(&s) {
            refs.advisory.push(s);
        }
    };
    for u in &bindings.unresolvable {
        push_advisory(&mut refs, u.clone());
    }
    // Import entries and chains interleaved in source order.
    let mut events: Vec<(usize, Event)> = Vec::new();
    crate::syntax::walk_stmts(&module.body, &mut |stmt| match &stmt.kind {
        StmtKind::ImportFrom(f) if f.level == 0 && !f.star => {
            let base: Vec<String> = f.module.iter().flat_map(|m| m.parts.iter().map(|p| p.name.clone())).collect();
            for entry in &f.names {
                let mut path = base.clone();
                path.extend(entry.path.parts.iter().map(|p| p.name.clone()));
                events.push((entry.span.start, Event::Import(path)));
            }
        }
        StmtKind::Import(entries) => {
            for entry in entries {
                events.push((entry.span.start, Event::Import(entry.path.parts.iter().map(|p| p.name.clone()).collect())));
            }
        }
        _ => {}
    });
    for chain in dotted_chains(&module.body) {
        events.push((chain.span.start, Event::Chain(chain.dotted_path().unwrap().iter().map(|s| s.to_string()).collect())));
    }
    events.sort_by_key(|(pos, _)| *pos);
    for (_, event) in events {
        match event {
            Event::Import(path) => {
                if !bindings.roots.contains(&path[0]) {
                    continue;
                }
                match resolve_prefix(graph, &path) {
                    Some((id, n)) if n == path.len() => {
                        if graph.entity(id).is_some_and(|e| e.kind.is_callable()) {
                            push_match(&mut refs, id);
                        }
                    }
                    _ => push_advisory(&mut refs, path.join(".")),
                }
            }
            Event::Chain(segments) => {
                let segs: Vec<&str> = segments.iter().map(String::as_str).collect();
                match resolve_chain(graph, &bindings, &segs) {
                    ChainTarget::Callable { node, .. } => push_match(&mut refs, node),
                    ChainTarget::Unresolved(s) => push_advisory(&mut refs, s),
                    ChainTarget::Container(_) | ChainTarget::Foreign => {}
                }
            }
        }
    }
    Ok(refs)
}

enum Event {
    Import(Vec<String>),
    Chain(Vec<String>),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::diff_versions;
    use crate::extract::{extract_inventory, SourceTree};
    use crate::graph::build_graph;

    fn graph(version: &str, files: &[(&str, &str)]) -> VersionGraph {
        let tree = SourceTree::new("/src/acme", version, files.iter().map(|(p, t)| (p.to_string(), t.to_string())).collect())
            .unwrap();
        build_graph(&extract_inventory(&tree).unwrap().inventory).unwrap()
    }

    fn v1() -> VersionGraph {
        graph("1.0.0", &[("acme/__init__.py", "def norm(x): pass\n"), ("acme/utils.py", "def load(path, mode='r'): pass\n")])
    }

    fn query(code: &str) -> MigrationQuery {
        MigrationQuery { old_code: code.into(), old_version: "1.0.0".into(), new_version: "2.0.0".into(), description: String::new() }
    }

    #[test]
    fn locate_references() {
        let g = v1();
        let r = locate_api_references(&query("from acme.utils import load\nload(p)\n"), &g).unwrap();
        assert_eq!(r.matched, vec![NodeId::from("1.0.0::acme.utils.load")]);
        assert!(r.advisory.is_empty());

        let r = locate_api_references(&query("import acme\nacme.utils.load(p)\n"), &g).unwrap();
        assert_eq!(r.matched, vec![NodeId::from("1.0.0::acme.utils.load")]);

        let r = locate_api_references(&query("acme.gone(p)\n"), &g).unwrap();
        assert!(r.matched.is_empty());
        assert_eq!(r.advisory, vec!["acme.gone"]);

        let r = locate_api_references(&query("import acme\nacme.norm(acme.utils.load(p))\nacme.norm(1)\n"), &g).unwrap();
        assert_eq!(r.matched, vec![NodeId::from("1.0.0::acme.norm"), NodeId::from("1.0.0::acme.utils.load")]);

        assert!(matches!(locate_api_references(&query("def (:\n"), &g), Err(RetrievalError::UnparseableSnippet(_))));
        let mut q = query("x");
        q.old_version = "0.9".into();
        assert!(matches!(locate_api_references(&q, &g), Err(RetrievalError::VersionMismatch { .. })));
    }

    fn chain3() -> VersionChain {
        // a1 relocates in 2.0, then gains a parameter in 3.0.
        let g1 = graph("1", &[("acme/__init__.py", ""), ("acme/utils.py", "def load(path, mode): pass\ndef old(q): pass\n")]);
        let g2 = graph("2", &[("acme/__init__.py", ""), ("acme/io.py", "def load(path, mode): pass\n")]);
        let g3 = graph("3", &[("acme/__init__.py", ""), ("acme/io.py", "def load(path, mode, encoding='utf-8'): pass\n")]);
        let e12 = diff_versions(&g1.to_inventory(), &g2.to_inventory()).unwrap();
        let e23 = diff_versions(&g2.to_inventory(), &g3.to_inventory()).unwrap();
        VersionChain::new(vec!["1".into(), "2".into(), "3".into()])
            .unwrap()
            .with_graph(g1)
            .unwrap()
            .with_graph(g3)
            .unwrap()
            .with_evolution(e12)
            .unwrap()
            .with_evolution(e23)
            .unwrap()
    }

    #[test]
    fn relocate_then_parameter_change() {
        let chain = chain3();
        let src = NodeId::from("1::acme.utils.load");
        let sub = build_aligned_subgraph(&chain, &[src.clone()]).unwrap();
        let api: Vec<&SubNode> = sub.nodes.iter().collect();
        assert_eq!(api, vec![
            &SubNode::Api("1::acme.utils.load".into()),
            &SubNode::Api("2::acme.io.load".into()),
            &SubNode::Api("3::acme.io.load".into()),
        ]);
        assert_eq!(sub.edges.len(), 2);
        let paths = retrieve_paths(&sub, &src, DEFAULT_PATH_LIMIT).unwrap();
        assert_eq!(paths.len(), 1);
        let top = &paths[0];
        assert_eq!(top.hop_count, 2);
        let rendered: Vec<String> = top.triplets.iter().map(EvolutionTriplet::render).collect();
        assert_eq!(rendered, vec![
            "acme.utils.load@1 -[relocate]-> acme.io.load@2",
            "acme.io.load@2 -[parameter_change]-> acme.io.load@3",
        ]);
        assert_eq!(top.terminal, "acme.io.load@3");
        top.validate().unwrap();
    }

    #[test]
    fn removal_ends_in_tombstone() {
        let chain = chain3();
        let src = NodeId::from("1::acme.utils.old");
        let sub = build_aligned_subgraph(&chain, &[src.clone()]).unwrap();
        assert_eq!(sub.nodes.len(), 2);
        assert!(sub.nodes.contains(&SubNode::Tombstone(src.clone())));
        let paths = retrieve_paths(&sub, &src, 5).unwrap();
        assert_eq!(paths.len(), 1);
        assert!(!paths[0].is_live());
        assert_eq!(paths[0].triplets[0].render(), "acme.utils.old@1 -[remove]-> (removed)");
    }

    #[test]
    fn retain_single_hop() {
        let g1 = graph("1", &[("acme.py", "def f(a): pass\n")]);
        let g2 = graph("2", &[("acme.py", "def f(a): pass\n")]);
        let evo = diff_versions(&g1.to_inventory(), &g2.to_inventory()).unwrap();
        let chain = VersionChain::new(vec!["1".into(), "2".into()]).unwrap().with_evolution(evo).unwrap();
        let src = NodeId::from("1::acme.f");
        let sub = build_aligned_subgraph(&chain, &[src.clone()]).unwrap();
        assert_eq!((sub.nodes.len(), sub.edges.len()), (2, 1));
        let paths = retrieve_paths(&sub, &src, 5).unwrap();
        assert_eq!(paths.len(), 1);
        assert_eq!((paths[0].hop_count, paths[0].cumulative_score), (1, 1.0));
        assert!(paths[0].is_pure_retain());
    }

    #[test]
    fn errors() {
        let chain = VersionChain::new(vec!["1".into(), "2".into()]).unwrap();
        assert!(matches!(build_aligned_subgraph(&chain, &[]), Err(RetrievalError::ChainGap { .. })));
        assert!(VersionChain::new(vec!["1".into()]).is_err());
        let sub = build_aligned_subgraph(&chain3(), &[NodeId::from("1::acme.utils.load")]).unwrap();
        assert!(matches!(retrieve_paths(&sub, &"1::acme.x".into(), 5), Err(RetrievalError::SourceNotInSubgraph(_))));
        assert!(matches!(retrieve_paths(&sub, &"1::acme.utils.load".into(), 0), Err(RetrievalError::InvalidLimit)));
    }

    #[test]
    fn ranking() {
        let p = |terminal: &str, hops: usize, score: f64| EvolutionPath {
            triplets: Vec::new(),
            hop_count: hops,
            cumulative_score: score,
            terminal: terminal.into(),
        };
        let mut v = vec![p(TOMBSTONE, 1, 1.0), p("b@3", 2, 0.9), p("a@3", 2, 0.9), p("c@3", 2, 1.0), p("d@3", 1, 0.1)];
        v.sort_by(rank_order);
        let order: Vec<&str> = v.iter().map(|p| p.terminal.as_str()).collect();
        assert_eq!(order, vec!["d@3", "c@3", "a@3", "b@3", TOMBSTONE]);
    }

    #[test]
    fn rendered_names_round_trip() {
        let id = NodeId::from("2.0.0::acme.io.load");
        assert_eq!(parse_rendered(&render_node(&id)), Some(id));
        assert_eq!(parse_rendered(TOMBSTONE), None);
    }
}
