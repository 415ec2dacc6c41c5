//! Per-version knowledge graph: containment forest of library, modules,
//! classes, callables and parameters, plus literal leaves for return
//! annotations and docstrings.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::{ApiEntity, ApiInventory, EntityKind, Parameter};

pub const GRAPH_SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid inventory: {0}")]
    InvalidInventory(String),
    #[error("{}", io_message(.path, .offset, .message))]
    IoFailure { path: Option<PathBuf>, offset: Option<usize>, message: String },
    #[error("unsupported schema version {found} (expected {expected})")]
    FormatVersionMismatch { found: u64, expected: u64 },
    #[error("malformed graph: {0}")]
    Malformed(String),
}

fn io_message(path: &Option<PathBuf>, offset: &Option<usize>, message: &str) -> String {
    let mut s = String::new();
    if let Some(p) = path {
        s.push_str(&format!("{}: ", p.display()));
    }
    if let Some(o) = offset {
        s.push_str(&format!("at byte {o}: "));
    }
    s.push_str(message);
    s
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn entity(version: &str, qualified_name: &str) -> Self {
        Self(format!("{version}::{qualified_name}"))
    }

    pub fn library(version: &str, name: &str) -> Self {
        Self(format!("{version}::{name}@library"))
    }

    pub fn parameter(version: &str, owner: &str, name: &str) -> Self {
        Self(format!("{version}::{owner}#{name}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Version label part of the id.
    pub fn version(&self) -> &str {
        self.0.split_once("::").map(|(v, _)| v).unwrap_or("")
    }

    /// Everything after `version::`.
    pub fn local(&self) -> &str {
        self.0.split_once("::").map(|(_, l)| l).unwrap_or(&self.0)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    HasModule,
    HasClass,
    HasFunction,
    HasMethod,
    HasParameter,
    Returns,
    HasDescription,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::HasModule => "has_module",
            Self::HasClass => "has_class",
            Self::HasFunction => "has_function",
            Self::HasMethod => "has_method",
            Self::HasParameter => "has_parameter",
            Self::Returns => "returns",
            Self::HasDescription => "has_description",
        }
    }

    pub fn is_containment(self) -> bool {
        !matches!(self, Self::Returns | Self::HasDescription)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiteralRole {
    ReturnAnnotation,
    Docstring,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NodeData {
    Entity(ApiEntity),
    Parameter { owner: String, position: usize, parameter: Parameter },
    Literal { role: LiteralRole, text: String },
}

impl NodeData {
    pub fn entity(&self) -> Option<&ApiEntity> {
        match self {
            Self::Entity(e) => Some(e),
            _ => None,
        }
    }

    pub fn kind_label(&self) -> &'static str {
        match self {
            Self::Entity(e) => e.kind.as_str(),
            Self::Parameter { .. } => "parameter",
            Self::Literal { .. } => "literal",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub source: NodeId,
    pub kind: EdgeKind,
    pub target: NodeId,
}

impl Edge {
    fn sort_key(&self) -> (&str, &str, &str) {
        (self.source.as_str(), self.kind.as_str(), self.target.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct VersionGraph {
    pub version_label: String,
    nodes: BTreeMap<NodeId, NodeData>,
    edges: Vec<Edge>,
    root: NodeId,
    parent: HashMap<NodeId, usize>,
    children: HashMap<NodeId, Vec<usize>>,
    by_qualified_name: HashMap<String, NodeId>,
}

impl PartialEq for VersionGraph {
    fn eq(&self, other: &Self) -> bool {
        self.version_label == other.version_label && self.nodes == other.nodes && self.edges == other.edges
    }
}

impl Eq for VersionGraph {}

pub fn build_graph(inventory: &ApiInventory) -> Result<VersionGraph, GraphError> {
    inventory.validate().map_err(GraphError::InvalidInventory)?;
    let v = inventory.version_label.as_str();
    let mut nodes = BTreeMap::new();
    let mut edges = Vec::new();
    let root = NodeId::library(v, &inventory.library.name);
    nodes.insert(root.clone(), NodeData::Entity(inventory.library.clone()));

    for (qn, entity) in &inventory.entities {
        let id = NodeId::entity(v, qn);
        let (parent, kind) = match entity.kind {
            EntityKind::Module => {
                let mut parent = root.clone();
                let mut prefix = qn.as_str();
                while let Some((head, _)) = prefix.rsplit_once('.') {
                    if inventory.get(head).is_some_and(|e| e.kind == EntityKind::Module) {
                        parent = NodeId::entity(v, head);
                        break;
                    }
                    prefix = head;
                }
                (parent, EdgeKind::HasModule)
            }
            kind => {
                let (head, _) = qn.rsplit_once('.').expect("validated entities live inside a module");
                let edge = match kind {
                    EntityKind::Class => EdgeKind::HasClass,
                    EntityKind::Function => EdgeKind::HasFunction,
                    _ => EdgeKind::HasMethod,
                };
                (NodeId::entity(v, head), edge)
            }
        };
        edges.push(Edge { source: parent, kind, target: id.clone() });

        for (position, p) in entity.parameters.iter().enumerate() {
            let pid = NodeId::parameter(v, qn, &p.name);
            let data = NodeData::Parameter { owner: qn.clone(), position, parameter: p.clone() };
            if nodes.insert(pid.clone(), data).is_some() {
                return Err(GraphError::InvalidInventory(format!("'{qn}' has duplicate parameter '{}'", p.name)));
            }
            edges.push(Edge { source: id.clone(), kind: EdgeKind::HasParameter, target: pid });
        }
        if let Some(ret) = &entity.return_annotation {
            let lid = NodeId(format!("{id}@returns"));
            nodes.insert(lid.clone(), NodeData::Literal { role: LiteralRole::ReturnAnnotation, text: ret.clone() });
            edges.push(Edge { source: id.clone(), kind: EdgeKind::Returns, target: lid });
        }
        if let Some(doc) = &entity.docstring {
            let lid = NodeId(format!("{id}@doc"));
            nodes.insert(lid.clone(), NodeData::Literal { role: LiteralRole::Docstring, text: doc.clone() });
            edges.push(Edge { source: id.clone(), kind: EdgeKind::HasDescription, target: lid });
        }
        nodes.insert(id, NodeData::Entity(entity.clone()));
    }
    VersionGraph::assemble(inventory.version_label.clone(), nodes, edges)
}

impl VersionGraph {
    fn assemble(version_label: String, nodes: BTreeMap<NodeId, NodeData>, mut edges: Vec<Edge>) -> Result<Self, GraphError> {
        edges.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        let roots: Vec<&NodeId> = nodes
            .iter()
            .filter(|(_, d)| matches!(d, NodeData::Entity(e) if e.kind == EntityKind::Library))
            .map(|(id, _)| id)
            .collect();
        let [root] = roots.as_slice() else {
            return Err(GraphError::Malformed(format!("expected one library node, found {}", roots.len())));
        };
        let root = (*root).clone();
        let mut parent = HashMap::new();
        let mut children: HashMap<NodeId, Vec<usize>> = HashMap::new();
        for (i, e) in edges.iter().enumerate() {
            for end in [&e.source, &e.target] {
                if !nodes.contains_key(end) {
                    return Err(GraphError::Malformed(format!("edge endpoint '{end}' is not a node")));
                }
            }
            if parent.insert(e.target.clone(), i).is_some() {
                return Err(GraphError::Malformed(format!("'{}' has more than one parent", e.target)));
            }
            children.entry(e.source.clone()).or_default().push(i);
        }
        let mut by_qualified_name = HashMap::new();
        for (id, data) in &nodes {
            if let NodeData::Entity(e) = data {
                if e.kind != EntityKind::Library {
                    by_qualified_name.insert(e.qualified_name.clone(), id.clone());
                }
            }
        }
        let graph = Self { version_label, nodes, edges, root, parent, children, by_qualified_name };
        graph.check_forest()?;
        Ok(graph)
    }

    fn check_forest(&self) -> Result<(), GraphError> {
        for (id, data) in &self.nodes {
            if *id == self.root {
                if self.parent.contains_key(id) {
                    return Err(GraphError::Malformed("library node has a parent".into()));
                }
                continue;
            }
            // Walk up; a cycle would revisit more nodes than exist.
            let mut cur = id;
            let mut steps = 0;
            while let Some(&p) = self.parent.get(cur) {
                cur = &self.edges[p].source;
                steps += 1;
                if steps > self.nodes.len() {
                    return Err(GraphError::Malformed(format!("containment cycle through '{id}'")));
                }
            }
            if *cur != self.root {
                return Err(GraphError::Malformed(format!("'{id}' is not reachable from the library node")));
            }
            let edge = &self.edges[self.parent[id]];
            let source = &self.nodes[&edge.source];
            let ok = match (edge.kind, source, data) {
                (EdgeKind::HasParameter, NodeData::Entity(s), NodeData::Parameter { .. }) => s.kind.is_callable(),
                (EdgeKind::Returns, NodeData::Entity(s), NodeData::Literal { role: LiteralRole::ReturnAnnotation, .. }) => {
                    s.kind.is_callable()
                }
                (EdgeKind::HasDescription, NodeData::Entity(_), NodeData::Literal { role: LiteralRole::Docstring, .. }) => true,
                (EdgeKind::HasModule, NodeData::Entity(s), NodeData::Entity(t)) => {
                    matches!(s.kind, EntityKind::Library | EntityKind::Module) && t.kind == EntityKind::Module
                }
                (EdgeKind::HasClass, NodeData::Entity(s), NodeData::Entity(t)) => {
                    matches!(s.kind, EntityKind::Module | EntityKind::Class) && t.kind == EntityKind::Class
                }
                (EdgeKind::HasFunction, NodeData::Entity(s), NodeData::Entity(t)) => {
                    s.kind == EntityKind::Module && t.kind == EntityKind::Function
                }
                (EdgeKind::HasMethod, NodeData::Entity(s), NodeData::Entity(t)) => {
                    s.kind == EntityKind::Class && t.kind == EntityKind::Method
                }
                _ => false,
            };
            if !ok {
                return Err(GraphError::Malformed(format!(
                    "edge {} -[{}]-> {} violates the ontology",
                    edge.source,
                    edge.kind.as_str(),
                    edge.target
                )));
            }
        }
        Ok(())
    }

    pub fn root(&self) -> &NodeId {
        &self.root
    }

    pub fn nodes(&self) -> &BTreeMap<NodeId, NodeData> {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, id: &NodeId) -> Option<&NodeData> {
        self.nodes.get(id)
    }

    pub fn entity(&self, id: &NodeId) -> Option<&ApiEntity> {
        self.nodes.get(id).and_then(NodeData::entity)
    }

    pub fn library(&self) -> &ApiEntity {
        self.entity(&self.root).expect("root is the library entity")
    }

    pub fn parent(&self, id: &NodeId) -> Option<&NodeId> {
        self.parent.get(id).map(|&i| &self.edges[i].source)
    }

    /// Outgoing edges of `id` in file order.
    pub fn out_edges(&self, id: &NodeId) -> impl Iterator<Item = &Edge> {
        self.children.get(id).into_iter().flatten().map(|&i| &self.edges[i])
    }

    /// Containment child of `id` with the given simple name.
    pub fn child(&self, id: &NodeId, simple_name: &str) -> Option<&NodeId> {
        self.out_edges(id)
            .filter(|e| e.kind.is_containment() && e.kind != EdgeKind::HasParameter)
            .map(|e| &e.target)
            .find(|t| self.entity(t).is_some_and(|c| c.name == simple_name))
    }

    pub fn lookup_node(&self, qualified_name: &str) -> Option<&NodeId> {
        self.by_qualified_name.get(qualified_name)
    }

    /// Entity nodes that are functions or methods.
    pub fn callables(&self) -> impl Iterator<Item = (&NodeId, &ApiEntity)> {
        self.nodes.iter().filter_map(|(id, d)| d.entity().filter(|e| e.kind.is_callable()).map(|e| (id, e)))
    }

    /// Rebuilds the inventory this graph was built from.
    pub fn to_inventory(&self) -> ApiInventory {
        let mut entities = BTreeMap::new();
        for data in self.nodes.values() {
            if let NodeData::Entity(e) = data {
                if e.kind != EntityKind::Library {
                    entities.insert(e.qualified_name.clone(), e.clone());
                }
            }
        }
        ApiInventory { version_label: self.version_label.clone(), library: self.library().clone(), entities }
    }

    pub fn to_json(&self) -> String {
        let file = GraphFileRef {
            schema_version: GRAPH_SCHEMA_VERSION,
            version_label: &self.version_label,
            nodes: self.nodes.iter().map(|(id, data)| NodeRecordRef { id, data }).collect(),
            edges: &self.edges,
        };
        let mut s = serde_json::to_string_pretty(&file).expect("graph serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| GraphError::IoFailure {
            path: None,
            offset: Some(byte_offset(text, e.line(), e.column())),
            message: e.to_string(),
        })?;
        let found = value.get("schema_version").and_then(serde_json::Value::as_u64);
        match found {
            Some(GRAPH_SCHEMA_VERSION) => {}
            Some(found) => return Err(GraphError::FormatVersionMismatch { found, expected: GRAPH_SCHEMA_VERSION }),
            None => return Err(GraphError::Malformed("missing integer schema_version".into())),
        }
        let file: GraphFile = serde_json::from_value(value).map_err(|e| GraphError::Malformed(e.to_string()))?;
        let mut nodes = BTreeMap::new();
        for rec in file.nodes {
            if nodes.insert(rec.id.clone(), rec.data).is_some() {
                return Err(GraphError::Malformed(format!("duplicate node '{}'", rec.id)));
            }
        }
        Self::assemble(file.version_label, nodes, file.edges)
    }
}

/// Converts serde_json's 1-based line/column into a byte offset.
pub(crate) fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(text.len());
        }
        offset += l.len();
    }
    text.len()
}

#[derive(Serialize)]
struct GraphFileRef<'a> {
    schema_version: u64,
    version_label: &'a str,
    nodes: Vec<NodeRecordRef<'a>>,
    edges: &'a [Edge],
}

#[derive(Serialize)]
struct NodeRecordRef<'a> {
    id: &'a NodeId,
    #[serde(flatten)]
    data: &'a NodeData,
}

#[derive(Deserialize)]
struct GraphFile {
    version_label: String,
    nodes: Vec<NodeRecord>,
    edges: Vec<Edge>,
}

#[derive(Deserialize)]
struct NodeRecord {
    id: NodeId,
    #[serde(flatten)]
    data: NodeData,
}

pub fn save_graph(graph: &VersionGraph, destination: &Path) -> Result<(), GraphError> {
    std::fs::write(destination, graph.to_json()).map_err(|e| GraphError::IoFailure {
        path: Some(destination.to_path_buf()),
        offset: None,
        message: e.to_string(),
    })
}

pub fn load_graph(source: &Path) -> Result<VersionGraph, GraphError> {
    let text = std::fs::read_to_string(source).map_err(|e| GraphError::IoFailure {
        path: Some(source.to_path_buf()),
        offset: None,
        message: e.to_string(),
    })?;
    VersionGraph::from_json(&text).map_err(|e| match e {
        GraphError::IoFailure { path: None, offset, message } => {
            GraphError::IoFailure { path: Some(source.to_path_buf()), offset, message }
        }
        other => other,
    })
}

pub fn lookup_node<'g>(graph: &'g VersionGraph, qualified_name: &str) -> Option<&'g NodeId> {
    graph.lookup_node(qualified_name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{extract_inventory, ParameterKind, SourceTree};

    fn inventory(version: &str, files: &[(&str, &str)]) -> ApiInventory {
        let tree = SourceTree::new("/src/acme", version, files.iter().map(|(p, t)| (p.to_string(), t.to_string())).collect())
            .unwrap();
        extract_inventory(&tree).unwrap().into_result().unwrap()
    }

    fn edge_set(g: &VersionGraph) -> Vec<(String, &'static str, String)> {
        g.edges().iter().map(|e| (e.source.0.clone(), e.kind.as_str(), e.target.0.clone())).collect()
    }

    #[test]
    fn load_fixture_graph() {
        let inv = inventory("1.0.0", &[("acme/__init__.py", ""), ("acme/utils.py", "def load(path, mode=\"r\"):\n    pass\n")]);
        let g = build_graph(&inv).unwrap();
        let ids: Vec<&str> = g.nodes().keys().map(NodeId::as_str).collect();
        assert_eq!(ids, vec![
            "1.0.0::acme",
            "1.0.0::acme.utils",
            "1.0.0::acme.utils.load",
            "1.0.0::acme.utils.load#mode",
            "1.0.0::acme.utils.load#path",
            "1.0.0::acme@library",
        ]);
        let mut expected = vec![
            ("1.0.0::acme@library".to_string(), "has_module", "1.0.0::acme".to_string()),
            ("1.0.0::acme".into(), "has_module", "1.0.0::acme.utils".into()),
            ("1.0.0::acme.utils".into(), "has_function", "1.0.0::acme.utils.load".into()),
            ("1.0.0::acme.utils.load".into(), "has_parameter", "1.0.0::acme.utils.load#path".into()),
            ("1.0.0::acme.utils.load".into(), "has_parameter", "1.0.0::acme.utils.load#mode".into()),
        ];
        expected.sort();
        let mut got = edge_set(&g);
        got.sort();
        assert_eq!(got, expected);
    }

    #[test]
    fn module_only_inventory() {
        let inv = inventory("0.1", &[("acme.py", "")]);
        let g = build_graph(&inv).unwrap();
        assert_eq!(g.nodes().len(), 2);
        assert_eq!(edge_set(&g), vec![("0.1::acme@library".into(), "has_module", "0.1::acme".into())]);
    }

    #[test]
    fn class_methods_and_literals() {
        let src = "\"\"\"Core.\"\"\"\nclass C:\n    \"\"\"A class.\"\"\"\n    def m(self) -> int:\n        \"\"\"Method.\"\"\"\n";
        let inv = inventory("1", &[("acme/core.py", src)]);
        let g = build_graph(&inv).unwrap();
        let got = edge_set(&g);
        for e in [
            ("1::acme@library", "has_module", "1::acme.core"),
            ("1::acme.core", "has_class", "1::acme.core.C"),
            ("1::acme.core.C", "has_method", "1::acme.core.C.m"),
            ("1::acme.core.C.m", "returns", "1::acme.core.C.m@returns"),
            ("1::acme.core.C.m", "has_description", "1::acme.core.C.m@doc"),
            ("1::acme.core.C", "has_description", "1::acme.core.C@doc"),
            ("1::acme.core", "has_description", "1::acme.core@doc"),
        ] {
            assert!(got.contains(&(e.0.into(), e.1, e.2.into())), "missing {e:?}");
        }
        assert_eq!(
            g.node(&"1::acme.core.C.m@returns".into()),
            Some(&NodeData::Literal { role: LiteralRole::ReturnAnnotation, text: "int".into() })
        );
        // entities + parameters + literal leaves
        assert_eq!(g.nodes().len(), 4 + 1 + 4);
    }

    #[test]
    fn lookup_and_child() {
        let inv = inventory("1.0.0", &[("acme/__init__.py", ""), ("acme/utils.py", "def load(path): pass\n")]);
        let g = build_graph(&inv).unwrap();
        assert_eq!(g.lookup_node("acme.utils.load").map(NodeId::as_str), Some("1.0.0::acme.utils.load"));
        assert_eq!(g.lookup_node("acme").map(NodeId::as_str), Some("1.0.0::acme"));
        assert!(g.lookup_node("acme.nonexistent").is_none());
        let utils = g.child(&"1.0.0::acme".into(), "utils").unwrap();
        assert_eq!(g.child(utils, "load").map(NodeId::as_str), Some("1.0.0::acme.utils.load"));
        assert!(g.child(utils, "path").is_none());
    }

    #[test]
    fn nested_module_parents_skip_missing_packages() {
        let inv = inventory("1", &[("acme/io/reader.py", "def read(): pass\n"), ("acme/__init__.py", "")]);
        let g = build_graph(&inv).unwrap();
        assert_eq!(g.parent(&"1::acme.io.reader".into()).map(NodeId::as_str), Some("1::acme"));
    }

    #[test]
    fn json_round_trip_and_errors() {
        let inv = inventory("1.0.0", &[("acme/__init__.py", "\"\"\"Acme.\"\"\"\n"), ("acme/m.py", "def f(a, *, b: int = 2) -> str: pass\n")]);
        let g = build_graph(&inv).unwrap();
        let text = g.to_json();
        let back = VersionGraph::from_json(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_inventory(), inv);
        let p = back.node(&"1.0.0::acme.m.f#b".into()).unwrap();
        assert!(matches!(p, NodeData::Parameter { position: 1, parameter, .. } if parameter.kind == ParameterKind::KeywordOnly));

        let bumped = text.replacen("\"schema_version\": 1", "\"schema_version\": 99", 1);
        assert!(matches!(VersionGraph::from_json(&bumped), Err(GraphError::FormatVersionMismatch { found: 99, .. })));

        let truncated = &text[..text.len() / 2];
        match VersionGraph::from_json(truncated) {
            Err(GraphError::IoFailure { offset: Some(o), .. }) => assert!(o <= truncated.len()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn file_round_trip() {
        let inv = inventory("2", &[("acme/x.py", "class A:\n    def m(self): pass\n")]);
        let g = build_graph(&inv).unwrap();
        let dir = std::env::temp_dir().join(format!("apievo-graph-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("g.json");
        save_graph(&g, &path).unwrap();
        assert_eq!(load_graph(&path).unwrap(), g);
        assert!(matches!(load_graph(&dir.join("missing.json")), Err(GraphError::IoFailure { path: Some(_), .. })));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn edges_are_sorted_lexicographically() {
        let inv = inventory("1", &[("acme/a.py", "def z(q, a): pass\ndef b(): pass\n"), ("acme/b.py", "")]);
        let g = build_graph(&inv).unwrap();
        let keys: Vec<_> = g.edges().iter().map(|e| e.sort_key()).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn byte_offsets() {
        assert_eq!(byte_offset("ab\ncd", 2, 2), 4);
        assert_eq!(byte_offset("ab", 1, 1), 0);
    }
}
