//! Cross-version evolution edges between two inventories.
//!
//! Matching runs in a fixed order: exact qualified name (retain), same
//! simple name in another module (relocate), same scope under another name
//! (rename). Whatever is left over becomes remove or add.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::{ApiEntity, ApiInventory, Parameter};
use crate::graph::{byte_offset, GraphError, NodeId};

pub const EVOLUTION_SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("old and new inventories share version label '{0}'")]
    SameVersion(String),
    #[error("invalid inventory: {0}")]
    InvalidInventory(String),
    #[error("'{0}' is not a function or method")]
    NotCallable(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvolutionKind {
    Add,
    Retain,
    Remove,
    Rename,
    Relocate,
    ParameterChange,
}

impl EvolutionKind {
    pub const ALL: [EvolutionKind; 6] =
        [Self::Add, Self::Retain, Self::Remove, Self::Rename, Self::Relocate, Self::ParameterChange];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Add => "add",
            Self::Retain => "retain",
            Self::Remove => "remove",
            Self::Rename => "rename",
            Self::Relocate => "relocate",
            Self::ParameterChange => "parameter_change",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim().to_ascii_lowercase().replace('-', "_");
        match s.as_str() {
            "deprecate" => Some(Self::Remove),
            _ => Self::ALL.into_iter().find(|k| k.as_str() == s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamChangeKind {
    ParamAdded,
    ParamRemoved,
    ParamRenamed,
    DefaultChanged,
    KindChanged,
    Reordered,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamChange {
    pub change: ParamChangeKind,
    pub old_param: Option<Parameter>,
    pub new_param: Option<Parameter>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionEdge {
    pub old: Option<NodeId>,
    pub new: Option<NodeId>,
    pub kind: EvolutionKind,
    pub score: f64,
    #[serde(default)]
    pub param_changes: Vec<ParamChange>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionGraph {
    pub old_version: String,
    pub new_version: String,
    pub edges: Vec<EvolutionEdge>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiffConfig {
    pub relocate_threshold: f64,
    pub rename_threshold: f64,
    pub rename_margin: f64,
    pub include_private: bool,
}

impl Default for DiffConfig {
    fn default() -> Self {
        Self { relocate_threshold: 0.7, rename_threshold: 0.75, rename_margin: 0.1, include_private: false }
    }
}

impl DiffConfig {
    pub fn validate(&self) -> Result<(), DiffError> {
        for (name, v) in [
            ("relocate_threshold", self.relocate_threshold),
            ("rename_threshold", self.rename_threshold),
            ("rename_margin", self.rename_margin),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(DiffError::InvalidConfig(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

fn word_tokens(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric() && c != '_')
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count();
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Weighted similarity of two callables' signatures and docstrings.
pub fn signature_similarity(f: &ApiEntity, g: &ApiEntity) -> Result<f64, DiffError> {
    for e in [f, g] {
        if !e.kind.is_callable() {
            return Err(DiffError::NotCallable(e.qualified_name.clone()));
        }
    }
    Ok(similarity(f, g))
}

fn similarity(f: &ApiEntity, g: &ApiEntity) -> f64 {
    let names = |e: &ApiEntity| e.parameters.iter().map(|p| p.name.clone()).collect::<BTreeSet<_>>();
    let params = jaccard(&names(f), &names(g));
    let count = if f.parameters.len() == g.parameters.len() { 1.0 } else { 0.0 };
    match (&f.docstring, &g.docstring) {
        (Some(a), Some(b)) => 0.6 * params + 0.2 * count + 0.2 * jaccard(&word_tokens(a), &word_tokens(b)),
        _ => 0.8 * params + 0.2 * count,
    }
}

pub fn detect_parameter_changes(f: &ApiEntity, g: &ApiEntity) -> Result<Vec<ParamChange>, DiffError> {
    for e in [f, g] {
        if !e.kind.is_callable() {
            return Err(DiffError::NotCallable(e.qualified_name.clone()));
        }
    }
    Ok(parameter_changes(&f.parameters, &g.parameters))
}

fn parameter_changes(old: &[Parameter], new: &[Parameter]) -> Vec<ParamChange> {
    let new_index: HashMap<&str, usize> = new.iter().enumerate().map(|(i, p)| (p.name.as_str(), i)).collect();
    let old_names: BTreeSet<&str> = old.iter().map(|p| p.name.as_str()).collect();
    // Rank of each name-matched parameter among matched ones, per side.
    let matched_old: Vec<&str> = old.iter().map(|p| p.name.as_str()).filter(|n| new_index.contains_key(n)).collect();
    let matched_new: Vec<&str> = new.iter().map(|p| p.name.as_str()).filter(|n| old_names.contains(n)).collect();
    let new_rank: HashMap<&str, usize> = matched_new.iter().enumerate().map(|(i, n)| (*n, i)).collect();

    let mut consumed = vec![false; new.len()];
    for n in &matched_new {
        consumed[new_index[n]] = true;
    }
    let mut changes = Vec::new();
    let pair = |change, o: &Parameter, n: &Parameter| ParamChange {
        change,
        old_param: Some(o.clone()),
        new_param: Some(n.clone()),
    };
    for (i, o) in old.iter().enumerate() {
        if let Some(&j) = new_index.get(o.name.as_str()) {
            let n = &new[j];
            if o.default_text != n.default_text {
                changes.push(pair(ParamChangeKind::DefaultChanged, o, n));
            }
            if o.kind != n.kind {
                changes.push(pair(ParamChangeKind::KindChanged, o, n));
            }
            let old_rank = matched_old.iter().position(|m| *m == o.name).unwrap();
            if old_rank != new_rank[o.name.as_str()] {
                changes.push(pair(ParamChangeKind::Reordered, o, n));
            }
            continue;
        }
        let counterpart = new
            .get(i)
            .filter(|n| !consumed[i] && n.kind == o.kind && n.default_text == o.default_text);
        match counterpart {
            Some(n) => {
                consumed[i] = true;
                changes.push(pair(ParamChangeKind::ParamRenamed, o, n));
            }
            None => changes.push(ParamChange { change: ParamChangeKind::ParamRemoved, old_param: Some(o.clone()), new_param: None }),
        }
    }
    for (j, n) in new.iter().enumerate() {
        if !consumed[j] {
            changes.push(ParamChange { change: ParamChangeKind::ParamAdded, old_param: None, new_param: Some(n.clone()) });
        }
    }
    changes
}

/// Scope a rename may happen in: module plus enclosing class path.
fn scope(e: &ApiEntity) -> (&str, &str) {
    (e.defined_in_module.as_str(), e.enclosing_path())
}

#[cfg(feature = "parallel")]
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(f).collect()
}

/// One old callable's preferred new counterpart.
struct Proposal<'a> {
    old: &'a ApiEntity,
    new: &'a ApiEntity,
    score: f64,
}

/// Keeps at most one proposal per new entity: higher score wins, then the
/// smaller old qualified name.
fn resolve<'a>(mut proposals: Vec<Proposal<'a>>) -> Vec<Proposal<'a>> {
    proposals.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.old.qualified_name.cmp(&b.old.qualified_name)));
    let mut taken = BTreeSet::new();
    proposals.retain(|p| taken.insert(p.new.qualified_name.as_str()));
    proposals
}

pub fn diff_versions(old: &ApiInventory, new: &ApiInventory) -> Result<EvolutionGraph, DiffError> {
    diff_versions_with(old, new, &DiffConfig::default())
}

pub fn diff_versions_with(old: &ApiInventory, new: &ApiInventory, config: &DiffConfig) -> Result<EvolutionGraph, DiffError> {
    config.validate()?;
    if old.version_label == new.version_label {
        return Err(DiffError::SameVersion(old.version_label.clone()));
    }
    old.validate().map_err(DiffError::InvalidInventory)?;
    new.validate().map_err(DiffError::InvalidInventory)?;

    let keep = |e: &&ApiEntity| config.include_private || !e.private;
    let old_fns: Vec<&ApiEntity> = old.callables().filter(keep).collect();
    let new_fns: Vec<&ApiEntity> = new.callables().filter(keep).collect();
    let (ov, nv) = (old.version_label.as_str(), new.version_label.as_str());
    let old_id = |e: &ApiEntity| NodeId::entity(ov, &e.qualified_name);
    let new_id = |e: &ApiEntity| NodeId::entity(nv, &e.qualified_name);

    let mut edges = Vec::new();
    let mut old_done: BTreeSet<&str> = BTreeSet::new();
    let mut new_done: BTreeSet<&str> = BTreeSet::new();

    let new_by_qn: BTreeMap<&str, &ApiEntity> = new_fns.iter().map(|e| (e.qualified_name.as_str(), *e)).collect();
    for f in &old_fns {
        if let Some(g) = new_by_qn.get(f.qualified_name.as_str()) {
            let param_changes = parameter_changes(&f.parameters, &g.parameters);
            let kind = if param_changes.is_empty() { EvolutionKind::Retain } else { EvolutionKind::ParameterChange };
            edges.push(EvolutionEdge { old: Some(old_id(f)), new: Some(new_id(g)), kind, score: 1.0, param_changes });
            old_done.insert(&f.qualified_name);
            new_done.insert(&g.qualified_name);
        }
    }

    // Relocate: same simple name, different module.
    let mut by_name: HashMap<&str, Vec<&ApiEntity>> = HashMap::new();
    for g in new_fns.iter().filter(|g| !new_done.contains(g.qualified_name.as_str())) {
        by_name.entry(g.name.as_str()).or_default().push(g);
    }
    let pending: Vec<&ApiEntity> = old_fns.iter().copied().filter(|f| !old_done.contains(f.qualified_name.as_str())).collect();
    let proposals: Vec<Option<Proposal>> = par_map(&pending, |f| {
        let mut best: Option<Proposal> = None;
        for g in by_name.get(f.name.as_str()).into_iter().flatten() {
            if g.defined_in_module == f.defined_in_module {
                continue;
            }
            let score = similarity(f, g);
            if score < config.relocate_threshold {
                continue;
            }
            let better = match &best {
                None => true,
                Some(b) => score > b.score || (score == b.score && g.qualified_name < b.new.qualified_name),
            };
            if better {
                best = Some(Proposal { old: f, new: g, score });
            }
        }
        best
    });
    for p in resolve(proposals.into_iter().flatten().collect()) {
        edges.push(EvolutionEdge {
            old: Some(old_id(p.old)),
            new: Some(new_id(p.new)),
            kind: EvolutionKind::Relocate,
            score: p.score,
            param_changes: parameter_changes(&p.old.parameters, &p.new.parameters),
        });
        old_done.insert(&p.old.qualified_name);
        new_done.insert(&p.new.qualified_name);
    }

    // Rename: same module and class, different name.
    let mut by_scope: HashMap<(&str, &str), Vec<&ApiEntity>> = HashMap::new();
    for g in new_fns.iter().filter(|g| !new_done.contains(g.qualified_name.as_str())) {
        by_scope.entry(scope(g)).or_default().push(g);
    }
    let pending: Vec<&ApiEntity> = old_fns.iter().copied().filter(|f| !old_done.contains(f.qualified_name.as_str())).collect();
    let proposals: Vec<Option<Proposal>> = par_map(&pending, |f| {
        let mut scored: Vec<(f64, &ApiEntity)> = by_scope
            .get(&scope(f))
            .into_iter()
            .flatten()
            .filter(|g| g.name != f.name)
            .map(|g| (similarity(f, g), *g))
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.qualified_name.cmp(&b.1.qualified_name)));
        let (score, g) = *scored.first()?;
        if score < config.rename_threshold {
            return None;
        }
        if let Some(&(runner_up, other)) = scored.get(1) {
            if runner_up == score {
                log::info!(
                    "rename tie for '{}' at {score:.3}: '{}' chosen over '{}'",
                    f.qualified_name,
                    g.qualified_name,
                    other.qualified_name
                );
            } else if score - runner_up < config.rename_margin - 1e-12 {
                log::debug!(
                    "rename of '{}' to '{}' rejected: margin {:.3} below {}",
                    f.qualified_name,
                    g.qualified_name,
                    score - runner_up,
                    config.rename_margin
                );
                return None;
            }
        }
        Some(Proposal { old: f, new: g, score })
    });
    for p in resolve(proposals.into_iter().flatten().collect()) {
        edges.push(EvolutionEdge {
            old: Some(old_id(p.old)),
            new: Some(new_id(p.new)),
            kind: EvolutionKind::Rename,
            score: p.score,
            param_changes: parameter_changes(&p.old.parameters, &p.new.parameters),
        });
        old_done.insert(&p.old.qualified_name);
        new_done.insert(&p.new.qualified_name);
    }

    for f in old_fns.iter().filter(|f| !old_done.contains(f.qualified_name.as_str())) {
        edges.push(EvolutionEdge { old: Some(old_id(f)), new: None, kind: EvolutionKind::Remove, score: 1.0, param_changes: Vec::new() });
    }
    for g in new_fns.iter().filter(|g| !new_done.contains(g.qualified_name.as_str())) {
        edges.push(EvolutionEdge { old: None, new: Some(new_id(g)), kind: EvolutionKind::Add, score: 1.0, param_changes: Vec::new() });
    }
    let mut graph = EvolutionGraph { old_version: ov.to_string(), new_version: nv.to_string(), edges };
    graph.sort();
    Ok(graph)
}

impl EvolutionGraph {
    fn sort(&mut self) {
        self.edges.sort_by(|a, b| (&a.old, &a.new).cmp(&(&b.old, &b.new)));
    }

    /// Edges leaving an old-version node.
    pub fn outgoing<'a>(&'a self, old: &'a NodeId) -> impl Iterator<Item = &'a EvolutionEdge> {
        self.edges.iter().filter(move |e| e.old.as_ref() == Some(old))
    }

    pub fn count(&self, kind: EvolutionKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }

    /// Checks endpoint shape per kind and score ranges.
    pub fn validate(&self) -> Result<(), String> {
        for e in &self.edges {
            let shape_ok = match e.kind {
                EvolutionKind::Add => e.old.is_none() && e.new.is_some(),
                EvolutionKind::Remove => e.old.is_some() && e.new.is_none(),
                _ => e.old.is_some() && e.new.is_some(),
            };
            if !shape_ok {
                return Err(format!("{} edge {:?} -> {:?} has the wrong endpoints", e.kind.as_str(), e.old, e.new));
            }
            if !(0.0..=1.0).contains(&e.score) {
                return Err(format!("edge score {} outside [0, 1]", e.score));
            }
            if e.old.as_ref().is_some_and(|o| o.version() != self.old_version)
                || e.new.as_ref().is_some_and(|n| n.version() != self.new_version)
            {
                return Err(format!("edge {:?} -> {:?} crosses the wrong versions", e.old, e.new));
            }
            for c in &e.param_changes {
                let ok = match c.change {
                    ParamChangeKind::ParamAdded => c.old_param.is_none() && c.new_param.is_some(),
                    ParamChangeKind::ParamRemoved => c.old_param.is_some() && c.new_param.is_none(),
                    _ => c.old_param.is_some() && c.new_param.is_some(),
                };
                if !ok {
                    return Err(format!("{:?} change has the wrong endpoints", c.change));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct File<'a> {
            schema_version: u64,
            old_version: &'a str,
            new_version: &'a str,
            edges: &'a [EvolutionEdge],
        }
        let file = File {
            schema_version: EVOLUTION_SCHEMA_VERSION,
            old_version: &self.old_version,
            new_version: &self.new_version,
            edges: &self.edges,
        };
        let mut s = serde_json::to_string_pretty(&file).expect("evolution graph serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        #[derive(Deserialize)]
        struct File {
            old_version: String,
            new_version: String,
            edges: Vec<EvolutionEdge>,
        }
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| GraphError::IoFailure {
            path: None,
            offset: Some(byte_offset(text, e.line(), e.column())),
            message: e.to_string(),
        })?;
        match value.get("schema_version").and_then(serde_json::Value::as_u64) {
            Some(EVOLUTION_SCHEMA_VERSION) => {}
            Some(found) => return Err(GraphError::FormatVersionMismatch { found, expected: EVOLUTION_SCHEMA_VERSION }),
            None => return Err(GraphError::Malformed("missing integer schema_version".into())),
        }
        let file: File = serde_json::from_value(value).map_err(|e| GraphError::Malformed(e.to_string()))?;
        let mut graph = Self { old_version: file.old_version, new_version: file.new_version, edges: file.edges };
        graph.validate().map_err(GraphError::Malformed)?;
        graph.sort();
        Ok(graph)
    }
}

pub fn save_evolution(graph: &EvolutionGraph, destination: &Path) -> Result<(), GraphError> {
    std::fs::write(destination, graph.to_json()).map_err(|e| GraphError::IoFailure {
        path: Some(destination.to_path_buf()),
        offset: None,
        message: e.to_string(),
    })
}

pub fn load_evolution(source: &Path) -> Result<EvolutionGraph, GraphError> {
    let text = std::fs::read_to_string(source).map_err(|e| GraphError::IoFailure {
        path: Some(source.to_path_buf()),
        offset: None,
        message: e.to_string(),
    })?;
    EvolutionGraph::from_json(&text).map_err(|e| match e {
        GraphError::IoFailure { path: None, offset, message } => {
            GraphError::IoFailure { path: Some(source.to_path_buf()), offset, message }
        }
        other => other,
    })
}
