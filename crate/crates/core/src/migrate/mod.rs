//! Producing target-version code from old code and evolution paths, either
//! with the local rewriter or through a chat-completion model.

pub mod remote;
mod rewrite;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use rewrite::apply_path_rewrite;

use crate::retrieval::{
    build_aligned_subgraph, locate_api_references, retrieve_all, AlignedSubgraph, EvolutionPath, MigrationQuery,
    RetrievalError, VersionChain,
};
use crate::syntax::SyntaxError;

pub const DETERMINISTIC: &str = "deterministic";
pub const REMOTE_LLM: &str = "remote-llm";

#[derive(Debug, Error)]
pub enum MigrateError {
    #[error("conflicting rewrites: {0}")]
    RewriteConflict(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("snippet does not parse: {0}")]
    UnparseableSnippet(SyntaxError),
    #[error("no graph loaded for version '{0}'")]
    MissingGraph(String),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("response contains no fenced code block")]
    EmptyGeneration,
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Migrated,
    NoTargetApiRemoved,
    UnchangedRetain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationResult {
    pub new_code: String,
    pub used_paths: Vec<EvolutionPath>,
    pub backend: String,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Planned trajectories. `fell_back` is set when a model plan had to be
/// replaced by the retrieved paths.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub paths: Vec<EvolutionPath>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub fell_back: bool,
}

pub trait GenerationBackend: Send + Sync {
    fn id(&self) -> &'static str;

    fn plan(&self, query: &MigrationQuery, subgraph: &AlignedSubgraph) -> Result<Plan, MigrateError>;

    fn generate(
        &self,
        query: &MigrationQuery,
        paths: &[EvolutionPath],
        instructions: &str,
        chain: &VersionChain,
    ) -> Result<MigrationResult, MigrateError>;
}

/// Local rule-based backend. Planning is plain path retrieval.
#[derive(Debug, Clone)]
pub struct DeterministicBackend {
    pub limit: usize,
}

impl Default for DeterministicBackend {
    fn default() -> Self {
        Self { limit: crate::retrieval::DEFAULT_PATH_LIMIT }
    }
}

impl GenerationBackend for DeterministicBackend {
    fn id(&self) -> &'static str {
        DETERMINISTIC
    }

    fn plan(&self, _query: &MigrationQuery, subgraph: &AlignedSubgraph) -> Result<Plan, MigrateError> {
        let paths = retrieve_all(subgraph, self.limit)?.into_iter().flat_map(|(_, p)| p).collect();
        Ok(Plan { paths, warnings: Vec::new(), fell_back: false })
    }

    fn generate(
        &self,
        query: &MigrationQuery,
        paths: &[EvolutionPath],
        _instructions: &str,
        chain: &VersionChain,
    ) -> Result<MigrationResult, MigrateError> {
        apply_path_rewrite(&query.old_code, paths, chain)
    }
}

pub fn plan_paths(
    query: &MigrationQuery,
    subgraph: &AlignedSubgraph,
    backend: &dyn GenerationBackend,
) -> Result<Plan, MigrateError> {
    backend.plan(query, subgraph)
}

/// Runs the backend unless there is nothing for it to do: with no paths the
/// code is returned as is, and when every path ends in a removal the result
/// is `NoTargetApiRemoved`.
pub fn generate_migration(
    query: &MigrationQuery,
    paths: &[EvolutionPath],
    backend: &dyn GenerationBackend,
    instructions: &str,
    chain: &VersionChain,
) -> Result<MigrationResult, MigrateError> {
    let skip = |outcome| MigrationResult {
        new_code: query.old_code.clone(),
        used_paths: paths.to_vec(),
        backend: backend.id().to_string(),
        outcome,
        warnings: Vec::new(),
    };
    if paths.is_empty() {
        return Ok(skip(Outcome::UnchangedRetain));
    }
    if paths.iter().all(|p| !p.is_live()) {
        return Ok(skip(Outcome::NoTargetApiRemoved));
    }
    for p in paths {
        p.validate().map_err(MigrateError::InvalidPath)?;
    }
    backend.generate(query, paths, instructions, chain)
}

/// Everything the pipeline produced for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationReport {
    pub advisory: Vec<String>,
    pub plan: Plan,
    pub result: MigrationResult,
}

/// Locates references, builds the aligned subgraph, plans and generates.
/// The chain must run from the query's old version to its new version.
pub fn migrate_query(
    query: &MigrationQuery,
    chain: &VersionChain,
    backend: &dyn GenerationBackend,
    instructions: &str,
) -> Result<MigrationReport, MigrateError> {
    query.validate()?;
    if chain.first() != query.old_version || chain.last() != query.new_version {
        return Err(RetrievalError::InvalidChain(format!(
            "chain {} does not run from {} to {}",
            chain.labels().join(","),
            query.old_version,
            query.new_version
        ))
        .into());
    }
    let graph = chain.graph(chain.first()).ok_or_else(|| MigrateError::MissingGraph(chain.first().to_string()))?;
    let refs = locate_api_references(query, graph)?;
    let subgraph = build_aligned_subgraph(chain, &refs.matched)?;
    let plan = plan_paths(query, &subgraph, backend)?;
    let mut result = generate_migration(query, &plan.paths, backend, instructions, chain)?;
    result.warnings.extend(plan.warnings.iter().cloned());
    Ok(MigrationReport { advisory: refs.advisory, plan, result })
}

#[cfg(test)]
mod tests;
