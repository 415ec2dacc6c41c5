//! Chat-completion backend: prompt rendering, bounded concurrency, retries
//! and parsing of plans and generated code.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{GenerationBackend, MigrateError, MigrationResult, Outcome, Plan, REMOTE_LLM};
use crate::retrieval::{rank_order, AlignedSubgraph, EvolutionPath, EvolutionTriplet, MigrationQuery, VersionChain, TOMBSTONE};

pub const API_KEY_ENV: &str = "APIEVO_LLM_KEY";

pub const PLANNING_INSTRUCTIONS: &str = "You plan code migrations between library versions. \
Using only the evolution triplets provided, list the trajectory each API in the code follows \
to the target version. Answer with one triplet per line in the form `subject -[relation]-> object`.";

pub const DEFAULT_INSTRUCTIONS: &str = "You migrate Python code to a newer library version. \
Follow every evolution path given: apply relocations to imports, renames to names and call sites, \
and parameter changes to call arguments. Change nothing else. \
Answer with the complete migrated code in a single fenced code block.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub top_p: f64,
}

/// Something that can carry a chat request and return the reply text.
pub trait ChatTransport: Send + Sync {
    fn send(&self, request: &ChatRequest) -> Result<String, String>;
}

/// Prompt parts sent to the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_instructions: String,
    pub subgraph_rendering: String,
    pub old_code: String,
    pub target_version: String,
    pub description: String,
}

impl PromptBundle {
    pub fn user_message(&self) -> String {
        let mut s = String::new();
        if !self.description.trim().is_empty() {
            s.push_str(&format!("Description: {}\n\n", self.description.trim()));
        }
        s.push_str(&format!("Target version: {}\n\n", self.target_version));
        s.push_str("Evolution knowledge:\n");
        s.push_str(&self.subgraph_rendering);
        if !self.subgraph_rendering.ends_with('\n') {
            s.push('\n');
        }
        s.push_str("\nCode:\n```python\n");
        s.push_str(&self.old_code);
        if !self.old_code.ends_with('\n') {
            s.push('\n');
        }
        s.push_str("```\n");
        s
    }

    pub fn messages(&self) -> Vec<ChatMessage> {
        vec![
            ChatMessage { role: "system".into(), content: self.system_instructions.clone() },
            ChatMessage { role: "user".into(), content: self.user_message() },
        ]
    }
}

/// Triplets of the given paths, one per line, without repeats.
pub fn render_paths(paths: &[EvolutionPath]) -> String {
    let mut lines: Vec<String> = Vec::new();
    for p in paths {
        for t in &p.triplets {
            let line = t.render();
            if !lines.contains(&line) {
                lines.push(line);
            }
        }
    }
    lines.iter().map(|l| format!("{l}\n")).collect()
}

/// Body of the first fenced code block, if any.
pub fn first_code_block(text: &str) -> Option<String> {
    let mut lines = text.lines();
    while let Some(line) = lines.next() {
        if line.trim_start().starts_with("```") {
            let mut body = Vec::new();
            for inner in lines.by_ref() {
                if inner.trim_start().starts_with("```") {
                    let mut code = body.join("\n");
                    code.push('\n');
                    return Some(code);
                }
                body.push(inner);
            }
            return None;
        }
    }
    None
}

/// Every `subject -[relation]-> object` found in free text.
pub fn parse_triplets(text: &str) -> Vec<EvolutionTriplet> {
    let mut out = Vec::new();
    for line in text.lines() {
        let mut rest = line;
        while let Some(open) = rest.find("-[") {
            let Some(close) = rest[open..].find("]->").map(|i| open + i) else { break };
            let subject = rest[..open].split_whitespace().last().unwrap_or("").trim_matches(['`', '*', ',']);
            let relation = &rest[open + 2..close];
            let after = rest[close + 3..].trim_start();
            let object = if after.starts_with(TOMBSTONE) {
                TOMBSTONE
            } else {
                after.split_whitespace().next().unwrap_or("").trim_matches(['`', '*', ',', '.', ';'])
            };
            if let Some(kind) = crate::diff::EvolutionKind::parse(relation) {
                if !subject.is_empty() && !object.is_empty() {
                    out.push(EvolutionTriplet { subject: subject.to_string(), relation: kind, object: object.to_string() });
                }
            }
            rest = &rest[close + 3..];
        }
    }
    out
}

/// Keeps triplets present in the subgraph and strings consecutive ones into
/// paths. Returns the paths and a warning per dropped triplet.
pub fn validate_plan(triplets: &[EvolutionTriplet], subgraph: &AlignedSubgraph) -> (Vec<EvolutionPath>, Vec<String>) {
    let mut warnings = Vec::new();
    let mut paths: Vec<Vec<EvolutionTriplet>> = Vec::new();
    for t in triplets {
        if !subgraph.contains_triplet(t) {
            warnings.push(format!("dropped triplet not in the aligned subgraph: {}", t.render()));
            continue;
        }
        match paths.last_mut() {
            Some(p) if p.last().is_some_and(|last| last.object == t.subject) => p.push(t.clone()),
            _ => {
                let is_root = t.subject_node().is_some_and(|s| subgraph.sources.contains(&s));
                if is_root {
                    paths.push(vec![t.clone()]);
                } else {
                    warnings.push(format!("dropped triplet that starts mid-path: {}", t.render()));
                }
            }
        }
    }
    let score = |ts: &[EvolutionTriplet]| -> f64 {
        ts.iter()
            .map(|t| subgraph.edges.iter().find(|e| e.triplet() == *t).map(|e| e.score).unwrap_or(0.0))
            .product()
    };
    let mut out: Vec<EvolutionPath> = Vec::new();
    for ts in paths {
        let path = EvolutionPath {
            hop_count: ts.len(),
            cumulative_score: score(&ts),
            terminal: ts.last().unwrap().object.clone(),
            triplets: ts,
        };
        if !out.contains(&path) {
            out.push(path);
        }
    }
    (out, warnings)
}

/// Counting semaphore for the in-flight cap.
struct Gate {
    permits: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Self { permits: Mutex::new(n.max(1)), freed: Condvar::new() }
    }

    fn acquire(&self) -> GatePermit<'_> {
        let mut p = self.permits.lock().unwrap_or_else(|e| e.into_inner());
        while *p == 0 {
            p = self.freed.wait(p).unwrap_or_else(|e| e.into_inner());
        }
        *p -= 1;
        GatePermit(self)
    }
}

struct GatePermit<'a>(&'a Gate);

impl Drop for GatePermit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.freed.notify_one();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteSettings {
    pub base_url: String,
    pub model: String,
    pub max_in_flight: usize,
    pub attempts: u32,
    pub initial_backoff_ms: u64,
    pub timeout_secs: u64,
}

impl Default for RemoteSettings {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            model: "default".into(),
            max_in_flight: 4,
            attempts: 3,
            initial_backoff_ms: 1000,
            timeout_secs: 120,
        }
    }
}

pub type Sleeper = Box<dyn Fn(Duration) + Send + Sync>;

pub struct RemoteBackend {
    settings: RemoteSettings,
    transport: Box<dyn ChatTransport>,
    gate: Gate,
    sleep: Sleeper,
    pub limit: usize,
}

impl RemoteBackend {
    pub fn new(settings: RemoteSettings, transport: Box<dyn ChatTransport>) -> Self {
        let gate = Gate::new(settings.max_in_flight);
        Self { settings, transport, gate, sleep: Box::new(std::thread::sleep), limit: crate::retrieval::DEFAULT_PATH_LIMIT }
    }

    /// Replaces the backoff sleep, mainly for tests.
    pub fn with_sleeper(mut self, sleep: Sleeper) -> Self {
        self.sleep = sleep;
        self
    }

    pub fn settings(&self) -> &RemoteSettings {
        &self.settings
    }

    /// Sends one request with greedy decoding, retrying with exponential
    /// backoff.
    pub fn complete(&self, bundle: &PromptBundle) -> Result<String, MigrateError> {
        let request = ChatRequest {
            model: self.settings.model.clone(),
            messages: bundle.messages(),
            temperature: 0.0,
            top_p: 1.0,
        };
        let _permit = self.gate.acquire();
        let attempts = self.settings.attempts.max(1);
        let mut delay = Duration::from_millis(self.settings.initial_backoff_ms);
        let mut last_error = String::new();
        for attempt in 1..=attempts {
            match self.transport.send(&request) {
                Ok(text) => return Ok(text),
                Err(e) => {
                    log::warn!("chat request attempt {attempt}/{attempts} failed: {e}");
                    last_error = e;
                    if attempt < attempts {
                        (self.sleep)(delay);
                        delay *= 2;
                    }
                }
            }
        }
        Err(MigrateError::BackendUnavailable(format!("{attempts} attempts failed; last error: {last_error}")))
    }
}

impl GenerationBackend for RemoteBackend {
    fn id(&self) -> &'static str {
        REMOTE_LLM
    }

    fn plan(&self, query: &MigrationQuery, subgraph: &AlignedSubgraph) -> Result<Plan, MigrateError> {
        let bundle = PromptBundle {
            system_instructions: PLANNING_INSTRUCTIONS.into(),
            subgraph_rendering: subgraph.render(),
            old_code: query.old_code.clone(),
            target_version: query.new_version.clone(),
            description: query.description.clone(),
        };
        let reply = self.complete(&bundle)?;
        let (mut paths, mut warnings) = validate_plan(&parse_triplets(&reply), subgraph);
        if paths.is_empty() {
            warnings.push("no valid triplet in the planner reply; using retrieved paths".into());
            let retrieved = crate::retrieval::retrieve_all(subgraph, self.limit)?;
            return Ok(Plan { paths: retrieved.into_iter().flat_map(|(_, p)| p).collect(), warnings, fell_back: true });
        }
        paths.sort_by(rank_order);
        Ok(Plan { paths, warnings, fell_back: false })
    }

    fn generate(
        &self,
        query: &MigrationQuery,
        paths: &[EvolutionPath],
        instructions: &str,
        _chain: &VersionChain,
    ) -> Result<MigrationResult, MigrateError> {
        let bundle = PromptBundle {
            system_instructions: instructions.to_string(),
            subgraph_rendering: render_paths(paths),
            old_code: query.old_code.clone(),
            target_version: query.new_version.clone(),
            description: query.description.clone(),
        };
        let reply = self.complete(&bundle)?;
        let new_code = first_code_block(&reply).ok_or(MigrateError::EmptyGeneration)?;
        let pure_retain = paths.iter().all(EvolutionPath::is_pure_retain);
        let outcome = if pure_retain && super::rewrite::same_modulo_whitespace(&query.old_code, &new_code) {
            Outcome::UnchangedRetain
        } else {
            Outcome::Migrated
        };
        Ok(MigrationResult { new_code, used_paths: paths.to_vec(), backend: REMOTE_LLM.into(), outcome, warnings: Vec::new() })
    }
}

/// Chat-completion endpoint over HTTP.
#[cfg(feature = "http")]
pub struct HttpTransport {
    url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
}

#[cfg(feature = "http")]
impl HttpTransport {
    /// The key is read from `APIEVO_LLM_KEY` when not given.
    pub fn new(settings: &RemoteSettings, api_key: Option<String>) -> Self {
        let base = settings.base_url.trim_end_matches('/');
        let url = if base.ends_with("/chat/completions") { base.to_string() } else { format!("{base}/chat/completions") };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(settings.timeout_secs.max(1))))
            .build()
            .into();
        let api_key = api_key.or_else(|| std::env::var(API_KEY_ENV).ok()).filter(|k| !k.is_empty());
        Self { url, api_key, agent }
    }
}

#[cfg(feature = "http")]
impl ChatTransport for HttpTransport {
    fn send(&self, request: &ChatRequest) -> Result<String, String> {
        let mut req = self.agent.post(&self.url).header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = req.send_json(request).map_err(|e| e.to_string())?;
        let body: serde_json::Value = response.body_mut().read_json().map_err(|e| e.to_string())?;
        reply_text(&body).ok_or_else(|| format!("response has no message content: {body}"))
    }
}

/// `choices[0].message.content` of a chat-completion reply.
pub fn reply_text(body: &serde_json::Value) -> Option<String> {
    body.get("choices")?.get(0)?.get("message")?.get("content")?.as_str().map(str::to_string)
}
