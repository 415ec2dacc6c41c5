//! Settings from a TOML file, then command-line flags, then environment
//! variables, each layer overriding the one before.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use apievo::diff::DiffConfig;
use apievo::migrate::remote::RemoteSettings;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Deterministic,
    RemoteLlm,
}

impl BackendKind {
    fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "deterministic" => Ok(BackendKind::Deterministic),
            "remote-llm" => Ok(BackendKind::RemoteLlm),
            other => bail!("unknown backend '{other}' (expected deterministic or remote-llm)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub rename_threshold: f64,
    pub relocate_threshold: f64,
    pub rename_margin: f64,
    pub include_private: bool,
    pub path_limit: usize,
    pub backend: BackendKind,
    pub remote: RemoteSettings,
    /// Version graph files available to `plan` and `migrate`.
    pub graphs: Vec<PathBuf>,
    /// Evolution graph files available to `plan` and `migrate`.
    pub evolution: Vec<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        let d = DiffConfig::default();
        Self {
            rename_threshold: d.rename_threshold,
            relocate_threshold: d.relocate_threshold,
            rename_margin: d.rename_margin,
            include_private: d.include_private,
            path_limit: apievo::retrieval::DEFAULT_PATH_LIMIT,
            backend: BackendKind::Deterministic,
            remote: RemoteSettings::default(),
            graphs: Vec::new(),
            evolution: Vec::new(),
        }
    }
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub rename_threshold: Option<f64>,
    pub relocate_threshold: Option<f64>,
    pub include_private: bool,
    pub path_limit: Option<usize>,
    pub backend: Option<BackendKind>,
    pub llm_url: Option<String>,
    pub llm_model: Option<String>,
    pub graphs: Vec<PathBuf>,
    pub evolution: Vec<PathBuf>,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                Self::from_toml(&text).with_context(|| format!("parsing config {}", p.display()))
            }
            None => Ok(Self::default()),
        }
    }

    pub fn apply_flags(&mut self, o: &Overrides) {
        if let Some(v) = o.rename_threshold {
            self.rename_threshold = v;
        }
        if let Some(v) = o.relocate_threshold {
            self.relocate_threshold = v;
        }
        self.include_private |= o.include_private;
        if let Some(v) = o.path_limit {
            self.path_limit = v;
        }
        if let Some(v) = o.backend {
            self.backend = v;
        }
        if let Some(v) = &o.llm_url {
            self.remote.base_url = v.clone();
        }
        if let Some(v) = &o.llm_model {
            self.remote.model = v.clone();
        }
        self.graphs.extend(o.graphs.iter().cloned());
        self.evolution.extend(o.evolution.iter().cloned());
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<()> {
        let parse_f64 = |k: &str, v: String| v.trim().parse::<f64>().with_context(|| format!("{k}: not a number: {v}"));
        if let Some(v) = get("APIEVO_RENAME_THRESHOLD") {
            self.rename_threshold = parse_f64("APIEVO_RENAME_THRESHOLD", v)?;
        }
        if let Some(v) = get("APIEVO_RELOCATE_THRESHOLD") {
            self.relocate_threshold = parse_f64("APIEVO_RELOCATE_THRESHOLD", v)?;
        }
        if let Some(v) = get("APIEVO_INCLUDE_PRIVATE") {
            self.include_private = matches!(v.trim(), "1" | "true" | "yes");
        }
        if let Some(v) = get("APIEVO_PATH_LIMIT") {
            self.path_limit = v.trim().parse().with_context(|| format!("APIEVO_PATH_LIMIT: not a count: {v}"))?;
        }
        if let Some(v) = get("APIEVO_BACKEND") {
            self.backend = BackendKind::parse(&v)?;
        }
        if let Some(v) = get("APIEVO_LLM_URL") {
            self.remote.base_url = v;
        }
        if let Some(v) = get("APIEVO_LLM_MODEL") {
            self.remote.model = v;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.diff_config().validate()?;
        if self.path_limit == 0 {
            bail!("path_limit must be positive");
        }
        Ok(())
    }

    pub fn diff_config(&self) -> DiffConfig {
        DiffConfig {
            relocate_threshold: self.relocate_threshold,
            rename_threshold: self.rename_threshold,
            rename_margin: self.rename_margin,
            include_private: self.include_private,
        }
    }
}

/// File, then flags, then environment.
pub fn resolve(path: Option<&Path>, flags: &Overrides, env: impl Fn(&str) -> Option<String>) -> Result<Config> {
    let mut cfg = Config::load(path)?;
    cfg.apply_flags(flags);
    cfg.apply_env(env)?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn layering_order() {
        let mut cfg = Config::from_toml("rename_threshold = 0.8\nrelocate_threshold = 0.6\npath_limit = 3\n[remote]\nmodel = \"m1\"\n").unwrap();
        assert_eq!(cfg.remote.max_in_flight, 4);
        cfg.apply_flags(&Overrides { rename_threshold: Some(0.9), llm_model: Some("m2".into()), ..Overrides::default() });
        let env: HashMap<&str, &str> = [("APIEVO_RENAME_THRESHOLD", "0.95"), ("APIEVO_BACKEND", "remote-llm")].into();
        cfg.apply_env(|k| env.get(k).map(|v| v.to_string())).unwrap();
        assert_eq!(cfg.rename_threshold, 0.95);
        assert_eq!(cfg.relocate_threshold, 0.6);
        assert_eq!(cfg.path_limit, 3);
        assert_eq!(cfg.remote.model, "m2");
        assert_eq!(cfg.backend, BackendKind::RemoteLlm);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Config::from_toml("unknown_key = 1\n").is_err());
        let mut cfg = Config::default();
        cfg.rename_threshold = 1.5;
        assert!(cfg.validate().is_err());
        assert!(Config::default().apply_env(|k| (k == "APIEVO_BACKEND").then(|| "gpt".to_string())).is_err());
    }
}
