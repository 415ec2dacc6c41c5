//! Browser bindings for the demo page. Libraries are typed into a text area
//! as one or more files, each introduced by a `# file: pkg/mod.py` line.

use apievo::diff::{diff_versions, EvolutionGraph};
use apievo::eval::{cdc_check, exact_match, EvalRecord, MigrationType};
use apievo::extract::{extract_inventory, ApiInventory, SourceTree};
use apievo::graph::build_graph;
use apievo::migrate::{migrate_query, DeterministicBackend};
use apievo::retrieval::{MigrationQuery, VersionChain};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const OLD: &str = "old";
const NEW: &str = "new";
const FILE_MARKER: &str = "# file:";

/// Splits the text-area format into (relative path, source) pairs.
pub fn split_files(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut files: Vec<(String, String)> = Vec::new();
    for line in text.split_inclusive('\n') {
        if let Some(path) = line.trim_start().strip_prefix(FILE_MARKER) {
            let path = path.trim();
            if !path.ends_with(".py") {
                return Err(format!("'{path}' is not a .py file"));
            }
            files.push((path.to_string(), String::new()));
        } else if let Some((_, body)) = files.last_mut() {
            body.push_str(line);
        } else if !line.trim().is_empty() {
            return Err(format!("text before the first '{FILE_MARKER} ...' line"));
        }
    }
    if files.is_empty() {
        return Err(format!("no files; start each one with '{FILE_MARKER} pkg/module.py'"));
    }
    Ok(files)
}

fn inventory(text: &str, version: &str) -> Result<ApiInventory, String> {
    let tree = SourceTree::new("/demo", version, split_files(text)?).map_err(|e| e.to_string())?;
    let extraction = extract_inventory(&tree).map_err(|e| e.to_string())?;
    extraction.into_result().map_err(|e| e.to_string())
}

fn evolution(old: &str, new: &str) -> Result<(ApiInventory, ApiInventory, EvolutionGraph), String> {
    let a = inventory(old, OLD)?;
    let b = inventory(new, NEW)?;
    let evo = diff_versions(&a, &b).map_err(|e| e.to_string())?;
    Ok((a, b, evo))
}

#[derive(Serialize)]
struct DiffRow {
    kind: &'static str,
    old: Option<String>,
    new: Option<String>,
    score: f64,
    changes: Vec<String>,
}

pub fn diff_json(old_library: &str, new_library: &str) -> Result<String, String> {
    let (_, _, evo) = evolution(old_library, new_library)?;
    let rows: Vec<DiffRow> = evo
        .edges
        .iter()
        .map(|e| DiffRow {
            kind: e.kind.as_str(),
            old: e.old.as_ref().map(|n| n.local().to_string()),
            new: e.new.as_ref().map(|n| n.local().to_string()),
            score: e.score,
            changes: e.param_changes.iter().map(|c| format!("{:?}", c.change)).collect(),
        })
        .collect();
    serde_json::to_string(&rows).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct MigrateView {
    code: String,
    outcome: String,
    paths: Vec<String>,
    warnings: Vec<String>,
    advisory: Vec<String>,
}

pub fn migrate_json(old_library: &str, new_library: &str, old_code: &str) -> Result<String, String> {
    let (a, b, evo) = evolution(old_library, new_library)?;
    let (ga, gb) = (build_graph(&a).map_err(|e| e.to_string())?, build_graph(&b).map_err(|e| e.to_string())?);
    let chain = VersionChain::new(vec![OLD.into(), NEW.into()])
        .and_then(|c| c.with_graph(ga))
        .and_then(|c| c.with_graph(gb))
        .and_then(|c| c.with_evolution(evo))
        .map_err(|e| e.to_string())?;
    let query = MigrationQuery { old_code: old_code.to_string(), old_version: OLD.into(), new_version: NEW.into(), description: String::new() };
    let report = migrate_query(&query, &chain, &DeterministicBackend::default(), "").map_err(|e| e.to_string())?;
    let outcome = serde_json::to_value(report.result.outcome).map_err(|e| e.to_string())?;
    let view = MigrateView {
        code: report.result.new_code,
        outcome: outcome.as_str().unwrap_or_default().to_string(),
        paths: report.plan.paths.iter().map(|p| p.triplets.iter().map(|t| t.render()).collect::<Vec<_>>().join("  ")).collect(),
        warnings: report.result.warnings,
        advisory: report.advisory,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct CheckView {
    criteria: [bool; 5],
    pass: bool,
    error_class: Option<&'static str>,
    exact_match: bool,
}

pub fn check_json(candidate: &str, reference: &str, core_token: &str) -> Result<String, String> {
    let token = core_token.trim();
    let record = EvalRecord {
        old_code: String::new(),
        old_version: OLD.into(),
        new_version: NEW.into(),
        description: String::new(),
        reference_code: reference.to_string(),
        core_api_token: (!token.is_empty()).then(|| token.to_string()),
        migration_type: MigrationType::MajorToMajor,
    };
    let report = cdc_check(candidate, &record).map_err(|e| e.to_string())?;
    let view = CheckView {
        criteria: report.criteria(),
        pass: report.pass,
        error_class: report.error_class.map(|c| c.as_str()),
        exact_match: exact_match(candidate, reference),
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

/// Evolution edges between two library versions, as a JSON array.
#[wasm_bindgen]
pub fn diff(old_library: &str, new_library: &str) -> Result<String, JsError> {
    diff_json(old_library, new_library).map_err(|e| JsError::new(&e))
}

/// Deterministic migration of a snippet from the old library to the new one.
#[wasm_bindgen]
pub fn migrate(old_library: &str, new_library: &str, old_code: &str) -> Result<String, JsError> {
    migrate_json(old_library, new_library, old_code).map_err(|e| JsError::new(&e))
}

/// CDC criteria and exact match of a candidate against a reference.
#[wasm_bindgen]
pub fn check(candidate: &str, reference: &str, core_token: &str) -> Result<String, JsError> {
    check_json(candidate, reference, core_token).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const V1: &str = "# file: acme/__init__.py\nfrom acme.utils import load\n\ndef norm(x, axis=0):\n    \"\"\"Scale to unit length.\"\"\"\n\n# file: acme/utils.py\ndef load(path, mode=\"r\"):\n    pass\n";
    const V2: &str = "# file: acme/__init__.py\nfrom acme.io import load\n\ndef normalize(x, axis=0):\n    \"\"\"Scale to unit length.\"\"\"\n\n# file: acme/io.py\ndef load(path, mode=\"r\"):\n    pass\n";

    #[test]
    fn splits_marked_files() {
        let f = split_files(V1).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f[1].0, "acme/utils.py");
        assert!(split_files("x = 1\n").is_err());
        assert!(split_files("# file: notes.txt\n").is_err());
    }

    #[test]
    fn diff_reports_rename_and_relocate() {
        let rows: serde_json::Value = serde_json::from_str(&diff_json(V1, V2).unwrap()).unwrap();
        let kinds: Vec<&str> = rows.as_array().unwrap().iter().map(|r| r["kind"].as_str().unwrap()).collect();
        assert!(kinds.contains(&"rename"), "{kinds:?}");
        assert!(kinds.contains(&"relocate"), "{kinds:?}");
    }

    #[test]
    fn migrate_rewrites_snippet() {
        let out = migrate_json(V1, V2, "import acme\nfrom acme.utils import load\nacme.norm(load('f'))\n").unwrap();
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let code = v["code"].as_str().unwrap();
        assert!(code.contains("from acme.io import load"), "{code}");
        assert!(code.contains("acme.normalize("), "{code}");
        assert_eq!(v["outcome"], "migrated");
    }

    #[test]
    fn check_classifies() {
        let v: serde_json::Value = serde_json::from_str(&check_json("f(x, 2)\n", "f(x)\n", "f").unwrap()).unwrap();
        assert_eq!(v["error_class"], "parameter_count");
        let v: serde_json::Value = serde_json::from_str(&check_json("f( x )\n", "f(x)\n", "").unwrap()).unwrap();
        assert_eq!(v["pass"], true);
        assert_eq!(v["exact_match"], true);
    }
}
