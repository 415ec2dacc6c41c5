use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn apievo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apievo"))
        .args(args)
        .env_remove("APIEVO_RENAME_THRESHOLD")
        .env_remove("APIEVO_BACKEND")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = apievo(args);
    assert!(out.status.success(), "apievo {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Extracts and builds graphs for the given releases into `dir`.
fn build_graphs(dir: &Path, versions: &[&str]) -> Vec<PathBuf> {
    versions
        .iter()
        .map(|v| {
            let inv = dir.join(format!("acme-{v}.jsonl"));
            let graph = dir.join(format!("{v}.json"));
            ok(&["extract", &s(&fixtures().join("acme").join(v)), "--version", v, "-o", &s(&inv)]);
            ok(&["graph", "build", &s(&inv), "-o", &s(&graph)]);
            graph
        })
        .collect()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = apievo(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(apievo(&["eval", "only-one-arg"]).status.code(), Some(2));
}

#[test]
fn domain_errors_exit_one_with_json_message() {
    let out = apievo(&["--json", "eval", "missing.jsonl", "missing-too.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["error"].as_str().unwrap().contains("missing.jsonl"));
}

#[test]
fn identical_sources_retain_everything() {
    let dir = tempfile::tempdir().unwrap();
    let src = s(&fixtures().join("acme/1.0.0"));
    for v in ["1.0.0", "1.0.1"] {
        let inv = s(&dir.path().join(format!("acme-{v}.jsonl")));
        ok(&["extract", &src, "--version", v, "-o", &inv]);
        ok(&["graph", "build", &inv, "-o", &s(&dir.path().join(format!("{v}.json")))]);
    }
    let out = dir.path().join("self.json");
    ok(&["diff", &s(&dir.path().join("1.0.0.json")), &s(&dir.path().join("1.0.1.json")), "-o", &s(&out)]);
    let evo: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    let edges = evo["edges"].as_array().unwrap();
    assert!(!edges.is_empty());
    assert!(edges.iter().all(|e| e["kind"] == "retain"));
}

#[test]
fn graph_build_needs_a_version_it_can_find() {
    let dir = tempfile::tempdir().unwrap();
    let inv = dir.path().join("inventory.jsonl");
    ok(&["extract", &s(&fixtures().join("acme/1.0.0")), "--version", "1.0.0", "-o", &s(&inv)]);
    let out = apievo(&["graph", "build", &s(&inv), "-o", &s(&dir.path().join("g.json"))]);
    assert_eq!(out.status.code(), Some(1));
    ok(&["graph", "build", &s(&inv), "--version", "1.0.0", "-o", &s(&dir.path().join("g.json"))]);
}

#[test]
fn migrate_renames_and_relocates() {
    let dir = tempfile::tempdir().unwrap();
    let graphs = build_graphs(dir.path(), &["1.0.0", "1.5.0"]);
    let query = s(&fixtures().join("queries/load_and_normalize.json"));
    // No evolution file: the consecutive diff is computed on the fly.
    let code = ok(&["--graph", &s(&graphs[0]), "--graph", &s(&graphs[1]), "migrate", &query]);
    assert!(code.contains("from acme.io import load"), "{code}");
    assert!(code.contains("acme.normalize(raw, axis=0)"), "{code}");
    assert!(!code.contains("acme.norm("), "{code}");
}

#[test]
fn chained_migration_and_plan_json() {
    let dir = tempfile::tempdir().unwrap();
    let graphs = build_graphs(dir.path(), &["1.0.0", "1.5.0", "2.0.0"]);
    let mut args: Vec<String> = graphs.iter().flat_map(|g| ["--graph".to_string(), s(g)]).collect();
    let query = s(&fixtures().join("queries/session_load.json"));
    args.extend(["migrate".into(), query.clone(), "--chain".into(), "1.0.0,1.5.0,2.0.0".into()]);
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let code = ok(&refs);
    assert!(code.contains("load(\"x.bin\", open_mode=\"rb\")"), "{code}");

    let mut plan: Vec<String> = graphs.iter().flat_map(|g| ["--graph".to_string(), s(g)]).collect();
    plan.extend(["--json".into(), "plan".into(), query, "--chain".into(), "1.0.0,1.5.0,2.0.0".into()]);
    let refs: Vec<&str> = plan.iter().map(String::as_str).collect();
    let v: serde_json::Value = serde_json::from_str(&ok(&refs)).unwrap();
    let load = v["sources"].as_array().unwrap().iter().find(|s| s["source"] == "acme.utils.load@1.0.0").unwrap();
    assert_eq!(load["paths"][0]["terminal"], "acme.io.load@2.0.0");
    assert_eq!(load["paths"][0]["hop_count"], 2);
}

#[test]
fn eval_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = fixtures().join("queries/load_and_normalize.expected.jsonl");
    let reference = "import acme\nfrom acme.io import load\n\nraw = load('scores.csv')\nscaled = acme.normalize(raw, axis=0)\n";
    let cands = dir.path().join("c.jsonl");
    std::fs::write(&cands, serde_json::json!({"index": 0, "candidates": [reference]}).to_string() + "\n").unwrap();
    let csv = dir.path().join("m.csv");
    let out = ok(&["--json", "eval", &s(&dataset), &s(&cands), "--csv", &s(&csv)]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["overall"]["cdc_at_k"], 100.0);
    assert_eq!(v["overall"]["em_at_k"], 100.0);
    let text = std::fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("major→major n,"));
}

#[test]
fn environment_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let graphs = build_graphs(dir.path(), &["1.0.0", "1.5.0"]);
    let out = Command::new(env!("CARGO_BIN_EXE_apievo"))
        .args(["--rename-threshold", "0.5", "diff", &s(&graphs[0]), &s(&graphs[1]), "-o", &s(&dir.path().join("e.json"))])
        .env("APIEVO_RENAME_THRESHOLD", "2.0")
        .output()
        .unwrap();
    // 2.0 is out of range, so the environment value won.
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rename"));
}

#[test]
fn same_label_diff_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let g = build_graphs(dir.path(), &["1.0.0"]).remove(0);
    let out = apievo(&["diff", &s(&g), &s(&g), "-o", &s(&dir.path().join("e.json"))]);
    assert_eq!(out.status.code(), Some(1));
}
