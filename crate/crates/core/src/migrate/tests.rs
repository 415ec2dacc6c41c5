use super::remote::{ChatRequest, ChatTransport, RemoteBackend, RemoteSettings};
use super::*;
use crate::diff::diff_versions;
use crate::extract::{extract_inventory, SourceTree};
use crate::graph::{build_graph, VersionGraph};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

fn graph(version: &str, files: &[(&str, &str)]) -> VersionGraph {
    let files = files.iter().map(|(p, t)| (p.to_string(), t.to_string())).collect();
    build_graph(&extract_inventory(&SourceTree::new("/src/acme", version, files).unwrap()).unwrap().inventory).unwrap()
}

fn chain(versions: Vec<(&str, Vec<(&str, &str)>)>) -> VersionChain {
    let graphs: Vec<VersionGraph> = versions.iter().map(|(v, files)| graph(v, files)).collect();
    let mut c = VersionChain::new(versions.iter().map(|(v, _)| v.to_string()).collect()).unwrap();
    for w in graphs.windows(2) {
        c = c.with_evolution(diff_versions(&w[0].to_inventory(), &w[1].to_inventory()).unwrap()).unwrap();
    }
    for g in graphs {
        c = c.with_graph(g).unwrap();
    }
    c
}

fn two(old: Vec<(&'static str, &'static str)>, new: Vec<(&'static str, &'static str)>) -> VersionChain {
    chain(vec![("1.0.0", old), ("2.0.0", new)])
}

fn query(code: &str, new_version: &str) -> MigrationQuery {
    MigrationQuery { old_code: code.into(), old_version: "1.0.0".into(), new_version: new_version.into(), description: String::new() }
}

fn run(code: &str, c: &VersionChain) -> MigrationResult {
    migrate_query(&query(code, c.last()), c, &DeterministicBackend::default(), "").unwrap().result
}

const INIT: (&str, &str) = ("acme/__init__.py", "");

#[test]
fn relocate_rewrites_import() {
    let c = two(
        vec![INIT, ("acme/utils.py", "def load(path, mode='r'):\n    \"\"\"Load a file.\"\"\"\n"), ("acme/io.py", "")],
        vec![INIT, ("acme/utils.py", ""), ("acme/io.py", "def load(path, mode='r'):\n    \"\"\"Load a file.\"\"\"\n")],
    );
    let r = run("from acme.utils import load\ndata = load('a.txt')\n", &c);
    assert_eq!(r.new_code, "from acme.io import load\ndata = load('a.txt')\n");
    assert_eq!(r.outcome, Outcome::Migrated);
    assert_eq!(r.backend, DETERMINISTIC);

    let r = run("import acme.utils\ndata = acme.utils.load('a.txt')\n", &c);
    assert_eq!(r.new_code, "import acme.io\ndata = acme.io.load('a.txt')\n");
}

#[test]
fn rename_rewrites_call_sites() {
    let c = two(
        vec![("acme/__init__.py", "def norm(x, axis=0):\n    \"\"\"Normalize values.\"\"\"\n")],
        vec![("acme/__init__.py", "def normalize(x, axis=0):\n    \"\"\"Normalize values.\"\"\"\n")],
    );
    assert_eq!(run("import acme\ny = acme.norm(x)\n", &c).new_code, "import acme\ny = acme.normalize(x)\n");
    assert_eq!(
        run("from acme import norm\ny = norm(x)\nz = norm(y, axis=1)\n", &c).new_code,
        "from acme import normalize\ny = normalize(x)\nz = normalize(y, axis=1)\n"
    );
    assert_eq!(
        run("from acme import norm as n\ny = n(x)\n", &c).new_code,
        "from acme import normalize as n\ny = n(x)\n"
    );
}

#[test]
fn parameter_changes_touch_keywords_only() {
    let c = two(
        vec![("acme/__init__.py", "def fit(data, verbose=False, tol=1e-3, seed=0): pass\n")],
        vec![("acme/__init__.py", "def fit(data, debug=False, tol=1e-4, *, epochs): pass\n")],
    );
    let r = run("import acme\nm = acme.fit(d, verbose=True, seed=3)  # go\n", &c);
    assert_eq!(r.new_code, "import acme\nm = acme.fit(d, debug=True, epochs=...)  # go  # TODO: supply epochs\n");
    assert_eq!(r.outcome, Outcome::Migrated);
}

#[test]
fn retain_is_identity() {
    let files = vec![("acme/__init__.py", "def mean(x): pass\n")];
    let c = two(files.clone(), files);
    let src = "import acme\nprint(acme.mean([1, 2]))\n";
    let r = run(src, &c);
    assert_eq!(r.new_code, src);
    assert_eq!(r.outcome, Outcome::UnchangedRetain);
    assert!(r.used_paths.iter().all(EvolutionPath::is_pure_retain));
}

#[test]
fn removed_api_leaves_code_alone() {
    let c = two(vec![("acme/__init__.py", "def old(x): pass\n")], vec![("acme/__init__.py", "def other(a, b, c): pass\n")]);
    let src = "import acme\nacme.old(1)\n";
    let report = migrate_query(&query(src, "2.0.0"), &c, &DeterministicBackend::default(), "").unwrap();
    assert_eq!(report.result.new_code, src);
    assert_eq!(report.result.outcome, Outcome::NoTargetApiRemoved);
}

#[test]
fn code_without_library_calls_is_untouched() {
    let files = vec![("acme/__init__.py", "def mean(x): pass\n")];
    let c = two(files.clone(), files);
    let r = run("print(1)\n", &c);
    assert_eq!((r.new_code.as_str(), r.outcome), ("print(1)\n", Outcome::UnchangedRetain));
}

#[test]
fn chain_must_match_query() {
    let files = vec![("acme/__init__.py", "def mean(x): pass\n")];
    let c = two(files.clone(), files);
    let q = query("acme.mean(1)\n", "3.0.0");
    assert!(matches!(
        migrate_query(&q, &c, &DeterministicBackend::default(), ""),
        Err(MigrateError::Retrieval(RetrievalError::InvalidChain(_)))
    ));
}

struct Canned {
    replies: Vec<String>,
    calls: Arc<AtomicUsize>,
}

impl ChatTransport for Canned {
    fn send(&self, _: &ChatRequest) -> Result<String, String> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(self.replies[n.min(self.replies.len() - 1)].clone())
    }
}

fn remote(replies: &[&str]) -> (RemoteBackend, Arc<AtomicUsize>) {
    let calls = Arc::new(AtomicUsize::new(0));
    let t = Canned { replies: replies.iter().map(|s| s.to_string()).collect(), calls: calls.clone() };
    (RemoteBackend::new(RemoteSettings::default(), Box::new(t)).with_sleeper(Box::new(|_| {})), calls)
}

fn relocate_chain() -> VersionChain {
    two(
        vec![INIT, ("acme/utils.py", "def load(path):\n    \"\"\"Load.\"\"\"\n"), ("acme/io.py", "")],
        vec![INIT, ("acme/utils.py", ""), ("acme/io.py", "def load(path):\n    \"\"\"Load.\"\"\"\n")],
    )
}

fn subgraph_for(c: &VersionChain, code: &str) -> AlignedSubgraph {
    let refs = crate::retrieval::locate_in_source(code, c.graph(c.first()).unwrap()).unwrap();
    build_aligned_subgraph(c, &refs.matched).unwrap()
}

#[test]
fn deterministic_plan_is_retrieval() {
    let c = relocate_chain();
    let code = "from acme.utils import load\n";
    let sub = subgraph_for(&c, code);
    let plan = plan_paths(&query(code, "2.0.0"), &sub, &DeterministicBackend::default()).unwrap();
    let expected: Vec<EvolutionPath> = retrieve_all(&sub, 5).unwrap().into_iter().flat_map(|(_, p)| p).collect();
    assert_eq!(plan.paths, expected);
    assert!(!plan.fell_back);
}

#[test]
fn remote_plan_drops_hallucinations() {
    let c = relocate_chain();
    let code = "from acme.utils import load\n";
    let sub = subgraph_for(&c, code);
    let reply = "acme.utils.load@1.0.0 -[relocate]-> acme.io.load@2.0.0\nacme.utils.load@1.0.0 -[rename]-> acme.io.read@2.0.0\n";
    let (b, _) = remote(&[reply]);
    let plan = plan_paths(&query(code, "2.0.0"), &sub, &b).unwrap();
    assert_eq!(plan.paths.len(), 1);
    assert_eq!(plan.paths[0].triplets[0].render(), "acme.utils.load@1.0.0 -[relocate]-> acme.io.load@2.0.0");
    assert_eq!(plan.warnings.len(), 1);
    for t in plan.paths.iter().flat_map(|p| &p.triplets) {
        assert!(sub.contains_triplet(t));
    }

    let (b, _) = remote(&["I am not sure."]);
    let plan = plan_paths(&query(code, "2.0.0"), &sub, &b).unwrap();
    assert!(plan.fell_back);
    assert_eq!(plan.paths, DeterministicBackend::default().plan(&query(code, "2.0.0"), &sub).unwrap().paths);
}

#[test]
fn remote_generation_takes_first_block() {
    let c = relocate_chain();
    let code = "from acme.utils import load\nload('x')\n";
    let reply_plan = "acme.utils.load@1.0.0 -[relocate]-> acme.io.load@2.0.0";
    let reply_code = "Sure.\n```python\nfrom acme.io import load\nload('x')\n```\n```python\nwrong\n```";
    let (b, calls) = remote(&[reply_plan, reply_code]);
    let report = migrate_query(&query(code, "2.0.0"), &c, &b, remote::DEFAULT_INSTRUCTIONS).unwrap();
    assert_eq!(report.result.new_code, "from acme.io import load\nload('x')\n");
    assert_eq!(report.result.backend, REMOTE_LLM);
    assert_eq!(calls.load(Ordering::SeqCst), 2);

    let (b, _) = remote(&[reply_plan, "no code here"]);
    assert!(matches!(
        migrate_query(&query(code, "2.0.0"), &c, &b, ""),
        Err(MigrateError::EmptyGeneration)
    ));
}

#[test]
fn tombstones_skip_the_backend() {
    let c = two(vec![("acme/__init__.py", "def old(x): pass\n")], vec![("acme/__init__.py", "")]);
    let code = "import acme\nacme.old(1)\n";
    let sub = subgraph_for(&c, code);
    let paths = DeterministicBackend::default().plan(&query(code, "2.0.0"), &sub).unwrap().paths;
    let (b, calls) = remote(&["```\nx\n```"]);
    let r = generate_migration(&query(code, "2.0.0"), &paths, &b, "", &c).unwrap();
    assert_eq!(r.outcome, Outcome::NoTargetApiRemoved);
    assert_eq!(r.new_code, code);
    assert_eq!(calls.load(Ordering::SeqCst), 0);
}
