use std::collections::{BTreeMap, BTreeSet};

use apievo::diff::{diff_versions, diff_versions_with, signature_similarity, DiffConfig, EvolutionKind};
use apievo::eval::{cdc_check, evaluate_dataset, exact_match, normalize, CdcReport, EvalRecord, MigrationType};
use apievo::extract::{extract_inventory, ApiInventory, SourceTree};
use apievo::graph::{build_graph, VersionGraph};
use apievo::retrieval::{build_aligned_subgraph, VersionChain};
use proptest::prelude::*;

const NAMES: &[&str] = &["load", "save", "norm", "fit", "predict", "read", "write", "scale", "merge", "split", "plot", "mean"];
const PARAMS: &[&str] = &["x", "y", "path", "mode", "axis", "verbose", "tol", "seed"];
const WORDS: &[&str] = &["load", "data", "from", "a", "file", "compute", "the", "mean", "value", "write"];

#[derive(Debug, Clone)]
struct Func {
    module: usize,
    name: usize,
    params: Vec<usize>,
    doc: Vec<usize>,
}

fn func() -> impl Strategy<Value = Func> {
    (0..3usize, 0..NAMES.len(), prop::collection::btree_set(0..PARAMS.len(), 0..4), prop::collection::vec(0..WORDS.len(), 0..5))
        .prop_map(|(module, name, params, doc)| Func { module, name, params: params.into_iter().collect(), doc })
}

fn library() -> impl Strategy<Value = Vec<Func>> {
    prop::collection::vec(func(), 0..12)
}

fn sources(funcs: &[Func]) -> Vec<(String, String)> {
    let mut files: BTreeMap<String, String> = (0..3).map(|m| (format!("acme/m{m}.py"), String::new())).collect();
    files.insert("acme/__init__.py".into(), String::new());
    let mut seen = BTreeSet::new();
    for f in funcs {
        if !seen.insert((f.module, f.name)) {
            continue;
        }
        let params: Vec<&str> = f.params.iter().map(|&p| PARAMS[p]).collect();
        let mut body = format!("def {}({}):\n", NAMES[f.name], params.join(", "));
        if !f.doc.is_empty() {
            let words: Vec<&str> = f.doc.iter().map(|&w| WORDS[w]).collect();
            body.push_str(&format!("    \"\"\"{}\"\"\"\n", words.join(" ")));
        } else {
            body.push_str("    pass\n");
        }
        files.get_mut(&format!("acme/m{}.py", f.module)).unwrap().push_str(&body);
    }
    files.into_iter().collect()
}

fn inventory(version: &str, funcs: &[Func]) -> ApiInventory {
    extract_inventory(&SourceTree::new("/lib/acme", version, sources(funcs)).unwrap()).unwrap().inventory
}

fn qn(id: &Option<apievo::graph::NodeId>) -> Option<String> {
    id.as_ref().map(|n| n.local().to_string())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn diff_partitions_both_versions(old in library(), new in library()) {
        let (a, b) = (inventory("1", &old), inventory("2", &new));
        let evo = diff_versions(&a, &b).unwrap();
        evo.validate().unwrap();
        let mut old_seen: BTreeMap<String, usize> = BTreeMap::new();
        let mut new_seen: BTreeMap<String, usize> = BTreeMap::new();
        for e in &evo.edges {
            if let Some(q) = qn(&e.old) { *old_seen.entry(q).or_default() += 1; }
            if let Some(q) = qn(&e.new) { *new_seen.entry(q).or_default() += 1; }
        }
        let old_fns: BTreeSet<String> = a.callables().map(|e| e.qualified_name.clone()).collect();
        let new_fns: BTreeSet<String> = b.callables().map(|e| e.qualified_name.clone()).collect();
        prop_assert_eq!(old_seen.keys().cloned().collect::<BTreeSet<_>>(), old_fns);
        prop_assert_eq!(new_seen.keys().cloned().collect::<BTreeSet<_>>(), new_fns);
        prop_assert!(old_seen.values().chain(new_seen.values()).all(|&n| n == 1));
    }

    #[test]
    fn same_name_matches_are_symmetric(old in library(), new in library()) {
        let (a, b) = (inventory("1", &old), inventory("2", &new));
        let same = |evo: &apievo::diff::EvolutionGraph, swap: bool| -> BTreeSet<(String, String)> {
            evo.edges.iter()
                .filter_map(|e| Some((qn(&e.old)?, qn(&e.new)?)))
                .filter(|(o, n)| o == n)
                .map(|(o, n)| if swap { (n, o) } else { (o, n) })
                .collect()
        };
        prop_assert_eq!(same(&diff_versions(&a, &b).unwrap(), false), same(&diff_versions(&b, &a).unwrap(), true));
    }

    #[test]
    fn stricter_thresholds_never_add_matches(old in library(), new in library(), t in 0.0f64..1.0, dt in 0.0f64..0.5) {
        let (a, b) = (inventory("1", &old), inventory("2", &new));
        let count = |rename: f64, relocate: f64| {
            let cfg = DiffConfig { rename_threshold: rename.min(1.0), relocate_threshold: relocate.min(1.0), ..DiffConfig::default() };
            let evo = diff_versions_with(&a, &b, &cfg).unwrap();
            (evo.count(EvolutionKind::Rename), evo.count(EvolutionKind::Relocate))
        };
        let base = count(t, t);
        let strict_rename = count(t + dt, t);
        let strict_relocate = count(t, t + dt);
        prop_assert!(strict_rename.0 <= base.0);
        prop_assert_eq!(strict_rename.1, base.1);
        prop_assert!(strict_relocate.1 <= base.1);
    }

    #[test]
    fn similarity_is_a_symmetric_score(lib in library()) {
        let inv = inventory("1", &lib);
        let fns: Vec<_> = inv.callables().collect();
        for f in &fns {
            prop_assert!((signature_similarity(f, f).unwrap() - 1.0).abs() < 1e-12);
            for g in &fns {
                let s = signature_similarity(f, g).unwrap();
                prop_assert!((0.0..=1.0).contains(&s));
                prop_assert!((s - signature_similarity(g, f).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn graph_and_inventory_round_trip(lib in library()) {
        let inv = inventory("1.2", &lib);
        let back = ApiInventory::from_jsonl(&inv.to_jsonl(), "1.2").unwrap();
        prop_assert_eq!(&back, &inv);
        let g = build_graph(&inv).unwrap();
        let json = g.to_json();
        let g2 = VersionGraph::from_json(&json).unwrap();
        prop_assert_eq!(g2.to_json(), json);
        prop_assert_eq!(g2.to_inventory(), inv);
    }

    #[test]
    fn bfs_visits_in_level_order(v1 in library(), v2 in library(), v3 in library()) {
        let invs = [inventory("1", &v1), inventory("2", &v2), inventory("3", &v3)];
        let mut chain = VersionChain::new(vec!["1".into(), "2".into(), "3".into()]).unwrap();
        for w in invs.windows(2) {
            chain = chain.with_evolution(diff_versions(&w[0], &w[1]).unwrap()).unwrap();
        }
        let sources: Vec<_> = build_graph(&invs[0]).unwrap().callables().map(|(id, _)| id.clone()).collect();
        let sub = build_aligned_subgraph(&chain, &sources).unwrap();
        let mut prev = 0usize;
        for (i, v) in sub.visit_log.iter().enumerate() {
            if i > 0 && v.hop < prev {
                prop_assert_eq!(v.hop, 0);
            }
            prop_assert!(v.hop <= prev + 1);
            prev = v.hop;
        }
    }
}

fn snippet_text() -> impl Strategy<Value = String> {
    let piece = prop::sample::select(vec![
        "x", "acme", ".", "(", ")", "[", "]", ",", " ", "  ", "\n", "\n    ", "'s'", "\"t\"", "'''u'''", "# c", "=", "1",
        "1e-6", "if", ":", "\\", "$", "'", "\"", "def", "\t", ",)", "f(", "**", "\r\n",
    ]);
    prop::collection::vec(piece, 0..40).prop_map(|v| v.concat())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn normalization_is_idempotent(t in snippet_text()) {
        let n = normalize(&t);
        prop_assert_eq!(normalize(&n), n.clone());
        prop_assert!(exact_match(&t, &t));
        prop_assert!(exact_match(&t, &n));
    }

    #[test]
    fn cdc_pass_is_the_conjunction(c in prop::array::uniform5(any::<bool>())) {
        let r = CdcReport::from_criteria(c);
        prop_assert_eq!(r.pass, c.iter().all(|&x| x));
        prop_assert_eq!(r.pass, r.error_class.is_none());
    }
}

/// Formatting-only variants of a reference call.
fn reformat(quote: bool, space: bool, comma: bool, comment: bool) -> (String, String) {
    let reference = "import acme\nwith acme.session():\n    y = acme.fit(x, 'a', mode='fast', tol=0.1)\n".to_string();
    let mut c = reference.clone();
    if quote {
        c = c.replace("'a'", "\"a\"").replace("'fast'", "\"fast\"");
    }
    if space {
        c = c.replace("x, ", "x ,  ").replace("mode=", "mode = ");
    }
    if comma {
        c = c.replace("tol=0.1)", "tol=0.1,)");
    }
    if comment {
        c = c.replace("import acme\n", "import acme  # lib\n# note\n");
    }
    (c, reference)
}

proptest! {
    #[test]
    fn exact_match_implies_cdc(q in any::<bool>(), s in any::<bool>(), c in any::<bool>(), m in any::<bool>()) {
        let (cand, reference) = reformat(q, s, c, m);
        let rec = EvalRecord {
            old_code: "acme.train(x)\n".into(),
            old_version: "1.0.0".into(),
            new_version: "2.0.0".into(),
            description: String::new(),
            reference_code: reference.clone(),
            core_api_token: None,
            migration_type: MigrationType::MajorToMajor,
        };
        prop_assert!(cdc_check(&reference, &rec).unwrap().pass);
        prop_assert!(exact_match(&cand, &reference));
        prop_assert!(cdc_check(&cand, &rec).unwrap().pass);
    }

    #[test]
    fn metrics_are_monotone_in_k(picks in prop::collection::vec(prop::collection::vec(0..4usize, 5), 1..12)) {
        let reference = "acme.normalize(x, axis=1)\n";
        let pool = [reference, "acme.normalize(x, axis=2)\n", "acme.norm(x, axis=1)\n", "acme.normalize( x , axis = 1 , )\n"];
        let rec = EvalRecord {
            old_code: "acme.norm(x, axis=1)\n".into(),
            old_version: "1.0.0".into(),
            new_version: "1.1.0".into(),
            description: String::new(),
            reference_code: reference.into(),
            core_api_token: None,
            migration_type: MigrationType::MajorToMinor,
        };
        let records = vec![rec; picks.len()];
        let cands: Vec<Vec<String>> = picks.iter().map(|p| p.iter().map(|&i| pool[i].to_string()).collect()).collect();
        let mut last = (0.0, 0.0);
        for k in 1..=5 {
            let s = evaluate_dataset(&records, &cands, k).unwrap();
            prop_assert!(s.overall.cdc_at_k >= last.0 && s.overall.em_at_k >= last.1);
            prop_assert!(s.overall.em_at_k <= s.overall.cdc_at_k);
            prop_assert_eq!(s.overall.errors.values().sum::<usize>(), s.overall.failures());
            last = (s.overall.cdc_at_k, s.overall.em_at_k);
        }
    }
}
