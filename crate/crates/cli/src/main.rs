mod config;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use apievo::diff::{diff_versions_with, load_evolution, save_evolution, EvolutionGraph, EvolutionKind};
use apievo::eval::{evaluate_dataset, load_candidates, load_records};
use apievo::extract::{extract_inventory, ApiInventory, SourceTree};
use apievo::graph::{build_graph, load_graph, save_graph, VersionGraph};
use apievo::migrate::remote::{HttpTransport, RemoteBackend, DEFAULT_INSTRUCTIONS};
use apievo::migrate::{migrate_query, plan_paths, DeterministicBackend, GenerationBackend, Outcome};
use apievo::retrieval::{build_aligned_subgraph, locate_api_references, render_node, EvolutionPath, MigrationQuery, VersionChain};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{BackendKind, Config, Overrides};

#[derive(Parser, Debug)]
#[command(name = "apievo", version, about = "Track library API evolution and migrate code across versions")]
struct Cli {
    /// TOML settings file; flags override it and APIEVO_* variables override flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true, default_value = "warn", value_parser = ["off", "error", "warn", "info", "debug", "trace"])]
    log_level: String,

    /// Print machine-readable JSON on standard output.
    #[arg(long, global = true)]
    json: bool,

    #[command(flatten)]
    settings: SettingFlags,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct SettingFlags {
    #[arg(long, global = true)]
    rename_threshold: Option<f64>,
    #[arg(long, global = true)]
    relocate_threshold: Option<f64>,
    /// Diff private callables too.
    #[arg(long, global = true)]
    include_private: bool,
    /// Maximum paths kept per source API.
    #[arg(long, global = true)]
    limit: Option<usize>,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendKind>,
    #[arg(long, global = true)]
    llm_url: Option<String>,
    #[arg(long, global = true)]
    llm_model: Option<String>,
    /// Version graph file (repeatable).
    #[arg(long = "graph", global = true)]
    graphs: Vec<PathBuf>,
    /// Evolution graph file (repeatable).
    #[arg(long = "evolution", global = true)]
    evolution: Vec<PathBuf>,
}

impl SettingFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            rename_threshold: self.rename_threshold,
            relocate_threshold: self.relocate_threshold,
            include_private: self.include_private,
            path_limit: self.limit,
            backend: self.backend,
            llm_url: self.llm_url.clone(),
            llm_model: self.llm_model.clone(),
            graphs: self.graphs.clone(),
            evolution: self.evolution.clone(),
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract the API inventory of one library version.
    Extract {
        /// Directory holding the library's top-level package(s).
        src: PathBuf,
        #[arg(long = "version")]
        version_label: String,
        #[arg(short, long)]
        output: PathBuf,
        /// Fail when any file has a syntax error.
        #[arg(long)]
        strict: bool,
    },
    /// Version graph operations.
    Graph {
        #[command(subcommand)]
        action: GraphAction,
    },
    /// Diff two version graphs into an evolution graph.
    Diff {
        old: PathBuf,
        new: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Show the evolution paths for the APIs a query uses.
    Plan {
        query: PathBuf,
        /// Comma-separated version labels from the query's old to new version.
        #[arg(long, value_delimiter = ',')]
        chain: Vec<String>,
    },
    /// Rewrite a query's code for the target version.
    Migrate {
        query: PathBuf,
        #[arg(long, value_delimiter = ',')]
        chain: Vec<String>,
        /// System instructions for the model backend.
        #[arg(long)]
        instructions: Option<PathBuf>,
        /// Write the migrated code here instead of standard output.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Score candidates against a dataset with CDC@k and EM@k.
    Eval {
        dataset: PathBuf,
        candidates: PathBuf,
        #[arg(short, default_value_t = 1)]
        k: usize,
        /// Also write a per-migration-type CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Write the JSON summary here.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum GraphAction {
    /// Build a version graph from an inventory file.
    Build {
        inventory: PathBuf,
        /// Version label; inferred from a file name like `acme-1.2.0.jsonl` when omitted.
        #[arg(long = "version")]
        version_label: Option<String>,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let level = cli.log_level.parse().unwrap_or(log::LevelFilter::Warn);
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if cli.json {
                println!("{}", json!({ "error": format!("{e:#}") }));
            }
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = config::resolve(cli.config.as_deref(), &cli.settings.overrides(), |k| std::env::var(k).ok())?;
    match &cli.command {
        Command::Extract { src, version_label, output, strict } => extract(cli, src, version_label, output, *strict),
        Command::Graph { action: GraphAction::Build { inventory, version_label, output } } => {
            graph_build(cli, inventory, version_label.as_deref(), output)
        }
        Command::Diff { old, new, output } => diff(cli, &cfg, old, new, output),
        Command::Plan { query, chain } => plan(cli, &cfg, query, chain),
        Command::Migrate { query, chain, instructions, output } => {
            migrate(cli, &cfg, query, chain, instructions.as_deref(), output.as_deref())
        }
        Command::Eval { dataset, candidates, k, csv, output } => eval(cli, dataset, candidates, *k, csv.as_deref(), output.as_deref()),
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn extract(cli: &Cli, src: &Path, version: &str, output: &Path, strict: bool) -> Result<()> {
    let tree = SourceTree::from_dir(src, version)?;
    let extraction = extract_inventory(&tree)?;
    for issue in &extraction.issues {
        log::warn!("{issue}");
    }
    let syntax = extraction.syntax_errors();
    if strict && !syntax.is_empty() {
        return Err(apievo::extract::ExtractError::Syntax(syntax).into());
    }
    let inv = &extraction.inventory;
    write_file(output, &inv.to_jsonl())?;
    if cli.json {
        print_json(&json!({
            "output": output,
            "version": inv.version_label,
            "library": inv.library.name,
            "entities": inv.entities.len(),
            "issues": extraction.issues,
        }))?;
    } else {
        println!(
            "{}: {} entities for {} {} ({} issue(s))",
            output.display(),
            inv.entities.len(),
            inv.library.name,
            inv.version_label,
            extraction.issues.len()
        );
    }
    Ok(())
}

fn graph_build(cli: &Cli, inventory: &Path, version: Option<&str>, output: &Path) -> Result<()> {
    let text = read_file(inventory)?;
    let version = match version {
        Some(v) => v.to_string(),
        None => version_from_file_name(inventory)
            .with_context(|| format!("cannot tell the version of {}; pass --version", inventory.display()))?,
    };
    let inv = ApiInventory::from_jsonl(&text, &version).map_err(anyhow::Error::msg)?;
    let graph = build_graph(&inv)?;
    save_graph(&graph, output)?;
    if cli.json {
        print_json(&json!({
            "output": output,
            "version": graph.version_label,
            "nodes": graph.nodes().len(),
            "edges": graph.edges().len(),
        }))?;
    } else {
        println!("{}: {} nodes, {} edges", output.display(), graph.nodes().len(), graph.edges().len());
    }
    Ok(())
}

/// `1.2.0.jsonl`, `acme-1.2.0.jsonl` and `acme_1.2.0.inv.jsonl` all give `1.2.0`.
fn version_from_file_name(path: &Path) -> Option<String> {
    let name = path.file_name()?.to_str()?;
    let stem = name.strip_suffix(".jsonl").unwrap_or(name);
    let stem = stem.strip_suffix(".inventory").or_else(|| stem.strip_suffix(".inv")).unwrap_or(stem);
    let tail = stem.rsplit(['-', '_']).next()?;
    let tail = tail.strip_prefix('v').unwrap_or(tail);
    tail.starts_with(|c: char| c.is_ascii_digit()).then(|| tail.to_string())
}

fn counts(evo: &EvolutionGraph) -> BTreeMap<&'static str, usize> {
    EvolutionKind::ALL.iter().map(|k| (k.as_str(), evo.count(*k))).collect()
}

fn diff(cli: &Cli, cfg: &Config, old: &Path, new: &Path, output: &Path) -> Result<()> {
    let (g_old, g_new) = (load_graph(old)?, load_graph(new)?);
    let evo = diff_versions_with(&g_old.to_inventory(), &g_new.to_inventory(), &cfg.diff_config())?;
    save_evolution(&evo, output)?;
    let counts = counts(&evo);
    if cli.json {
        print_json(&json!({
            "output": output,
            "old_version": evo.old_version,
            "new_version": evo.new_version,
            "counts": counts,
        }))?;
    } else {
        let summary: Vec<String> = counts.iter().filter(|(_, n)| **n > 0).map(|(k, n)| format!("{k} {n}")).collect();
        println!("{}: {} -> {}: {}", output.display(), evo.old_version, evo.new_version, summary.join(", "));
    }
    Ok(())
}

fn load_query(path: &Path) -> Result<MigrationQuery> {
    let q: MigrationQuery =
        serde_json::from_str(&read_file(path)?).with_context(|| format!("parsing query {}", path.display()))?;
    q.validate()?;
    Ok(q)
}

/// Assembles the chain from the configured graph and evolution files.
/// Consecutive versions without an evolution file are diffed on the fly.
fn load_chain(cfg: &Config, query: &MigrationQuery, labels: &[String]) -> Result<VersionChain> {
    let labels: Vec<String> = if labels.is_empty() {
        vec![query.old_version.clone(), query.new_version.clone()]
    } else {
        labels.to_vec()
    };
    if labels.first() != Some(&query.old_version) || labels.last() != Some(&query.new_version) {
        bail!("--chain must start at {} and end at {}", query.old_version, query.new_version);
    }
    let mut graphs: BTreeMap<String, VersionGraph> = BTreeMap::new();
    for p in &cfg.graphs {
        let g = load_graph(p)?;
        graphs.insert(g.version_label.clone(), g);
    }
    let mut evos: BTreeMap<(String, String), EvolutionGraph> = BTreeMap::new();
    for p in &cfg.evolution {
        let e = load_evolution(p)?;
        evos.insert((e.old_version.clone(), e.new_version.clone()), e);
    }
    let mut chain = VersionChain::new(labels.clone())?;
    for w in labels.windows(2) {
        let key = (w[0].clone(), w[1].clone());
        let evo = match evos.remove(&key) {
            Some(e) => e,
            None => match (graphs.get(&w[0]), graphs.get(&w[1])) {
                (Some(a), Some(b)) => {
                    log::info!("no evolution file for {} -> {}; diffing the graphs", w[0], w[1]);
                    diff_versions_with(&a.to_inventory(), &b.to_inventory(), &cfg.diff_config())?
                }
                _ => bail!("no evolution file or graph pair for {} -> {}", w[0], w[1]),
            },
        };
        chain = chain.with_evolution(evo)?;
    }
    for label in &labels {
        match graphs.remove(label) {
            Some(g) => chain = chain.with_graph(g)?,
            None if label == &labels[0] => bail!("no graph file for version {label}"),
            None => {}
        }
    }
    Ok(chain)
}

fn backend(cfg: &Config) -> Box<dyn GenerationBackend> {
    match cfg.backend {
        BackendKind::Deterministic => Box::new(DeterministicBackend { limit: cfg.path_limit }),
        BackendKind::RemoteLlm => {
            let mut b = RemoteBackend::new(cfg.remote.clone(), Box::new(HttpTransport::new(&cfg.remote, None)));
            b.limit = cfg.path_limit;
            Box::new(b)
        }
    }
}

fn plan(cli: &Cli, cfg: &Config, query_path: &Path, labels: &[String]) -> Result<()> {
    let query = load_query(query_path)?;
    let chain = load_chain(cfg, &query, labels)?;
    let graph = chain.graph(chain.first()).expect("chain has its first graph");
    let refs = locate_api_references(&query, graph)?;
    let subgraph = build_aligned_subgraph(&chain, &refs.matched)?;
    let plan = plan_paths(&query, &subgraph, backend(cfg).as_ref())?;
    for w in &plan.warnings {
        log::warn!("{w}");
    }
    if cli.json {
        // One {source, paths} entry per referenced API, in reference order.
        let sources: Vec<serde_json::Value> = refs
            .matched
            .iter()
            .map(|s| {
                let paths: Vec<&EvolutionPath> = plan.paths.iter().filter(|p| p.source().as_ref() == Some(s)).collect();
                json!({ "source": render_node(s), "paths": paths })
            })
            .collect();
        print_json(&json!({
            "chain": chain.labels(),
            "advisory": refs.advisory,
            "sources": sources,
            "fell_back": plan.fell_back,
            "warnings": plan.warnings,
        }))?;
        return Ok(());
    }
    let mut out = std::io::stdout().lock();
    for p in &plan.paths {
        let text: Vec<String> = p.triplets.iter().map(|t| t.render()).collect();
        writeln!(out, "[{} hop(s), score {:.3}] {}", p.hop_count, p.cumulative_score, text.join("  ;  "))?;
    }
    for a in &refs.advisory {
        writeln!(out, "advisory: {a} is not an API of {}", chain.first())?;
    }
    Ok(())
}

fn migrate(
    cli: &Cli,
    cfg: &Config,
    query_path: &Path,
    labels: &[String],
    instructions: Option<&Path>,
    output: Option<&Path>,
) -> Result<()> {
    let query = load_query(query_path)?;
    let chain = load_chain(cfg, &query, labels)?;
    let instructions = match instructions {
        Some(p) => read_file(p)?,
        None => DEFAULT_INSTRUCTIONS.to_string(),
    };
    let report = migrate_query(&query, &chain, backend(cfg).as_ref(), &instructions)?;
    for w in &report.result.warnings {
        log::warn!("{w}");
    }
    if report.result.outcome == Outcome::NoTargetApiRemoved {
        log::warn!("an API used by the code has no successor in {}; code left unchanged", query.new_version);
    }
    if let Some(p) = output {
        write_file(p, &report.result.new_code)?;
    }
    if cli.json {
        print_json(&serde_json::to_value(&report)?)?;
    } else if output.is_none() {
        print!("{}", report.result.new_code);
    }
    Ok(())
}

fn eval(cli: &Cli, dataset: &Path, candidates: &Path, k: usize, csv: Option<&Path>, output: Option<&Path>) -> Result<()> {
    let records = load_records(&read_file(dataset)?)?;
    for (i, r) in records.iter().enumerate() {
        r.validate().with_context(|| format!("record {i}"))?;
    }
    let cands = load_candidates(&read_file(candidates)?, records.len())?;
    let summary = evaluate_dataset(&records, &cands, k)?;
    if let Some(p) = csv {
        write_file(p, &summary.to_csv())?;
    }
    let value = serde_json::to_value(&summary)?;
    if let Some(p) = output {
        write_file(p, &(serde_json::to_string_pretty(&value)? + "\n"))?;
    }
    if cli.json {
        print_json(&value)?;
        return Ok(());
    }
    let mut out = std::io::stdout().lock();
    writeln!(out, "{:<14}{:>8}{:>10}{:>10}", "type", "records", format!("CDC@{k}"), format!("EM@{k}"))?;
    let rows = summary.by_type.iter().map(|(t, g)| (t.as_str(), g)).chain([("all", &summary.overall)]);
    for (label, g) in rows {
        writeln!(out, "{label:<14}{:>8}{:>10.2}{:>10.2}", g.records, g.cdc_at_k, g.em_at_k)?;
    }
    if !summary.overall.errors.is_empty() {
        let errs: Vec<String> = summary.overall.errors.iter().map(|(c, n)| format!("{} {n}", c.as_str())).collect();
        writeln!(out, "errors: {}", errs.join(", "))?;
    }
    Ok(())
}
