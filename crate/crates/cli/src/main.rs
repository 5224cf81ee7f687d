//! `citykg`: batch driver for the CityGML/OSM knowledge-graph pipeline.
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 a stage was
//! run before its prerequisites, 4 query error.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use citykg_core::citygml::parse_citygml;
use citykg_core::linker::{link_all, MatchParams};
use citykg_core::mapping::{builtin_rules, materialize, parse_mapping, SchemaAxioms};
use citykg_core::osm::parse_osm;
use citykg_core::rdf::{parse_turtle, serialize_turtle, TripleSet};
use citykg_core::sparql::{analytical_query, run_query};
use citykg_core::store::CityStore;
use citykg_geometry::Crs;
use clap::{Parser, Subcommand};

use config::{parse_zone, FileConfig};

const DEFAULT_STORE: &str = "citykg-store";
const GRAPH_FILE: &str = "graph.ttl";

#[derive(Parser)]
#[command(name = "citykg", version, about = "Link CityGML and OpenStreetMap into a queryable knowledge graph")]
struct Cli {
    /// Snapshot directory of the relational store.
    #[arg(long, global = true, env = "CITYKG_STORE")]
    store: Option<PathBuf>,
    /// key = value configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Import CityGML 2.0 building files into the store.
    ImportCitygml {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// UTM zone of the store, e.g. 32 or 33S (default: from the data).
        #[arg(long)]
        zone: Option<String>,
    },
    /// Import OpenStreetMap XML files into the store.
    ImportOsm {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        zone: Option<String>,
    },
    /// Link ground surfaces, footprints and POIs; prints the distribution report.
    Link {
        /// Minimum overlap ratio for a match, in (0, 1].
        #[arg(long)]
        threshold: Option<f64>,
        /// Boundary distance in metres under which buildings are adjacent.
        #[arg(long)]
        epsilon_adjacent: Option<f64>,
        /// Write the linkage table as TSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the distribution report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Materialize the knowledge graph as Turtle.
    Materialize {
        /// Mapping rules file (default: the built-in rules).
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Output path (default: graph.ttl in the store directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a query: a built-in name (q1..q10) or a file.
    Query {
        query: String,
        /// Turtle graph to query (default: graph.ttl in the store directory).
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Write the result TSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print an aligned table instead of TSV.
        #[arg(long)]
        pretty: bool,
    },
    /// Show row counts and pipeline state.
    Stats,
}

enum Failure {
    Input(String),
    Order(String),
    Query(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Order(_) => 3,
            Failure::Query(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Order(m) | Failure::Query(m) => m,
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn input<E: std::fmt::Display>(context: impl std::fmt::Display) -> impl FnOnce(E) -> Failure {
    move |e| Failure::Input(format!("{context}: {e}"))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(input(path.display()))
}

fn write(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(input(dir.display()))?;
    }
    fs::write(path, body).map_err(input(path.display()))
}

struct Context {
    store_dir: PathBuf,
    file: FileConfig,
}

impl Context {
    fn load_store(&self) -> Result<Option<CityStore>> {
        if !CityStore::snapshot_exists(&self.store_dir) {
            return Ok(None);
        }
        CityStore::load_snapshot(&self.store_dir).map(Some).map_err(input(self.store_dir.display()))
    }

    fn require_store(&self) -> Result<CityStore> {
        self.load_store()?.ok_or_else(|| {
            Failure::Order(format!("no store at {}; run import-citygml and import-osm first", self.store_dir.display()))
        })
    }

    fn save(&self, store: &CityStore) -> Result<()> {
        store.save_snapshot(&self.store_dir).map_err(input(self.store_dir.display()))
    }

    fn zone(&self, flag: Option<&str>) -> Result<Option<Crs>> {
        match flag {
            Some(z) => parse_zone(z).map(Some).map_err(Failure::Input),
            None => Ok(self.file.zone),
        }
    }
}

fn import(ctx: &Context, files: &[PathBuf], zone: Option<&str>, citygml: bool) -> Result<()> {
    let mut store = ctx.load_store()?.unwrap_or_default();
    if let Some(crs) = ctx.zone(zone)? {
        store.set_crs(crs).map_err(input("--zone"))?;
    }
    for path in files {
        let text = read(path)?;
        let (lines, warnings) = if citygml {
            let r = parse_citygml(&mut store, &text).map_err(input(path.display()))?;
            (r.lines(), r.warnings)
        } else {
            let r = parse_osm(&mut store, &text).map_err(input(path.display()))?;
            (r.lines(), r.warnings)
        };
        for w in warnings {
            eprintln!("warning: {}: {w}", path.display());
        }
        if files.len() > 1 {
            println!("# {}", path.display());
        }
        for l in lines {
            println!("{l}");
        }
    }
    ctx.save(&store)
}

fn link(
    ctx: &Context,
    threshold: Option<f64>,
    epsilon: Option<f64>,
    out: Option<&Path>,
    report_path: Option<&Path>,
) -> Result<()> {
    let defaults = MatchParams::default();
    let params = MatchParams {
        t: threshold.or(ctx.file.threshold).unwrap_or(defaults.t),
        epsilon_adjacent: epsilon.or(ctx.file.epsilon_adjacent).unwrap_or(defaults.epsilon_adjacent),
    };
    params.validate().map_err(|e| Failure::Input(e.to_string()))?;
    let mut store = ctx.require_store()?;
    for (key, stage) in [("citygml_imported", "import-citygml"), ("osm_imported", "import-osm")] {
        if store.meta(key).is_none() {
            return Err(Failure::Order(format!("run {stage} before link")));
        }
    }
    let report = link_all(&mut store, &params).map_err(|e| Failure::Input(e.to_string()))?;
    ctx.save(&store)?;
    let text = report.render();
    if let Some(path) = out {
        write(path, &store.linkage_tsv())?;
    }
    if let Some(path) = report_path {
        write(path, &text)?;
    }
    print!("{text}");
    Ok(())
}

fn materialize_cmd(ctx: &Context, rules: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let store = ctx.require_store()?;
    if store.meta("citygml_imported").is_none() {
        return Err(Failure::Order("run import-citygml before materialize".into()));
    }
    if store.meta("linked").is_none() {
        eprintln!("warning: store is not linked; the graph has no associations");
    }
    let doc = match rules.or(ctx.file.rules.as_deref()) {
        Some(path) => parse_mapping(&read(path)?).map_err(input(path.display()))?,
        None => builtin_rules(),
    };
    let graph = materialize(&store, &doc, &SchemaAxioms::default()).map_err(|e| Failure::Input(e.to_string()))?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| ctx.store_dir.join(GRAPH_FILE));
    write(&path, &serialize_turtle(&graph))?;
    println!("triples: {}", graph.len());
    println!("written: {}", path.display());
    Ok(())
}

fn load_graph(ctx: &Context, graph: Option<&Path>) -> Result<TripleSet> {
    let path = graph.map(Path::to_path_buf).unwrap_or_else(|| ctx.store_dir.join(GRAPH_FILE));
    if graph.is_none() && !path.is_file() {
        return Err(Failure::Order(format!("no graph at {}; run materialize first", path.display())));
    }
    let bytes = fs::read(&path).map_err(input(path.display()))?;
    parse_turtle(&bytes).map_err(input(path.display()))
}

fn query(ctx: &Context, name: &str, graph: Option<&Path>, out: Option<&Path>, pretty: bool) -> Result<()> {
    let text = match analytical_query(name) {
        Some(q) => q.to_owned(),
        None => read(Path::new(name))?,
    };
    let graph = load_graph(ctx, graph)?;
    let table = run_query(&text, &graph).map_err(|e| Failure::Query(format!("{name}: {e}")))?;
    let body = if pretty { table.to_pretty() } else { table.to_tsv() };
    match out {
        Some(path) => write(path, &body),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn stats(ctx: &Context) -> Result<()> {
    let store = ctx.require_store()?;
    println!("store: {}", ctx.store_dir.display());
    println!("crs: {}", store.crs().map_or("none".to_owned(), |c| c.to_string()));
    for (table, n) in store.table_counts() {
        println!("{table}: {n}");
    }
    for key in ["citygml_imported", "osm_imported", "linked"] {
        println!("{key}: {}", if store.meta(key).is_some() { "yes" } else { "no" });
    }
    if let (Some(t), Some(e)) = (store.meta("threshold"), store.meta("epsilon_adjacent")) {
        println!("threshold: {t}");
        println!("epsilon_adjacent: {e}");
    }
    let graph = ctx.store_dir.join(GRAPH_FILE);
    if graph.is_file() {
        println!("triples: {}", load_graph(ctx, Some(&graph))?.len());
    }
    let problems = store.check_integrity();
    println!("integrity_errors: {}", problems.len());
    for p in problems {
        eprintln!("integrity: {p}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => {
            FileConfig::parse(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    let store_dir = cli.store.clone().or_else(|| file.store.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_STORE));
    let ctx = Context { store_dir, file };
    match &cli.command {
        Command::ImportCitygml { files, zone } => import(&ctx, files, zone.as_deref(), true),
        Command::ImportOsm { files, zone } => import(&ctx, files, zone.as_deref(), false),
        Command::Link { threshold, epsilon_adjacent, out, report } => {
            link(&ctx, *threshold, *epsilon_adjacent, out.as_deref(), report.as_deref())
        }
        Command::Materialize { rules, out } => materialize_cmd(&ctx, rules.as_deref(), out.as_deref()),
        Command::Query { query: q, graph, out, pretty } => query(&ctx, q, graph.as_deref(), out.as_deref(), *pretty),
        Command::Stats => stats(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
