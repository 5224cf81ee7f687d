use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use citykg_core::rdf::parse_turtle;

fn fixture(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "core", "tests", "fixtures", name].iter().collect()
}

fn citykg(store: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_citykg")).args(args).env("CITYKG_STORE", store).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn ok(o: Output) -> String {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", stderr(&o));
    stdout(&o)
}

fn import_minitown(store: &Path) {
    let gml = fixture("minitown.gml");
    let osm = fixture("minitown.osm");
    ok(citykg(store, &["import-citygml", gml.to_str().unwrap()]));
    ok(citykg(store, &["import-osm", osm.to_str().unwrap()]));
}

fn field(text: &str, key: &str) -> usize {
    text.lines().find_map(|l| l.strip_prefix(&format!("{key}: "))).unwrap().parse().unwrap()
}

#[test]
fn import_reports_buildings() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(citykg(&dir.path().join("s"), &["import-citygml", fixture("minitown.gml").to_str().unwrap()]));
    assert!(out.lines().any(|l| l == "buildings: 6"), "{out}");
}

#[test]
fn missing_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = citykg(&dir.path().join("s"), &["import-citygml", "/nonexistent/city.gml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/nonexistent/city.gml"));
}

#[test]
fn empty_model_imports_with_zero_counts() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.gml");
    fs::write(&empty, r#"<core:CityModel xmlns:core="http://www.opengis.net/citygml/2.0"/>"#).unwrap();
    let out = ok(citykg(&dir.path().join("s"), &["import-citygml", empty.to_str().unwrap()]));
    assert_eq!(field(&out, "buildings"), 0);
}

#[test]
fn stages_out_of_order_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("s");
    assert_eq!(citykg(&store, &["link"]).status.code(), Some(3));
    assert_eq!(citykg(&store, &["materialize"]).status.code(), Some(3));
    ok(citykg(&store, &["import-citygml", fixture("minitown.gml").to_str().unwrap()]));
    assert_eq!(citykg(&store, &["link"]).status.code(), Some(3));
    assert_eq!(citykg(&store, &["query", "q1"]).status.code(), Some(3));
}

#[test]
fn link_report_and_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("s");
    import_minitown(&store);
    assert_eq!(citykg(&store, &["link", "--threshold", "0"]).status.code(), Some(2));
    let strict = ok(citykg(&store, &["link", "--threshold", "0.99"]));
    let report = ok(citykg(&store, &["link"]));
    for class in ["1:1", "1:n", "m:1", "m:n", "adjacent", "0:1", "1:0"] {
        assert!(report.lines().any(|l| l.starts_with(&format!("{class}\t"))), "{class} missing:\n{report}");
    }
    assert!(field(&strict, "match_records") <= field(&report, "match_records"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("s");
    import_minitown(&store);
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "# strict run\nthreshold = 0.99\nepsilon_adjacent = 0.5\n").unwrap();
    let from_file = ok(citykg(&store, &["link", "--config", cfg.to_str().unwrap()]));
    assert!(from_file.contains("threshold: 0.99"), "{from_file}");
    let flag = ok(citykg(&store, &["link", "--config", cfg.to_str().unwrap(), "--threshold", "0.3"]));
    assert!(flag.contains("threshold: 0.3") && flag.contains("epsilon_adjacent: 0.5"), "{flag}");
    fs::write(&cfg, "colour = red\n").unwrap();
    assert_eq!(citykg(&store, &["link", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn materialized_turtle_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("s");
    import_minitown(&store);
    ok(citykg(&store, &["link"]));
    let out = dir.path().join("kg.ttl");
    let text = ok(citykg(&store, &["materialize", "--out", out.to_str().unwrap()]));
    let graph = parse_turtle(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(field(&text, "triples"), graph.len());
    assert!(graph.len() > 300);
}

#[test]
fn queries_and_query_errors() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("s");
    import_minitown(&store);
    ok(citykg(&store, &["link"]));
    ok(citykg(&store, &["materialize"]));
    let q1 = ok(citykg(&store, &["query", "q1"]));
    assert_eq!(q1.lines().next(), Some("address_label"));
    assert_eq!(q1.lines().count(), 3);
    let q10 = ok(citykg(&store, &["query", "Q10"]));
    let mut lines = q10.lines();
    assert_eq!(lines.next(), Some("citygmlGeom\tcitygmlGeomAreaSqm"));
    let total: f64 = lines.map(|l| l.rsplit('\t').next().unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 580.0).abs() < 1e-6, "{total}");
    let bad = dir.path().join("bad.rq");
    fs::write(&bad, "SELECT ?x {\n  ?x ?p\n}\n").unwrap();
    let o = citykg(&store, &["query", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("line 3, column 1"), "{}", stderr(&o));
}

fn full_run(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let store = dir.join("s");
    import_minitown(&store);
    ok(citykg(&store, &["link", "--out", dir.join("linkage.tsv").to_str().unwrap()]));
    ok(citykg(&store, &["materialize"]));
    for q in ["q1", "q3", "q7", "q10"] {
        let out = dir.join(format!("{q}.tsv"));
        ok(citykg(&store, &["query", q, "--out", out.to_str().unwrap()]));
    }
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    for base in [dir.to_path_buf(), store] {
        let mut names: Vec<_> =
            fs::read_dir(&base).unwrap().map(|e| e.unwrap().path()).filter(|p| p.is_file()).collect();
        names.sort();
        for p in names {
            files.push((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()));
        }
    }
    files
}

#[test]
fn end_to_end_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (fa, fb) = (full_run(a.path()), full_run(b.path()));
    assert!(fa.len() >= 15);
    assert_eq!(fa, fb);
}
