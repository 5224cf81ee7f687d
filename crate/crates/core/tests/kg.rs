mod common;

use std::collections::{BTreeMap, BTreeSet};

use citykg_core::citygml::parse_citygml;
use citykg_core::linker::MatchParams;
use citykg_core::mapping::{builtin_rules, linked_to, materialize, SchemaAxioms};
use citykg_core::osm::parse_osm;
use citykg_core::rdf::{parse_turtle, serialize_turtle, vocab, Term, TripleSet};
use citykg_core::store::CityStore;

type Triple = (Term, Term, Term);

fn owned(ts: &TripleSet) -> BTreeSet<Triple> {
    ts.iter().map(|(s, p, o)| (s.clone(), p.clone(), o.clone())).collect()
}

fn base(local: &str) -> Term {
    Term::iri(format!("{}{local}", vocab::BASE))
}

fn graph(store: &CityStore) -> TripleSet {
    materialize(store, &builtin_rules(), &SchemaAxioms::default()).unwrap()
}

#[test]
fn fig6a_association_fragment() {
    let p = common::run_pipeline("fig6a.gml", "fig6a.osm", MatchParams::default());
    assert_eq!(common::fig6a_fragment(&p.graph), common::fig6a_expected_fragment());
}

#[test]
fn linked_to_is_closed_over_subproperties() {
    let p = common::minitown();
    let linked = Term::iri(linked_to());
    let subs: BTreeSet<Term> =
        SchemaAxioms::default().subproperties.iter().map(|(s, _)| Term::iri(s.clone())).collect();
    let mut n = 0;
    for (s, pr, o) in p.graph.iter() {
        if subs.contains(pr) {
            n += 1;
            assert!(p.graph.contains(s, &linked, o), "{s} {pr} {o}");
        }
    }
    assert!(n > 0);
}

#[test]
fn more_rows_never_remove_triples() {
    let mut store = CityStore::new();
    parse_citygml(&mut store, &common::fixture("minitown.gml")).unwrap();
    let citygml_only = owned(&graph(&store));
    parse_osm(&mut store, &common::fixture("minitown.osm")).unwrap();
    let with_osm = owned(&graph(&store));
    citykg_core::linker::link_all(&mut store, &MatchParams::default()).unwrap();
    let linked = owned(&graph(&store));
    assert!(citygml_only.is_subset(&with_osm) && with_osm.is_subset(&linked));
    assert!(citygml_only.len() < with_osm.len() && with_osm.len() < linked.len());
}

#[test]
fn materialization_is_deterministic() {
    let a = common::minitown();
    let b = common::minitown();
    assert_eq!(serialize_turtle(&a.graph), serialize_turtle(&b.graph));
    assert_eq!(serialize_turtle(&a.graph), serialize_turtle(&graph(&a.store)));
}

#[test]
fn every_node_has_at_most_one_wkt() {
    let p = common::minitown();
    let as_wkt = Term::iri(format!("{}asWKT", vocab::GEO));
    let mut count: BTreeMap<&Term, usize> = BTreeMap::new();
    for (s, pr, o) in p.graph.iter() {
        if *pr == as_wkt {
            assert_eq!(o.datatype(), Some(vocab::WKT_LITERAL));
            *count.entry(s).or_default() += 1;
        }
    }
    assert!(!count.is_empty());
    assert!(count.values().all(|&c| c == 1));
}

#[test]
fn turtle_round_trip_is_lossless() {
    for (gml, osm) in [("minitown.gml", "minitown.osm"), ("fig6a.gml", "fig6a.osm")] {
        let p = common::run_pipeline(gml, osm, MatchParams::default());
        let text = serialize_turtle(&p.graph);
        let back = parse_turtle(text.as_bytes()).unwrap();
        assert_eq!(back, p.graph, "{gml}");
        assert_eq!(serialize_turtle(&back), text);
    }
}

#[test]
fn building_heights_are_decimals() {
    let p = common::minitown();
    let b1 = base("building/B1");
    let height = Term::iri(format!("{}measuredHeight", vocab::BLDG));
    assert!(p.graph.contains(&b1, &height, &Term::typed("45", vocab::XSD_DECIMAL)));
    assert!(p.graph.contains(&base("building/B2"), &height, &Term::typed("12.5", vocab::XSD_DECIMAL)));
}
