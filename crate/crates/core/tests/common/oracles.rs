//! Independent evaluations of the analytical queries by direct scans of
//! the triple set.

use citykg_core::rdf::{vocab, Term, TripleSet};
use citykg_core::sparql::{geof_buffer, geof_sf_intersects};

pub type Row = Vec<Option<Term>>;

pub fn iri(ns: &str, local: &str) -> Term {
    Term::iri(format!("{ns}{local}"))
}

pub fn base(local: &str) -> Term {
    iri(vocab::BASE, local)
}

pub fn bldg(local: &str) -> Term {
    iri(vocab::BLDG, local)
}

pub fn geo(local: &str) -> Term {
    iri(vocab::GEO, local)
}

fn rdf_type() -> Term {
    Term::iri(vocab::RDF_TYPE)
}

fn label() -> Term {
    iri(vocab::RDFS, "label")
}

/// Objects of `s p ?o`, with multiplicity.
fn objs(g: &TripleSet, s: &Term, p: &Term) -> Vec<Term> {
    g.iter().filter(|(a, b, _)| *a == s && *b == p).map(|(_, _, o)| o.clone()).collect()
}

fn subjs(g: &TripleSet, p: &Term, o: &Term) -> Vec<Term> {
    g.iter().filter(|(_, b, c)| *b == p && *c == o).map(|(s, _, _)| s.clone()).collect()
}

fn pairs(g: &TripleSet, p: &Term) -> Vec<(Term, Term)> {
    g.iter().filter(|(_, b, _)| *b == p).map(|(s, _, o)| (s.clone(), o.clone())).collect()
}

/// Nodes reached from `s` along a fixed-length predicate path.
fn path(g: &TripleSet, s: &Term, steps: &[Term]) -> Vec<Term> {
    steps.iter().fold(vec![s.clone()], |nodes, p| nodes.iter().flat_map(|n| objs(g, n, p)).collect())
}

fn has_type(g: &TripleSet, s: &Term, class: &Term) -> bool {
    g.contains(s, &rdf_type(), class)
}

pub fn number(t: &Term) -> f64 {
    t.value().parse().unwrap()
}

fn heights_over_30(g: &TripleSet) -> Vec<(Term, Term)> {
    pairs(g, &bldg("measuredHeight")).into_iter().filter(|(_, h)| number(h) > 30.0).collect()
}

fn surfaces_of(g: &TripleSet, building: &Term, kind: &str) -> Vec<Term> {
    objs(g, building, &bldg("boundedBy")).into_iter().filter(|s| has_type(g, s, &bldg(kind))).collect()
}

fn surface_wkt(g: &TripleSet, s: &Term) -> Vec<Term> {
    path(g, s, &[geo("hasGeometry"), geo("asWKT")])
}

/// `(osm entity, citygml building)` through CityGML/OSM associations.
fn linked_buildings(g: &TripleSet) -> Vec<(Term, Term)> {
    let mut out = Vec::new();
    for link in subjs(g, &rdf_type(), &base("Association_CityGML_OSM")) {
        for osm in objs(g, &link, &base("matchOSM")) {
            for b in path(g, &link, &[base("matchCityGML"), base("mapSurface"), bldg("bounds")]) {
                out.push((osm.clone(), b));
            }
        }
    }
    out
}

/// Class nodes of an OSM entity through its class associations.
fn osm_class_nodes(g: &TripleSet, osm: &Term) -> Vec<Term> {
    subjs(g, &base("hasosmid"), osm)
        .into_iter()
        .filter(|l| has_type(g, l, &base("Association_OSM_Class")))
        .flat_map(|l| objs(g, &l, &base("hasosmclassid")))
        .collect()
}

/// One entry per (class node, listed class) the node is typed with.
fn typed_among(g: &TripleSet, node: &Term, classes: &[&str]) -> usize {
    classes.iter().filter(|c| has_type(g, node, &iri(vocab::LGDO, c))).count()
}

const RESIDENTIAL: [&str; 5] = ["Residential", "ResidentialHome", "BuildingResidential", "ApartmentBuilding", "House"];
const HIGHWAYS: [&str; 4] = ["SecondaryHighway", "TertiaryHighway", "HighwayService", "UnclassifiedHighway"];

pub fn oracle(name: &str, g: &TripleSet) -> Vec<Row> {
    let mut rows: Vec<Row> = Vec::new();
    let mut push = |r: Vec<Option<Term>>| rows.push(r);
    match name {
        "q1" | "q2" => {
            for (b, addr) in pairs(g, &bldg("address")) {
                for l in objs(g, &addr, &label()) {
                    if name == "q2" {
                        if l.value().contains("Stephansplatz") {
                            push(vec![Some(b.clone()), Some(l)]);
                        }
                    } else {
                        for h in objs(g, &b, &bldg("measuredHeight")) {
                            if number(&h) > 30.0 {
                                push(vec![Some(l.clone())]);
                            }
                        }
                    }
                }
            }
        }
        "q3" => {
            for b in subjs(g, &rdf_type(), &bldg("Building")) {
                let n = surfaces_of(g, &b, "RoofSurface").len();
                if n > 0 {
                    push(vec![Some(b), Some(Term::typed(n.to_string(), vocab::XSD_INTEGER))]);
                }
            }
        }
        "q4" | "q5" => {
            for (b, _) in heights_over_30(g) {
                let wkts = if name == "q4" {
                    surfaces_of(g, &b, "RoofSurface").iter().flat_map(|s| surface_wkt(g, s)).collect()
                } else {
                    path(g, &b, &[bldg("lod2Solid"), geo("asWKT")])
                };
                wkts.into_iter().for_each(|w| push(vec![Some(w)]));
            }
        }
        "q6" => {
            for (osm, b) in linked_buildings(g) {
                for h in objs(g, &b, &bldg("measuredHeight")) {
                    if number(&h) <= 30.0 {
                        continue;
                    }
                    for gw in surfaces_of(g, &b, "GroundSurface").iter().flat_map(|s| surface_wkt(g, s)) {
                        for ow in surface_wkt(g, &osm) {
                            push(vec![Some(gw.clone()), Some(ow)]);
                        }
                    }
                }
            }
        }
        "q7" => {
            for (osm, b) in linked_buildings(g) {
                for class in osm_class_nodes(g, &osm) {
                    if !has_type(g, &class, &iri(vocab::LGDO, "Hotel")) {
                        continue;
                    }
                    let labels: Vec<Option<Term>> = match objs(g, &osm, &label()) {
                        l if l.is_empty() => vec![None],
                        l => l.into_iter().map(Some).collect(),
                    };
                    for name in labels {
                        for h in objs(g, &b, &bldg("measuredHeight")).into_iter().filter(|h| number(h) > 30.0) {
                            for w in path(g, &b, &[bldg("lod2Solid"), geo("asWKT")]) {
                                push(vec![Some(b.clone()), Some(h.clone()), name.clone(), Some(w)]);
                            }
                        }
                    }
                }
            }
        }
        "q8" | "q9" => {
            for (osm, b) in linked_buildings(g) {
                for class in osm_class_nodes(g, &osm) {
                    for _ in 0..typed_among(g, &class, &RESIDENTIAL) {
                        if name == "q8" {
                            let tall = objs(g, &b, &bldg("measuredHeight")).iter().filter(|h| number(h) > 30.0).count();
                            for _ in 0..tall {
                                for w in surfaces_of(g, &b, "GroundSurface").iter().flat_map(|s| surface_wkt(g, s)) {
                                    push(vec![Some(b.clone()), Some(w)]);
                                }
                            }
                        } else {
                            for rt in path(g, &b, &[bldg("roofSurface"), bldg("roofType")]) {
                                if rt.value() == "flat roof" {
                                    continue;
                                }
                                for w in surfaces_of(g, &b, "RoofSurface").iter().flat_map(|s| surface_wkt(g, s)) {
                                    push(vec![Some(w), Some(rt.clone())]);
                                }
                            }
                        }
                    }
                }
            }
        }
        "q10" => {
            let metre = iri(vocab::UOM, "metre");
            let twenty = Term::typed("20", vocab::XSD_INTEGER);
            let grounds: Vec<Term> = pairs(g, &bldg("boundedBy"))
                .into_iter()
                .map(|(_, s)| s)
                .filter(|s| has_type(g, s, &bldg("GroundSurface")))
                .collect();
            for l in subjs(g, &rdf_type(), &base("Association_OSM_Class")) {
                for osm in objs(g, &l, &base("hasosmid")) {
                    for class in objs(g, &l, &base("hasosmclassid")) {
                        for _ in 0..typed_among(g, &class, &HIGHWAYS) {
                            for street in objs(g, &osm, &label()) {
                                if !street.value().contains("Elisenstraße") {
                                    continue;
                                }
                                for ow in surface_wkt(g, &osm) {
                                    let zone = geof_buffer(&ow, &twenty, &metre);
                                    for s in &grounds {
                                        for gw in surface_wkt(g, s) {
                                            let hit = zone.as_ref().and_then(|z| geof_sf_intersects(z, &gw));
                                            if hit != Some(Term::boolean(true)) {
                                                continue;
                                            }
                                            for a in path(g, s, &[geo("hasGeometry"), geo("hasMetricArea")]) {
                                                push(vec![Some(gw.clone()), Some(a)]);
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        _ => panic!("no oracle for {name}"),
    }
    rows
}
