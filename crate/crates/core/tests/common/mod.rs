#![allow(dead_code)]

pub mod oracles;

use std::collections::BTreeSet;
use std::path::PathBuf;

use citykg_core::citygml::parse_citygml;
use citykg_core::linker::{link_all, LinkReport, MatchParams};
use citykg_core::mapping::{builtin_rules, linked_to, materialize, SchemaAxioms};
use citykg_core::osm::parse_osm;
use citykg_core::rdf::{vocab, Term, TripleSet};
use citykg_core::store::CityStore;
use citykg_geometry::{Coord, Crs, Geometry, Polygon};
use rand::Rng;

pub fn fixture(name: &str) -> String {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "fixtures", name].iter().collect();
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub struct Pipeline {
    pub store: CityStore,
    pub report: LinkReport,
    pub graph: TripleSet,
}

pub fn run_pipeline(gml: &str, osm: &str, params: MatchParams) -> Pipeline {
    let mut store = CityStore::new();
    parse_citygml(&mut store, &fixture(gml)).unwrap();
    parse_osm(&mut store, &fixture(osm)).unwrap();
    let report = link_all(&mut store, &params).unwrap();
    let graph = materialize(&store, &builtin_rules(), &SchemaAxioms::default()).unwrap();
    Pipeline { store, report, graph }
}

pub fn minitown() -> Pipeline {
    run_pipeline("minitown.gml", "minitown.osm", MatchParams::default())
}

/// Star-shaped (concave) or convex polygon around a centre, in UTM 32N.
/// Angles are jittered steps below pi apart, so the ring is always simple.
pub fn random_polygon(rng: &mut impl Rng, cx: f64, cy: f64, size: f64, convex: bool) -> Geometry {
    let n = rng.gen_range(4..10);
    let step = std::f64::consts::TAU / n as f64;
    let mut ring: Vec<Coord> = (0..n)
        .map(|k| {
            let a = (k as f64 + rng.gen_range(0.0..0.5)) * step;
            let r = if convex { size } else { size * rng.gen_range(0.35..1.0) };
            Coord::xy(cx + r * a.cos(), cy + r * a.sin())
        })
        .collect();
    ring.push(ring[0]);
    Geometry::polygon(Polygon::new(ring, Vec::new()).unwrap().normalized(), Crs::utm32n())
}

/// Left polygons scattered over a 200 m square; right polygons are mostly
/// jittered near left ones so that every ratio range occurs.
pub fn random_scene(rng: &mut impl Rng, max: usize) -> (Vec<Geometry>, Vec<Geometry>) {
    let nl = rng.gen_range(1..=max);
    let nr = rng.gen_range(1..=max);
    let mut centres = Vec::new();
    let left: Vec<Geometry> = (0..nl)
        .map(|_| {
            let (x, y) = (691_000.0 + rng.gen_range(0.0..200.0), 5_334_000.0 + rng.gen_range(0.0..200.0));
            centres.push((x, y));
            {
                let (size, convex) = (rng.gen_range(3.0..15.0), rng.gen_bool(0.5));
                random_polygon(rng, x, y, size, convex)
            }
        })
        .collect();
    let right = (0..nr)
        .map(|_| {
            let (x, y) = if rng.gen_bool(0.8) {
                let (x, y) = centres[rng.gen_range(0..centres.len())];
                (x + rng.gen_range(-8.0..8.0), y + rng.gen_range(-8.0..8.0))
            } else {
                (691_000.0 + rng.gen_range(0.0..200.0), 5_334_000.0 + rng.gen_range(0.0..200.0))
            };
            {
                let (size, convex) = (rng.gen_range(3.0..15.0), rng.gen_bool(0.5));
                random_polygon(rng, x, y, size, convex)
            }
        })
        .collect();
    (left, right)
}

/// Connected components by union-find; returns the class label of each
/// edge computed from component sizes.
pub fn union_find_classes(edges: &[(u32, u32)]) -> Vec<&'static str> {
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let next = p[y];
            p[y] = r;
            y = next;
        }
        r
    }
    let mut ids = std::collections::HashMap::new();
    for &(l, r) in edges {
        let n = ids.len();
        ids.entry((0, l)).or_insert(n);
        let n = ids.len();
        ids.entry((1, r)).or_insert(n);
    }
    let mut parent: Vec<usize> = (0..ids.len()).collect();
    for &(l, r) in edges {
        let (a, b) = (find(&mut parent, ids[&(0, l)]), find(&mut parent, ids[&(1, r)]));
        parent[a] = b;
    }
    let mut sizes: std::collections::HashMap<usize, (usize, usize)> = std::collections::HashMap::new();
    let nodes: Vec<((u8, u32), usize)> = ids.iter().map(|(k, v)| (*k, *v)).collect();
    for ((side, _), i) in nodes {
        let root = find(&mut parent, i);
        let e = sizes.entry(root).or_default();
        if side == 0 {
            e.0 += 1;
        } else {
            e.1 += 1;
        }
    }
    edges
        .iter()
        .map(|&(l, _)| {
            let root = find(&mut parent, ids[&(0, l)]);
            match sizes[&root] {
                (1, 1) => "1:1",
                (_, 1) => "1:n",
                (1, _) => "m:1",
                _ => "m:n",
            }
        })
        .collect()
}

pub type Triple = (Term, Term, Term);

fn base(local: &str) -> Term {
    Term::iri(format!("{}{local}", vocab::BASE))
}

/// Triples about the single association of the fig6a fixture, plus the
/// subproperty axioms.
pub fn fig6a_fragment(graph: &TripleSet) -> BTreeSet<Triple> {
    let assoc = base("association/W1");
    let sub = Term::iri(vocab::RDFS_SUBPROPERTY_OF);
    graph
        .iter()
        .filter(|(s, p, _)| **s == assoc || **p == sub)
        .map(|(s, p, o)| (s.clone(), p.clone(), o.clone()))
        .collect()
}

/// Way 1 matches bldg1 and is adjacent to bldg2.
pub fn fig6a_expected_fragment() -> BTreeSet<Triple> {
    let assoc = base("association/W1");
    let way = Term::iri(format!("{}way/1", vocab::LGDO));
    let (b1, b2) = (base("gmlid/bldg1"), base("gmlid/bldg2"));
    let linked = Term::iri(linked_to());
    let mut expected: BTreeSet<Triple> = [
        (assoc.clone(), Term::iri(vocab::RDF_TYPE), base("Association_CityGML_OSM")),
        (assoc.clone(), base("matchOSM"), way.clone()),
        (assoc.clone(), base("matchCityGML"), b1.clone()),
        (assoc.clone(), base("adjacentCityGML"), b2.clone()),
        (assoc.clone(), linked.clone(), way),
        (assoc.clone(), linked.clone(), b1),
        (assoc, linked.clone(), b2),
    ]
    .into();
    for p in ["matchOSM", "matchCityGML", "adjacentCityGML"] {
        expected.insert((base(p), Term::iri(vocab::RDFS_SUBPROPERTY_OF), linked.clone()));
    }
    expected
}
