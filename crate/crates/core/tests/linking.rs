mod common;

use std::collections::BTreeSet;

use citykg_core::linker::*;
use citykg_core::store::{LinkKind, RelationClass};
use citykg_geometry::{Crs, Geometry, Polygon};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn exhaustive(left: &[Geometry], right: &[Geometry], t: f64) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for (i, a) in left.iter().enumerate() {
        for (j, b) in right.iter().enumerate() {
            if overlap_ratio(a, b).unwrap().is_some_and(|r| r >= t) {
                out.insert((i, j));
            }
        }
    }
    out
}

fn edge_set(m: &PolygonMatches) -> BTreeSet<(usize, usize)> {
    m.edges.iter().map(|&(i, j, _)| (i, j)).collect()
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Geometry {
    Geometry::polygon(Polygon::rect(x0, y0, x1, y1), Crs::utm32n())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn step1_equals_exhaustive_evaluation(seed in any::<u64>(), t in 0.05f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (left, right) = common::random_scene(&mut rng, 30);
        let m = match_polygons(&left, &right, t).unwrap();
        prop_assert_eq!(edge_set(&m), exhaustive(&left, &right, t));
    }

    #[test]
    fn threshold_is_antitone(seed in any::<u64>(), t1 in 0.05f64..1.0, t2 in 0.05f64..1.0) {
        let (hi, lo) = if t1 >= t2 { (t1, t2) } else { (t2, t1) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (left, right) = common::random_scene(&mut rng, 30);
        let strict = edge_set(&match_polygons(&left, &right, hi).unwrap());
        let loose = edge_set(&match_polygons(&left, &right, lo).unwrap());
        prop_assert!(strict.is_subset(&loose));
    }

    #[test]
    fn ratio_is_symmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (left, right) = common::random_scene(&mut rng, 10);
        for a in &left {
            for b in &right {
                let (x, y) = (overlap_ratio(a, b).unwrap(), overlap_ratio(b, a).unwrap());
                match (x, y) {
                    (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-12),
                    (x, y) => prop_assert_eq!(x, y),
                }
            }
        }
    }

    #[test]
    fn classes_agree_with_union_find(edges in prop::collection::btree_set((0u32..12, 0u32..12), 0..30)) {
        let edges: Vec<(u32, u32)> = edges.into_iter().collect();
        let got: Vec<&str> = classify_relations(&edges).into_iter().map(RelationClass::label).collect();
        prop_assert_eq!(got, common::union_find_classes(&edges));
    }

    #[test]
    fn adjacency_never_overrides_a_match(seed in any::<u64>(), eps in 0.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (left, right) = common::random_scene(&mut rng, 25);
        let input = LinkInput {
            surfaces: left.into_iter().enumerate().map(|(i, g)| (i as i64, g)).collect(),
            footprints: right.into_iter().enumerate().map(|(i, g)| (1000 + i as i64, g)).collect(),
            pois: Vec::new(),
        };
        let params = MatchParams { t: 0.5, epsilon_adjacent: eps };
        let graph = step1_spatial_match(&input, &params).unwrap();
        let adjacent = step2_adjacent(&input, &graph, &params).unwrap();
        let matched = graph.matched_surfaces();
        prop_assert!(adjacent.iter().all(|(s, _)| !matched.contains(s)));
        let report = build_report(&input, &graph, &adjacent, &[], params);
        for d in [&report.step1, &report.final_distribution] {
            prop_assert!((d.percent_sum() - 100.0).abs() <= 0.01, "{}", d.percent_sum());
        }
        prop_assert_eq!(report.final_distribution.classes.len(), ReportClass::ALL.len());
    }
}

#[test]
fn canonical_configurations() {
    // one OSM polygon per bldg, one OSM over two bldgs, two OSM over one bldg, a chain
    let cases: [(&[(u32, u32)], RelationClass); 4] = [
        (&[(1, 1)], RelationClass::OneToOne),
        (&[(1, 1), (2, 1)], RelationClass::OneToN),
        (&[(1, 1), (1, 2)], RelationClass::MToOne),
        (&[(1, 1), (2, 1), (2, 2)], RelationClass::MToN),
    ];
    for (edges, class) in cases {
        assert!(classify_relations(edges).iter().all(|c| *c == class), "{edges:?}");
    }
}

#[test]
fn minitown_report_matches_fixture_construction() {
    let p = common::minitown();
    let s = p.report.summary();
    let expected =
        [("1:1", 2), ("1:n", 1), ("m:1", 1), ("m:n", 1), ("adjacent", 1), ("0:1", 1), ("1:0", 1), ("poi", 3)];
    for (k, v) in expected {
        assert_eq!(s[k], v, "{k}");
    }
    assert_eq!(p.report.poi_records, 5);
    // 9 ground surfaces + 1 unmatched footprint
    assert_eq!(p.report.final_distribution.denominator, 10);
    assert!((p.report.step1.get(ReportClass::ZeroToOne).percent - 20.0).abs() < 1e-9);
    assert!((p.report.final_distribution.get(ReportClass::ZeroToOne).percent - 10.0).abs() < 1e-9);
    for r in p.store.linkage() {
        if r.kind == LinkKind::Adjacent {
            let gml = &p.store.cityobject(r.citygml_surface_id).unwrap().gmlid;
            assert_eq!(gml, "G3c");
            assert_eq!(r.osm_id, 13);
        }
    }
}

#[test]
fn lower_threshold_never_loses_matches_on_minitown() {
    let strict =
        common::run_pipeline("minitown.gml", "minitown.osm", MatchParams { t: 0.99, ..MatchParams::default() });
    let loose = common::minitown();
    let pairs = |p: &common::Pipeline| -> BTreeSet<(i64, i64)> {
        p.store
            .linkage()
            .iter()
            .filter(|r| r.kind == LinkKind::Match)
            .map(|r| (r.citygml_surface_id, r.osm_id))
            .collect()
    };
    assert!(pairs(&strict).is_subset(&pairs(&loose)));
    assert!(pairs(&strict).len() < pairs(&loose).len());
}

#[test]
fn adjacency_requires_all_three_conditions() {
    for mask in 0..8u8 {
        let (a, b, c) = (mask & 1 != 0, mask & 2 != 0, mask & 4 != 0);
        let osm1 = if a { rect(0.0, 0.0, 10.0, 10.0) } else { rect(0.0, 30.0, 10.0, 40.0) };
        let bldg2 = if b { rect(10.0, 0.0, 16.0, 10.0) } else { rect(13.0, 0.0, 19.0, 10.0) };
        let mut footprints = vec![(1, osm1)];
        if !c {
            footprints.push((2, bldg2.clone()));
        }
        let input =
            LinkInput { surfaces: vec![(100, rect(0.0, 0.0, 10.0, 10.0)), (200, bldg2)], footprints, pois: Vec::new() };
        let params = MatchParams::default();
        let graph = step1_spatial_match(&input, &params).unwrap();
        let adjacent = step2_adjacent(&input, &graph, &params).unwrap();
        assert_eq!(adjacent.contains(&(200, 1)), a && b && c, "a={a} b={b} c={c}");
    }
}
