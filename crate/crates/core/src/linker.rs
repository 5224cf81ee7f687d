//! Three-step CityGML/OSM linking.
//!
//! 1. Overlap ratio `Area(a ∩ b) / min(Area(a), Area(b)) >= t` between
//!    ground surfaces and OSM footprints, classified by the connected
//!    component of the bipartite match graph (1:1, 1:n, m:1, m:n).
//! 2. An unmatched surface within `epsilon_adjacent` of a matched surface
//!    is linked as adjacent to that surface's footprints.
//! 3. A POI inside a matched or adjacent-linked footprint is linked to the
//!    footprint's surfaces.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use citykg_geometry::{
    intersection_area, point_in_polygon, polygon_area, polygon_distance, Geometry, GeometryError, SpatialIndex,
};
use rayon::prelude::*;

use crate::store::{CityStore, LinkKind, LinkageRecord, OsmCategory, OsmType, RelationClass, StoreError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchParams {
    pub t: f64,
    pub epsilon_adjacent: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self { t: 0.5, epsilon_adjacent: 0.2 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LinkError {
    #[error("threshold t must be in (0, 1], got {0}")]
    Threshold(f64),
    #[error("epsilon_adjacent must be a finite value >= 0, got {0}")]
    Epsilon(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl MatchParams {
    pub fn validate(&self) -> Result<(), LinkError> {
        if !(self.t > 0.0 && self.t <= 1.0) {
            return Err(LinkError::Threshold(self.t));
        }
        if !(self.epsilon_adjacent.is_finite() && self.epsilon_adjacent >= 0.0) {
            return Err(LinkError::Epsilon(self.epsilon_adjacent));
        }
        Ok(())
    }
}

/// Overlap ratio of two polygonal geometries; `None` when either is
/// degenerate (zero area).
pub fn overlap_ratio(a: &Geometry, b: &Geometry) -> Result<Option<f64>, GeometryError> {
    let (aa, ab) = (polygon_area(a)?, polygon_area(b)?);
    if aa <= 0.0 || ab <= 0.0 {
        return Ok(None);
    }
    let inter = intersection_area(a, b)?;
    Ok(Some((inter / aa.min(ab)).clamp(0.0, 1.0)))
}

/// Step-1 result over two geometry lists, by position.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolygonMatches {
    /// `(left index, right index, ratio)`, sorted by indices.
    pub edges: Vec<(usize, usize, f64)>,
    pub degenerate_left: Vec<usize>,
    pub degenerate_right: Vec<usize>,
}

/// All pairs with overlap ratio >= t. Candidates come from an R-tree over
/// the right side; the result equals exhaustive pairwise evaluation.
pub fn match_polygons(left: &[Geometry], right: &[Geometry], t: f64) -> Result<PolygonMatches, GeometryError> {
    let areas = |gs: &[Geometry]| gs.iter().map(polygon_area).collect::<Result<Vec<f64>, _>>();
    let (la, ra) = (areas(left)?, areas(right)?);
    let degenerate = |a: &[f64]| a.iter().enumerate().filter(|(_, &v)| v <= 0.0).map(|(i, _)| i).collect::<Vec<_>>();
    let index = SpatialIndex::build(right.iter().enumerate().filter(|(j, _)| ra[*j] > 0.0).map(|(j, g)| (j, g.bbox())));
    let per_left: Vec<Vec<(usize, usize, f64)>> = left
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            if la[i] <= 0.0 {
                return Ok(Vec::new());
            }
            let mut out = Vec::new();
            for j in index.query(&a.bbox()) {
                let inter = intersection_area(a, &right[j])?;
                let ratio = (inter / la[i].min(ra[j])).clamp(0.0, 1.0);
                if ratio >= t {
                    out.push((i, j, ratio));
                }
            }
            Ok(out)
        })
        .collect::<Result<_, GeometryError>>()?;
    Ok(PolygonMatches {
        edges: per_left.into_iter().flatten().collect(),
        degenerate_left: degenerate(&la),
        degenerate_right: degenerate(&ra),
    })
}

/// Relation class of each edge of a bipartite graph given as
/// `(left node, right node)` pairs, from the sizes of its connected
/// component: 1 left and 1 right is 1:1, one OSM (right) with n surfaces
/// (left) is 1:n, m OSM with one surface is m:1, otherwise m:n.
pub fn classify_relations<L, R>(edges: &[(L, R)]) -> Vec<RelationClass>
where
    L: Ord + Copy,
    R: Ord + Copy,
{
    let mut left_ids: BTreeMap<L, usize> = BTreeMap::new();
    let mut right_ids: BTreeMap<R, usize> = BTreeMap::new();
    for (l, r) in edges {
        let n = left_ids.len();
        left_ids.entry(*l).or_insert(n);
        let n = right_ids.len();
        right_ids.entry(*r).or_insert(n);
    }
    let nl = left_ids.len();
    // nodes 0..nl are left, nl.. are right
    let mut adj = vec![Vec::new(); nl + right_ids.len()];
    for (l, r) in edges {
        let (a, b) = (left_ids[l], nl + right_ids[r]);
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut comp = vec![usize::MAX; adj.len()];
    let mut sizes: Vec<(usize, usize)> = Vec::new();
    for start in 0..adj.len() {
        if comp[start] != usize::MAX {
            continue;
        }
        let c = sizes.len();
        let mut size = (0, 0);
        comp[start] = c;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            if v < nl {
                size.0 += 1;
            } else {
                size.1 += 1;
            }
            for &w in &adj[v] {
                if comp[w] == usize::MAX {
                    comp[w] = c;
                    queue.push_back(w);
                }
            }
        }
        sizes.push(size);
    }
    edges
        .iter()
        .map(|(l, _)| match sizes[comp[left_ids[l]]] {
            (1, 1) => RelationClass::OneToOne,
            (_, 1) => RelationClass::OneToN,
            (1, _) => RelationClass::MToOne,
            _ => RelationClass::MToN,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchEdge {
    pub surface_id: i64,
    pub osm_id: i64,
    pub ratio: f64,
    pub class: RelationClass,
}

/// Step-1 match graph keyed by store ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchGraph {
    pub edges: Vec<MatchEdge>,
    pub degenerate_surfaces: Vec<i64>,
    pub degenerate_footprints: Vec<i64>,
}

impl MatchGraph {
    pub fn matched_surfaces(&self) -> BTreeSet<i64> {
        self.edges.iter().map(|e| e.surface_id).collect()
    }

    pub fn matched_footprints(&self) -> BTreeSet<i64> {
        self.edges.iter().map(|e| e.osm_id).collect()
    }
}

/// Linking inputs pulled from the store.
#[derive(Debug, Clone, Default)]
pub struct LinkInput {
    /// Ground surfaces `(thematic surface id, geometry)`.
    pub surfaces: Vec<(i64, Geometry)>,
    /// OSM building footprints `(way id, geometry)`.
    pub footprints: Vec<(i64, Geometry)>,
    /// OSM POIs `(node id, point)`.
    pub pois: Vec<(i64, Geometry)>,
}

impl LinkInput {
    pub fn from_store(store: &CityStore) -> Self {
        let surfaces = store.ground_surfaces().map(|(t, g)| (t.id, g.clone())).collect();
        let pick = |cat: OsmCategory, ty: OsmType| {
            store
                .osm_entities()
                .iter()
                .filter(|e| e.category == cat && e.osm_type == ty)
                .filter_map(|e| Some((e.osm_id, e.geometry.clone()?)))
                .collect()
        };
        Self {
            surfaces,
            footprints: pick(OsmCategory::Footprint, OsmType::Way),
            pois: pick(OsmCategory::Poi, OsmType::Node),
        }
    }
}

pub fn step1_spatial_match(input: &LinkInput, params: &MatchParams) -> Result<MatchGraph, LinkError> {
    params.validate()?;
    let left: Vec<Geometry> = input.surfaces.iter().map(|(_, g)| g.clone()).collect();
    let right: Vec<Geometry> = input.footprints.iter().map(|(_, g)| g.clone()).collect();
    let m = match_polygons(&left, &right, params.t)?;
    let pairs: Vec<(i64, i64)> =
        m.edges.iter().map(|&(i, j, _)| (input.surfaces[i].0, input.footprints[j].0)).collect();
    let classes = classify_relations(&pairs);
    let mut edges: Vec<MatchEdge> = m
        .edges
        .iter()
        .zip(pairs.iter().zip(classes))
        .map(|(&(_, _, ratio), (&(surface_id, osm_id), class))| MatchEdge { surface_id, osm_id, ratio, class })
        .collect();
    edges.sort_by_key(|e| (e.surface_id, e.osm_id));
    Ok(MatchGraph {
        edges,
        degenerate_surfaces: m.degenerate_left.iter().map(|&i| input.surfaces[i].0).collect(),
        degenerate_footprints: m.degenerate_right.iter().map(|&j| input.footprints[j].0).collect(),
    })
}

/// `(surface, footprint)` adjacency links: the surface has no match, lies
/// within epsilon of a matched surface, and takes that surface's
/// footprints. Adjacent links do not propagate further.
pub fn step2_adjacent(
    input: &LinkInput,
    graph: &MatchGraph,
    params: &MatchParams,
) -> Result<Vec<(i64, i64)>, LinkError> {
    params.validate()?;
    let matched = graph.matched_surfaces();
    let degenerate: BTreeSet<i64> = graph.degenerate_surfaces.iter().copied().collect();
    let mut osm_of: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    for e in &graph.edges {
        osm_of.entry(e.surface_id).or_default().push(e.osm_id);
    }
    let anchors: Vec<usize> = (0..input.surfaces.len()).filter(|&i| matched.contains(&input.surfaces[i].0)).collect();
    let index = SpatialIndex::build(anchors.iter().map(|&i| (i, input.surfaces[i].1.bbox())));
    let mut out = BTreeSet::new();
    for (id, g) in &input.surfaces {
        if matched.contains(id) || degenerate.contains(id) {
            continue;
        }
        for i in index.query(&g.bbox().expand(params.epsilon_adjacent)) {
            let (anchor, ag) = &input.surfaces[i];
            if polygon_distance(g, ag)? <= params.epsilon_adjacent {
                for &o in &osm_of[anchor] {
                    out.insert((*id, o));
                }
            }
        }
    }
    Ok(out.into_iter().collect())
}

/// `(surface, poi)` links mediated by the footprint containing the POI.
pub fn step3_poi_match(
    input: &LinkInput,
    graph: &MatchGraph,
    adjacent: &[(i64, i64)],
) -> Result<Vec<(i64, i64)>, LinkError> {
    let mut surfaces_of: BTreeMap<i64, BTreeSet<i64>> = BTreeMap::new();
    for e in &graph.edges {
        surfaces_of.entry(e.osm_id).or_default().insert(e.surface_id);
    }
    for &(s, o) in adjacent {
        surfaces_of.entry(o).or_default().insert(s);
    }
    let linked: Vec<usize> =
        (0..input.footprints.len()).filter(|&j| surfaces_of.contains_key(&input.footprints[j].0)).collect();
    let index = SpatialIndex::build(linked.iter().map(|&j| (j, input.footprints[j].1.bbox())));
    let mut out = BTreeSet::new();
    for (poi, p) in &input.pois {
        for j in index.query(&p.bbox()) {
            let (fid, fg) = &input.footprints[j];
            if point_in_polygon(p, fg)? {
                for &s in &surfaces_of[fid] {
                    out.insert((s, *poi));
                }
            }
        }
    }
    Ok(out.into_iter().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ReportClass {
    OneToOne,
    OneToN,
    MToOne,
    MToN,
    Adjacent,
    ZeroToOne,
    OneToZero,
}

impl ReportClass {
    pub const ALL: [ReportClass; 7] = [
        ReportClass::OneToOne,
        ReportClass::OneToN,
        ReportClass::MToOne,
        ReportClass::MToN,
        ReportClass::Adjacent,
        ReportClass::ZeroToOne,
        ReportClass::OneToZero,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ReportClass::OneToOne => "1:1",
            ReportClass::OneToN => "1:n",
            ReportClass::MToOne => "m:1",
            ReportClass::MToN => "m:n",
            ReportClass::Adjacent => "adjacent",
            ReportClass::ZeroToOne => "0:1",
            ReportClass::OneToZero => "1:0",
        }
    }

    fn of(class: RelationClass) -> Self {
        match class {
            RelationClass::OneToOne => ReportClass::OneToOne,
            RelationClass::OneToN => ReportClass::OneToN,
            RelationClass::MToOne => ReportClass::MToOne,
            RelationClass::MToN => ReportClass::MToN,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClassCount {
    /// Connected components (matched classes) or single entities.
    pub groups: usize,
    /// Ground surfaces in the class; for 1:0, OSM footprints.
    pub members: usize,
    pub percent: f64,
}

/// Share of each class over ground surfaces plus unmatched footprints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Distribution {
    pub classes: BTreeMap<ReportClass, ClassCount>,
    pub denominator: usize,
}

impl Distribution {
    fn new(counts: BTreeMap<ReportClass, (usize, usize)>) -> Self {
        let denominator: usize = counts.values().map(|c| c.1).sum();
        let classes = counts
            .into_iter()
            .map(|(k, (groups, members))| {
                let percent = if denominator == 0 { 0.0 } else { 100.0 * members as f64 / denominator as f64 };
                (k, ClassCount { groups, members, percent })
            })
            .collect();
        Self { classes, denominator }
    }

    pub fn get(&self, class: ReportClass) -> ClassCount {
        self.classes.get(&class).copied().unwrap_or_default()
    }

    pub fn percent_sum(&self) -> f64 {
        self.classes.values().map(|c| c.percent).sum()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkReport {
    /// After step 1 (no adjacent class).
    pub step1: Distribution,
    /// After steps 2 and 3.
    pub final_distribution: Distribution,
    /// POIs with at least one surface link.
    pub pois_matched: usize,
    pub poi_records: usize,
    pub match_records: usize,
    pub adjacent_records: usize,
    pub degenerate_surfaces: usize,
    pub degenerate_footprints: usize,
    pub params: MatchParams,
}

impl LinkReport {
    /// Final group counts keyed by label plus `poi`.
    pub fn summary(&self) -> BTreeMap<&'static str, usize> {
        let mut m: BTreeMap<&'static str, usize> =
            ReportClass::ALL.iter().map(|&c| (c.label(), self.final_distribution.get(c).groups)).collect();
        m.insert("poi", self.pois_matched);
        m
    }

    /// Tab-separated distribution table followed by `key: value` totals.
    pub fn render(&self) -> String {
        let mut out = String::from("class\tgroups\tmembers\tstep1_percent\tfinal_percent\n");
        for c in ReportClass::ALL {
            let f = self.final_distribution.get(c);
            let s = self.step1.get(c);
            let _ = writeln!(out, "{}\t{}\t{}\t{:.2}\t{:.2}", c.label(), f.groups, f.members, s.percent, f.percent);
        }
        let _ = writeln!(out, "poi_matched: {}", self.pois_matched);
        let _ = writeln!(out, "poi_records: {}", self.poi_records);
        let _ = writeln!(out, "match_records: {}", self.match_records);
        let _ = writeln!(out, "adjacent_records: {}", self.adjacent_records);
        let _ = writeln!(out, "degenerate_surfaces: {}", self.degenerate_surfaces);
        let _ = writeln!(out, "degenerate_footprints: {}", self.degenerate_footprints);
        let _ = writeln!(out, "threshold: {}", self.params.t);
        let _ = writeln!(out, "epsilon_adjacent: {}", self.params.epsilon_adjacent);
        out
    }
}

/// Builds both distributions from the step outputs.
pub fn build_report(
    input: &LinkInput,
    graph: &MatchGraph,
    adjacent: &[(i64, i64)],
    poi: &[(i64, i64)],
    params: MatchParams,
) -> LinkReport {
    // matched classes: one group per connected component
    let mut class_of_surface: BTreeMap<i64, RelationClass> = BTreeMap::new();
    let pairs: Vec<(i64, i64)> = graph.edges.iter().map(|e| (e.surface_id, e.osm_id)).collect();
    for e in &graph.edges {
        class_of_surface.insert(e.surface_id, e.class);
    }
    let mut groups: BTreeMap<ReportClass, usize> = BTreeMap::new();
    for (class, n) in component_classes(&pairs) {
        *groups.entry(ReportClass::of(class)).or_default() += n;
    }
    let matched_fp = graph.matched_footprints();
    let unmatched_fp = input.footprints.iter().filter(|(id, _)| !matched_fp.contains(id)).count();
    let adjacent_surfaces: BTreeSet<i64> = adjacent.iter().map(|a| a.0).collect();

    let mut step1: BTreeMap<ReportClass, (usize, usize)> = BTreeMap::new();
    let mut fin: BTreeMap<ReportClass, (usize, usize)> = BTreeMap::new();
    for c in ReportClass::ALL {
        let g = groups.get(&c).copied().unwrap_or(0);
        if c != ReportClass::Adjacent {
            step1.insert(c, (g, 0));
        }
        fin.insert(c, (g, 0));
    }
    for (id, _) in &input.surfaces {
        let c1 = class_of_surface.get(id).map_or(ReportClass::ZeroToOne, |&c| ReportClass::of(c));
        let cf =
            if c1 == ReportClass::ZeroToOne && adjacent_surfaces.contains(id) { ReportClass::Adjacent } else { c1 };
        step1.get_mut(&c1).expect("class present").1 += 1;
        fin.get_mut(&cf).expect("class present").1 += 1;
    }
    for (m, c) in [(&mut step1, ReportClass::ZeroToOne), (&mut fin, ReportClass::ZeroToOne)] {
        let e = m.get_mut(&c).expect("class present");
        e.0 = e.1;
    }
    let adj = fin.get_mut(&ReportClass::Adjacent).expect("class present");
    adj.0 = adj.1;
    for m in [&mut step1, &mut fin] {
        m.insert(ReportClass::OneToZero, (unmatched_fp, unmatched_fp));
    }
    LinkReport {
        step1: Distribution::new(step1),
        final_distribution: Distribution::new(fin),
        pois_matched: poi.iter().map(|p| p.1).collect::<BTreeSet<_>>().len(),
        poi_records: poi.len(),
        match_records: graph.edges.len(),
        adjacent_records: adjacent.len(),
        degenerate_surfaces: graph.degenerate_surfaces.len(),
        degenerate_footprints: graph.degenerate_footprints.len(),
        params,
    }
}

/// Number of components per relation class.
fn component_classes(pairs: &[(i64, i64)]) -> BTreeMap<RelationClass, usize> {
    // a component is identified by its smallest surface id
    let classes = classify_relations(pairs);
    let mut parent: HashMap<i64, i64> = HashMap::new();
    let mut by_osm: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    for (s, o) in pairs {
        by_osm.entry(*o).or_default().push(*s);
    }
    fn find(p: &mut HashMap<i64, i64>, x: i64) -> i64 {
        let mut r = x;
        while let Some(&q) = p.get(&r) {
            if q == r {
                break;
            }
            r = q;
        }
        p.insert(x, r);
        r
    }
    for (s, _) in pairs {
        parent.entry(*s).or_insert(*s);
    }
    for ss in by_osm.values() {
        for w in ss.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            if a != b {
                parent.insert(a.max(b), a.min(b));
            }
        }
    }
    let mut seen: BTreeMap<i64, RelationClass> = BTreeMap::new();
    for ((s, _), c) in pairs.iter().zip(classes) {
        let root = find(&mut parent, *s);
        seen.insert(root, c);
    }
    let mut out = BTreeMap::new();
    for c in seen.values() {
        *out.entry(*c).or_default() += 1;
    }
    out
}

/// Runs all three steps over the store, replacing its linkage records.
pub fn link_all(store: &mut CityStore, params: &MatchParams) -> Result<LinkReport, LinkError> {
    params.validate()?;
    let input = LinkInput::from_store(store);
    let graph = step1_spatial_match(&input, params)?;
    let adjacent = step2_adjacent(&input, &graph, params)?;
    let poi = step3_poi_match(&input, &graph, &adjacent)?;
    let report = build_report(&input, &graph, &adjacent, &poi, *params);

    let geom_of: HashMap<i64, &Geometry> = input.surfaces.iter().map(|(id, g)| (*id, g)).collect();
    let fp_of: HashMap<i64, &Geometry> = input.footprints.iter().map(|(id, g)| (*id, g)).collect();
    let mut records = Vec::new();
    for e in &graph.edges {
        records.push(LinkageRecord {
            citygml_surface_id: e.surface_id,
            osm_id: e.osm_id,
            osm_type: OsmType::Way,
            ratio: e.ratio,
            kind: LinkKind::Match,
            relation_class: Some(e.class),
        });
    }
    for &(s, o) in &adjacent {
        let ratio = overlap_ratio(geom_of[&s], fp_of[&o])?.unwrap_or(0.0);
        records.push(LinkageRecord {
            citygml_surface_id: s,
            osm_id: o,
            osm_type: OsmType::Way,
            ratio,
            kind: LinkKind::Adjacent,
            relation_class: None,
        });
    }
    for &(s, p) in &poi {
        records.push(LinkageRecord {
            citygml_surface_id: s,
            osm_id: p,
            osm_type: OsmType::Node,
            ratio: 1.0,
            kind: LinkKind::PoiMatch,
            relation_class: None,
        });
    }
    records.sort_by(|a, b| {
        (a.citygml_surface_id, a.kind as u8, a.osm_type as u8, a.osm_id).cmp(&(
            b.citygml_surface_id,
            b.kind as u8,
            b.osm_type as u8,
            b.osm_id,
        ))
    });
    let mut staged = store.clone();
    staged.clear_linkage();
    for r in records {
        staged.insert_linkage(r)?;
    }
    staged.set_meta("linked", "1");
    staged.set_meta("threshold", &params.t.to_string());
    staged.set_meta("epsilon_adjacent", &params.epsilon_adjacent.to_string());
    *store = staged;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use citykg_geometry::{Crs, Polygon};

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Geometry {
        Geometry::polygon(Polygon::rect(x0, y0, x1, y1), Crs::utm32n())
    }

    fn pt(x: f64, y: f64) -> Geometry {
        Geometry::point(x, y, Crs::utm32n())
    }

    #[test]
    fn ratio_arithmetic() {
        // overlap 0.6 between areas 1 and 2
        let a = rect(0.0, 0.0, 1.0, 1.0);
        let b = rect(0.4, 0.0, 2.4, 1.0);
        let r = overlap_ratio(&a, &b).unwrap().unwrap();
        assert!((r - 0.6).abs() < 1e-9, "{r}");
        let c = rect(0.6, 0.0, 2.6, 1.0);
        let (a, c) = ([a], [c]);
        assert!(match_polygons(&a, &c, 0.5).unwrap().edges.is_empty());
        assert_eq!(match_polygons(&a, &c, 0.3).unwrap().edges.len(), 1);
        assert_eq!(match_polygons(&a, &a, 0.5).unwrap().edges[0].2, 1.0);
    }

    #[test]
    fn degenerate_polygons_are_excluded() {
        let flat = rect(0.0, 0.0, 1.0, 0.0);
        let m = match_polygons(&[flat], &[rect(0.0, 0.0, 1.0, 1.0)], 0.5).unwrap();
        assert!(m.edges.is_empty());
        assert_eq!(m.degenerate_left, [0]);
    }

    #[test]
    fn canonical_relation_shapes() {
        use RelationClass::*;
        assert_eq!(classify_relations(&[(1, 10)]), [OneToOne]);
        assert_eq!(classify_relations(&[(1, 10), (2, 10)]), [OneToN, OneToN]);
        assert_eq!(classify_relations(&[(1, 10), (1, 11)]), [MToOne, MToOne]);
        assert_eq!(classify_relations(&[(1, 10), (1, 11), (2, 10), (2, 11)]), [MToN; 4]);
        assert!(classify_relations::<i64, i64>(&[]).is_empty());
    }

    #[test]
    fn params_are_validated() {
        assert!(MatchParams { t: 0.0, epsilon_adjacent: 0.2 }.validate().is_err());
        assert!(MatchParams { t: 1.5, epsilon_adjacent: 0.2 }.validate().is_err());
        assert!(MatchParams { t: 1.0, epsilon_adjacent: -1.0 }.validate().is_err());
        assert!(MatchParams::default().validate().is_ok());
    }

    fn scene(bldg2_gap: f64, bldg1_matched: bool, bldg2_matched: bool) -> LinkInput {
        let mut footprints = vec![];
        if bldg1_matched {
            footprints.push((1, rect(0.0, 0.0, 10.0, 10.0)));
        }
        if bldg2_matched {
            footprints.push((2, rect(10.0 + bldg2_gap, 0.0, 20.0 + bldg2_gap, 10.0)));
        }
        LinkInput {
            surfaces: vec![
                (100, rect(0.0, 0.0, 10.0, 10.0)),
                (200, rect(10.0 + bldg2_gap, 0.0, 20.0 + bldg2_gap, 10.0)),
            ],
            footprints,
            pois: vec![(7, pt(5.0, 5.0))],
        }
    }

    #[test]
    fn adjacency_conditions() {
        let p = MatchParams::default();
        for a in [false, true] {
            for b in [false, true] {
                for c in [false, true] {
                    let input = scene(if b { 0.0 } else { 5.0 }, a, !c);
                    let g = step1_spatial_match(&input, &p).unwrap();
                    let adj: Vec<_> =
                        step2_adjacent(&input, &g, &p).unwrap().into_iter().filter(|l| l.0 == 200).collect();
                    let expected = if a && b && c { vec![(200, 1)] } else { vec![] };
                    assert_eq!(adj, expected, "a={a} b={b} c={c}");
                }
            }
        }
    }

    #[test]
    fn poi_follows_matches_and_adjacency() {
        let p = MatchParams::default();
        let input = scene(0.0, true, false);
        let g = step1_spatial_match(&input, &p).unwrap();
        let adj = step2_adjacent(&input, &g, &p).unwrap();
        let poi = step3_poi_match(&input, &g, &adj).unwrap();
        assert_eq!(poi, [(100, 7), (200, 7)]);
        let r = build_report(&input, &g, &adj, &poi, p);
        assert_eq!(r.summary()["1:1"], 1);
        assert_eq!(r.summary()["adjacent"], 1);
        assert_eq!(r.summary()["poi"], 1);
        assert_eq!(r.step1.get(ReportClass::ZeroToOne).members, 1);
        assert_eq!(r.final_distribution.get(ReportClass::ZeroToOne).members, 0);
        assert!((r.step1.percent_sum() - 100.0).abs() < 0.01);
        assert!((r.final_distribution.percent_sum() - 100.0).abs() < 0.01);
    }

    #[test]
    fn empty_input_gives_zero_percentages() {
        let r = build_report(&LinkInput::default(), &MatchGraph::default(), &[], &[], MatchParams::default());
        assert_eq!(r.final_distribution.percent_sum(), 0.0);
        assert_eq!(r.final_distribution.classes.len(), 7);
    }

    #[test]
    fn component_group_counts() {
        let pairs = [(1, 10), (2, 10), (3, 11), (4, 12), (4, 13), (5, 14)];
        let m = component_classes(&pairs);
        assert_eq!(m[&RelationClass::OneToN], 1);
        assert_eq!(m[&RelationClass::MToOne], 1);
        assert_eq!(m[&RelationClass::OneToOne], 2);
    }
}
