//! OSM XML into store rows: building footprints, POIs, highways, and
//! LinkedGeoData-style class names derived from tags.

use std::collections::{BTreeMap, HashMap};

use citykg_geometry::{lonlat_to_utm, single_polygon_area, Coord, Crs, Geometry, Polygon, Shape};
use roxmltree::{Document, Node};

use crate::citygml::IngestError;
use crate::store::{CityStore, OsmCategory, OsmClassRow, OsmEntityRow, OsmType};

const DEFAULT_TAG_TABLE: &str = include_str!("../data/tag_classes.tsv");

#[derive(Debug, Clone, PartialEq)]
pub struct TagRule {
    pub key: String,
    /// `None` matches any value.
    pub value: Option<String>,
    pub class: String,
}

/// Ordered tag rules. For each tag the first matching rule wins; a tag map
/// yields the winning classes of all its tags, in rule order.
#[derive(Debug, Clone, PartialEq)]
pub struct TagTable {
    rules: Vec<TagRule>,
}

impl Default for TagTable {
    fn default() -> Self {
        Self::parse(DEFAULT_TAG_TABLE).expect("bundled tag table is valid")
    }
}

impl TagTable {
    /// TSV with a `key value class` header; `#` lines are comments and a
    /// value of `*` matches anything.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut rules = Vec::new();
        let mut header = false;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(format!("line {}: expected 3 tab-separated columns", i + 1));
            }
            if !header {
                header = true;
                if cols == ["key", "value", "class"] {
                    continue;
                }
            }
            let value = if cols[1] == "*" { None } else { Some(cols[1].to_owned()) };
            rules.push(TagRule { key: cols[0].to_owned(), value, class: cols[2].to_owned() });
        }
        Ok(Self { rules })
    }

    pub fn rules(&self) -> &[TagRule] {
        &self.rules
    }

    pub fn classify(&self, tags: &BTreeMap<String, String>) -> Vec<String> {
        let mut winners: Vec<usize> = tags
            .iter()
            .filter_map(|(k, v)| {
                self.rules.iter().position(|r| &r.key == k && r.value.as_ref().is_none_or(|rv| rv == v))
            })
            .collect();
        winners.sort_unstable();
        let mut out: Vec<String> = Vec::new();
        for i in winners {
            let class = &self.rules[i].class;
            if !out.contains(class) {
                out.push(class.clone());
            }
        }
        out
    }
}

/// Classification with the bundled table.
pub fn classify_tags(tags: &BTreeMap<String, String>) -> Vec<String> {
    thread_local! {
        static TABLE: TagTable = TagTable::default();
    }
    TABLE.with(|t| t.classify(tags))
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct OsmReport {
    pub nodes: usize,
    pub ways: usize,
    pub relations: usize,
    pub footprints: usize,
    pub pois: usize,
    pub highways: usize,
    pub others: usize,
    pub skipped_dangling: usize,
    pub skipped_unclosed: usize,
    pub skipped_degenerate: usize,
    pub warnings: Vec<String>,
}

impl OsmReport {
    pub fn lines(&self) -> Vec<String> {
        vec![
            format!("nodes: {}", self.nodes),
            format!("ways: {}", self.ways),
            format!("relations: {}", self.relations),
            format!("footprints: {}", self.footprints),
            format!("pois: {}", self.pois),
            format!("highways: {}", self.highways),
            format!("others: {}", self.others),
            format!("skipped_dangling: {}", self.skipped_dangling),
            format!("skipped_unclosed: {}", self.skipped_unclosed),
            format!("skipped_degenerate: {}", self.skipped_degenerate),
        ]
    }
}

fn tags_of(node: Node<'_, '_>) -> BTreeMap<String, String> {
    node.children()
        .filter(|c| c.has_tag_name("tag"))
        .filter_map(|t| Some((t.attribute("k")?.to_owned(), t.attribute("v")?.to_owned())))
        .collect()
}

fn content_err<T>(doc: &Document<'_>, node: Node<'_, '_>, message: String) -> Result<T, IngestError> {
    let pos = doc.text_pos_at(node.range().start);
    Err(IngestError::Content { line: pos.row, col: pos.col, message })
}

fn parse_attr<T: std::str::FromStr>(doc: &Document<'_>, node: Node<'_, '_>, name: &str) -> Result<T, IngestError> {
    match node.attribute(name).map(str::parse) {
        Some(Ok(v)) => Ok(v),
        _ => content_err(doc, node, format!("<{}> has missing or invalid `{name}`", node.tag_name().name())),
    }
}

fn is_building(tags: &BTreeMap<String, String>) -> bool {
    tags.get("building").is_some_and(|v| v != "no")
}

/// Parses one OSM XML document into `store` with the bundled tag table.
pub fn parse_osm(store: &mut CityStore, text: &str) -> Result<OsmReport, IngestError> {
    parse_osm_with(store, text, &TagTable::default())
}

/// Parses with a custom tag table. On error the store is left unchanged.
pub fn parse_osm_with(store: &mut CityStore, text: &str, table: &TagTable) -> Result<OsmReport, IngestError> {
    let doc = Document::parse(text).map_err(|e| {
        let pos = e.pos();
        IngestError::Xml { line: pos.row, col: pos.col, message: e.to_string() }
    })?;
    let root = doc.root_element();
    if !root.has_tag_name("osm") {
        return Err(IngestError::UnrecognizedDocument(root.tag_name().name().to_owned()));
    }
    let mut report = OsmReport::default();

    // pass 1: node table
    let mut nodes: HashMap<i64, (f64, f64)> = HashMap::new();
    let mut node_elems = Vec::new();
    for n in root.children().filter(|c| c.has_tag_name("node")) {
        let id: i64 = parse_attr(&doc, n, "id")?;
        let lat: f64 = parse_attr(&doc, n, "lat")?;
        let lon: f64 = parse_attr(&doc, n, "lon")?;
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return content_err(&doc, n, format!("node {id} has out-of-range coordinates"));
        }
        nodes.insert(id, (lon, lat));
        node_elems.push((id, n));
        report.nodes += 1;
    }

    let crs = match store.crs() {
        Some(c) => c,
        None if nodes.is_empty() => Crs::utm32n(),
        None => {
            let n = nodes.len() as f64;
            let (sx, sy) = nodes.values().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
            Crs::utm_for_lonlat(sx / n, sy / n)
        }
    };
    let Crs::Utm { zone, hemisphere } = crs else { unreachable!("store CRS is projected") };
    let project = |doc: &Document<'_>, elem: Node<'_, '_>, lon: f64, lat: f64| -> Result<Coord, IngestError> {
        match lonlat_to_utm(lon, lat, zone, hemisphere) {
            Ok((e, n)) => Ok(Coord::xy(e, n)),
            Err(err) => content_err(doc, elem, err.to_string()),
        }
    };

    let mut staged = store.clone();
    if staged.crs().is_none() {
        staged.set_crs(crs)?;
    }
    let mut entities: Vec<(OsmEntityRow, Vec<String>)> = Vec::new();

    for (id, n) in node_elems {
        let tags = tags_of(n);
        if tags.is_empty() {
            continue;
        }
        let (lon, lat) = nodes[&id];
        let c = project(&doc, n, lon, lat)?;
        let classes = table.classify(&tags);
        entities.push((
            OsmEntityRow {
                osm_id: id,
                osm_type: OsmType::Node,
                category: OsmCategory::Poi,
                geometry: Some(Geometry::point(c.x, c.y, crs)),
                label: tags.get("name").cloned(),
                tags,
            },
            classes,
        ));
        report.pois += 1;
    }

    // pass 2: ways against the complete node table
    'ways: for w in root.children().filter(|c| c.has_tag_name("way")) {
        report.ways += 1;
        let id: i64 = parse_attr(&doc, w, "id")?;
        let tags = tags_of(w);
        if tags.is_empty() {
            continue;
        }
        let mut coords = Vec::new();
        for nd in w.children().filter(|c| c.has_tag_name("nd")) {
            let r: i64 = parse_attr(&doc, nd, "ref")?;
            match nodes.get(&r) {
                Some(&(lon, lat)) => coords.push(project(&doc, nd, lon, lat)?),
                None => {
                    report.skipped_dangling += 1;
                    report.warnings.push(format!("way {id} skipped: node {r} not found"));
                    continue 'ways;
                }
            }
        }
        let refs: Vec<&str> =
            w.children().filter(|c| c.has_tag_name("nd")).filter_map(|c| c.attribute("ref")).collect();
        let closed = refs.len() >= 4 && refs.first() == refs.last();
        let (category, geometry) = if is_building(&tags) {
            if !closed {
                report.skipped_unclosed += 1;
                report.warnings.push(format!("way {id} skipped: building way is not closed"));
                continue;
            }
            let Ok(p) = Polygon::new(coords, Vec::new()) else {
                report.skipped_degenerate += 1;
                continue;
            };
            let p = p.normalized();
            if single_polygon_area(&p) <= 0.0 {
                report.skipped_degenerate += 1;
                report.warnings.push(format!("way {id} skipped: zero-area footprint"));
                continue;
            }
            report.footprints += 1;
            (OsmCategory::Footprint, Geometry::polygon(p, crs))
        } else if tags.contains_key("highway") {
            if coords.len() < 2 {
                report.skipped_degenerate += 1;
                continue;
            }
            report.highways += 1;
            (OsmCategory::Highway, Geometry::new(Shape::LineString(coords), crs))
        } else if coords.len() >= 2 {
            report.others += 1;
            let shape = match Polygon::new(coords.clone(), Vec::new()) {
                Ok(p) if closed => Shape::Polygon(p.normalized()),
                _ => Shape::LineString(coords),
            };
            (OsmCategory::Other, Geometry::new(shape, crs))
        } else {
            report.skipped_degenerate += 1;
            continue;
        };
        let classes = table.classify(&tags);
        entities.push((
            OsmEntityRow {
                osm_id: id,
                osm_type: OsmType::Way,
                category,
                geometry: Some(geometry),
                label: tags.get("name").cloned(),
                tags,
            },
            classes,
        ));
    }

    for r in root.children().filter(|c| c.has_tag_name("relation")) {
        report.relations += 1;
        let id: i64 = parse_attr(&doc, r, "id")?;
        let tags = tags_of(r);
        let classes = table.classify(&tags);
        entities.push((
            OsmEntityRow {
                osm_id: id,
                osm_type: OsmType::Relation,
                category: OsmCategory::Other,
                geometry: None,
                label: tags.get("name").cloned(),
                tags,
            },
            classes,
        ));
    }

    for (row, classes) in entities {
        let (osm_type, osm_id) = staged.insert_osm_entity(row)?;
        for class_name in classes {
            staged.insert_osm_class(OsmClassRow { osm_id, osm_type, class_name })?;
        }
    }
    staged.set_meta("osm_imported", "1");
    *store = staged;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tags(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify_tags(&tags(&[("building", "residential")])), ["BuildingResidential"]);
        assert!(classify_tags(&BTreeMap::new()).is_empty());
        assert_eq!(classify_tags(&tags(&[("building", "yes"), ("tourism", "hotel")])), ["Building", "Hotel"]);
        assert_eq!(classify_tags(&tags(&[("highway", "secondary")])), ["SecondaryHighway"]);
        assert_eq!(classify_tags(&tags(&[("tourism", "hotel")])), ["Hotel"]);
        assert_eq!(classify_tags(&tags(&[("building", "hotel"), ("tourism", "hotel")])), ["Hotel"]);
        assert_eq!(classify_tags(&tags(&[("shop", "bakery")])), ["Shop"]);
    }

    #[test]
    fn custom_table_first_rule_wins() {
        let t = TagTable::parse("key\tvalue\tclass\nshop\tbakery\tBakery\nshop\t*\tShop\n").unwrap();
        assert_eq!(t.classify(&tags(&[("shop", "bakery")])), ["Bakery"]);
        assert_eq!(t.classify(&tags(&[("shop", "kiosk")])), ["Shop"]);
        assert!(TagTable::parse("a\tb\n").is_err());
    }

    const OSM: &str = r#"<osm version="0.6">
<node id="1" lat="48.137" lon="11.575"/>
<node id="2" lat="48.137" lon="11.5752"/>
<node id="3" lat="48.1372" lon="11.5752"/>
<node id="4" lat="48.1372" lon="11.575"><tag k="tourism" v="hotel"/><tag k="name" v="Hotel Post"/></node>
<way id="10"><nd ref="1"/><nd ref="2"/><nd ref="3"/><nd ref="4"/><nd ref="1"/><tag k="building" v="yes"/></way>
<way id="11"><nd ref="1"/><nd ref="99"/><nd ref="3"/><nd ref="1"/><tag k="building" v="yes"/></way>
<way id="12"><nd ref="1"/><nd ref="2"/><nd ref="3"/><tag k="building" v="house"/></way>
<way id="13"><nd ref="1"/><nd ref="2"/><tag k="highway" v="secondary"/></way>
<relation id="20"><member type="way" ref="10" role="outer"/><tag k="type" v="multipolygon"/></relation>
</osm>"#;

    #[test]
    fn parses_entities_and_skips_bad_ways() {
        let mut store = CityStore::new();
        let r = parse_osm(&mut store, OSM).unwrap();
        assert_eq!((r.nodes, r.ways, r.relations), (4, 4, 1));
        assert_eq!((r.footprints, r.pois, r.highways), (1, 1, 1));
        assert_eq!((r.skipped_dangling, r.skipped_unclosed), (1, 1));
        assert_eq!(store.crs(), Some(Crs::utm32n()));
        let poi = store.osm_entity(OsmType::Node, 4).unwrap();
        assert_eq!(poi.label.as_deref(), Some("Hotel Post"));
        let classes: Vec<_> = store.osm_classes().iter().map(|c| (c.osm_id, c.class_name.as_str())).collect();
        assert_eq!(classes, [(4, "Hotel"), (10, "Building"), (13, "SecondaryHighway")]);
        assert!(store.osm_entity(OsmType::Relation, 20).unwrap().geometry.is_none());
        let fp = store.osm_entity(OsmType::Way, 10).unwrap().geometry.clone().unwrap();
        assert!(citykg_geometry::polygon_area(&fp).unwrap() > 0.0);
        assert!(store.check_integrity().is_empty());
    }

    #[test]
    fn rejects_other_documents() {
        let mut store = CityStore::new();
        assert!(matches!(parse_osm(&mut store, "<gpx/>"), Err(IngestError::UnrecognizedDocument(_))));
        assert!(matches!(parse_osm(&mut store, "<osm><node id=\"x\"/></osm>"), Err(IngestError::Content { .. })));
    }
}
