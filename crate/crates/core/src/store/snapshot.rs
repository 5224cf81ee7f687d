//! TSV snapshot directory: one file per table plus `meta.tsv`.
//!
//! Fields are tab-separated with a header row. Tabs, newlines, carriage
//! returns and backslashes inside values are backslash-escaped, and `\N`
//! marks NULL. Floats use the shortest round-trip representation, and
//! geometries are stored as WKT in the store CRS, so a load/save cycle
//! reproduces the files byte for byte.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use citykg_geometry::{format_number, parse_wkt, to_wkt, Crs};

use super::*;

pub const SNAPSHOT_FILES: [&str; 9] = [
    "meta.tsv",
    "cityobject.tsv",
    "building.tsv",
    "surface_geometry.tsv",
    "thematic_surface.tsv",
    "address.tsv",
    "osm_entity.tsv",
    "osm_class.tsv",
    "linkage.tsv",
];

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("{file}:{line}: {source}")]
    Store { file: String, line: usize, source: StoreError },
}

const NULL: &str = "\\N";

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next()? {
            '\\' => out.push('\\'),
            't' => out.push('\t'),
            'n' => out.push('\n'),
            'r' => out.push('\r'),
            _ => return None,
        }
    }
    Some(out)
}

pub(crate) fn tags_to_json(tags: &BTreeMap<String, String>) -> String {
    serde_json::to_string(tags).expect("string map serializes")
}

struct Writer {
    out: String,
}

impl Writer {
    fn new(header: &[&str]) -> Self {
        Self { out: header.join("\t") + "\n" }
    }

    fn row(&mut self, fields: Vec<Option<String>>) {
        let line: Vec<String> = fields.into_iter().map(|f| f.map_or_else(|| NULL.to_owned(), |v| escape(&v))).collect();
        self.out.push_str(&line.join("\t"));
        self.out.push('\n');
    }
}

fn int(v: i64) -> Option<String> {
    Some(v.to_string())
}

fn float(v: f64) -> Option<String> {
    Some(format_number(v))
}

fn text(v: &str) -> Option<String> {
    Some(v.to_owned())
}

impl CityStore {
    /// Renders every snapshot file as (file name, contents).
    pub fn snapshot_files(&self) -> Vec<(&'static str, String)> {
        let mut meta = Writer::new(&["key", "value"]);
        if let Some(crs) = self.crs {
            meta.row(vec![text("crs"), Some(crs.epsg().to_string())]);
        }
        for (k, v) in &self.meta {
            meta.row(vec![text(k), text(v)]);
        }

        let mut co = Writer::new(&["id", "objectclass_id", "gmlid"]);
        for r in &self.cityobjects {
            co.row(vec![int(r.id), int(r.objectclass_id), text(&r.gmlid)]);
        }
        let mut b =
            Writer::new(&["id", "objectclass_id", "building_root_id", "roof_type", "measured_height", "lod2_solid_id"]);
        for r in &self.buildings {
            b.row(vec![
                int(r.id),
                int(r.objectclass_id),
                int(r.building_root_id),
                r.roof_type.clone(),
                r.measured_height.and_then(float),
                r.lod2_solid_id.and_then(int),
            ]);
        }
        let mut sg = Writer::new(&["id", "root_id", "cityobject_id", "geometry"]);
        for r in &self.surface_geometries {
            sg.row(vec![int(r.id), int(r.root_id), int(r.cityobject_id), Some(to_wkt(&r.geometry))]);
        }
        let mut ts = Writer::new(&["id", "building_id", "surface_kind", "lod2_multi_surface_id"]);
        for r in &self.thematic_surfaces {
            ts.row(vec![
                int(r.id),
                int(r.building_id),
                text(r.surface_kind.class_name()),
                int(r.lod2_multi_surface_id),
            ]);
        }
        let mut ad = Writer::new(&["id", "building_id", "thoroughfare", "administrative_area", "label"]);
        for r in &self.addresses {
            ad.row(vec![
                int(r.id),
                int(r.building_id),
                text(&r.thoroughfare),
                text(&r.administrative_area),
                text(&r.label),
            ]);
        }
        let mut oe = Writer::new(&["osm_id", "osm_type", "category", "label", "tags", "geometry"]);
        for r in &self.osm_entities {
            oe.row(vec![
                int(r.osm_id),
                text(r.osm_type.code()),
                text(r.category.name()),
                r.label.clone(),
                Some(tags_to_json(&r.tags)),
                r.geometry.as_ref().map(to_wkt),
            ]);
        }
        let mut oc = Writer::new(&["osm_id", "osm_type", "class"]);
        for r in &self.osm_classes {
            oc.row(vec![int(r.osm_id), text(r.osm_type.code()), text(&r.class_name)]);
        }
        let mut lk = Writer::new(&["citygml_surface_id", "osm_type", "osm_id", "ratio", "kind", "relation_class"]);
        for r in &self.linkage {
            lk.row(vec![
                int(r.citygml_surface_id),
                text(r.osm_type.code()),
                int(r.osm_id),
                float(r.ratio),
                text(r.kind.name()),
                r.relation_class.map(|c| c.label().to_owned()),
            ]);
        }
        let bodies = [meta, co, b, sg, ts, ad, oe, oc, lk];
        SNAPSHOT_FILES.iter().copied().zip(bodies.into_iter().map(|w| w.out)).collect()
    }

    /// The linkage table alone, in the snapshot's TSV format.
    pub fn linkage_tsv(&self) -> String {
        self.snapshot_files().into_iter().find(|(n, _)| *n == "linkage.tsv").map(|(_, s)| s).unwrap_or_default()
    }

    pub fn save_snapshot(&self, dir: &Path) -> std::result::Result<(), SnapshotError> {
        let io_err = |path: PathBuf| move |source| SnapshotError::Io { path, source };
        fs::create_dir_all(dir).map_err(io_err(dir.to_path_buf()))?;
        for (name, body) in self.snapshot_files() {
            let path = dir.join(name);
            fs::write(&path, body).map_err(io_err(path.clone()))?;
        }
        Ok(())
    }

    pub fn snapshot_exists(dir: &Path) -> bool {
        dir.join("meta.tsv").is_file()
    }

    pub fn load_snapshot(dir: &Path) -> std::result::Result<CityStore, SnapshotError> {
        let mut files = BTreeMap::new();
        for name in SNAPSHOT_FILES {
            let path = dir.join(name);
            let body = fs::read_to_string(&path).map_err(|source| SnapshotError::Io { path, source })?;
            files.insert(name, body);
        }
        CityStore::from_snapshot_files(|name| files.get(name).map(String::as_str))
    }

    /// Rebuilds a store from snapshot file contents.
    pub fn from_snapshot_files<'a>(
        get: impl Fn(&str) -> Option<&'a str>,
    ) -> std::result::Result<CityStore, SnapshotError> {
        let mut store = CityStore::new();
        for name in SNAPSHOT_FILES {
            let body = get(name).unwrap_or("");
            let mut lines = body.lines().enumerate();
            lines.next();
            for (n, line) in lines {
                let line_no = n + 1;
                let perr = |message: String| SnapshotError::Parse { file: name.to_owned(), line: line_no, message };
                let fields: Vec<Option<String>> = line
                    .split('\t')
                    .map(|f| if f == NULL { Ok(None) } else { unescape(f).map(Some).ok_or(()) })
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| perr("bad escape sequence".into()))?;
                let row = Row { fields };
                store.load_row(name, &row).map_err(|e| match e {
                    LoadError::Parse(message) => perr(message),
                    LoadError::Store(source) => SnapshotError::Store { file: name.to_owned(), line: line_no, source },
                })?;
            }
        }
        Ok(store)
    }

    fn load_row(&mut self, file: &str, r: &Row) -> std::result::Result<(), LoadError> {
        match file {
            "meta.tsv" => {
                let (k, v) = (r.text(0)?, r.text(1)?);
                if k == "crs" {
                    let code: u32 = v.parse().map_err(|_| LoadError::Parse(format!("bad EPSG code {v}")))?;
                    let crs =
                        Crs::from_epsg(code).ok_or_else(|| LoadError::Parse(format!("unsupported EPSG code {v}")))?;
                    self.set_crs(crs)?;
                } else {
                    self.meta.insert(k, v);
                }
            }
            "cityobject.tsv" => {
                r.arity(3)?;
                self.insert_cityobject(CityObjectRow { id: r.int(0)?, objectclass_id: r.int(1)?, gmlid: r.text(2)? })?;
            }
            "building.tsv" => {
                r.arity(6)?;
                self.insert_building(BuildingRow {
                    id: r.int(0)?,
                    objectclass_id: r.int(1)?,
                    building_root_id: r.int(2)?,
                    roof_type: r.opt(3).map(str::to_owned),
                    measured_height: r.opt(4).map(|_| r.float(4)).transpose()?,
                    lod2_solid_id: r.opt(5).map(|_| r.int(5)).transpose()?,
                })?;
            }
            "surface_geometry.tsv" => {
                r.arity(4)?;
                let geometry = r.geometry(3, self.crs)?;
                self.insert_surface_geometry(SurfaceGeometryRow {
                    id: r.int(0)?,
                    root_id: r.int(1)?,
                    cityobject_id: r.int(2)?,
                    geometry,
                })?;
            }
            "thematic_surface.tsv" => {
                r.arity(4)?;
                let kind = r.text(2)?;
                self.insert_thematic_surface(ThematicSurfaceRow {
                    id: r.int(0)?,
                    building_id: r.int(1)?,
                    surface_kind: SurfaceKind::from_class_name(&kind)
                        .ok_or_else(|| LoadError::Parse(format!("unknown surface kind {kind}")))?,
                    lod2_multi_surface_id: r.int(3)?,
                })?;
            }
            "address.tsv" => {
                r.arity(5)?;
                self.insert_address(AddressRow {
                    id: r.int(0)?,
                    building_id: r.int(1)?,
                    thoroughfare: r.text(2)?,
                    administrative_area: r.text(3)?,
                    label: r.text(4)?,
                })?;
            }
            "osm_entity.tsv" => {
                r.arity(6)?;
                let category = r.text(2)?;
                let tags: BTreeMap<String, String> =
                    serde_json::from_str(&r.text(4)?).map_err(|e| LoadError::Parse(format!("bad tags column: {e}")))?;
                self.insert_osm_entity(OsmEntityRow {
                    osm_id: r.int(0)?,
                    osm_type: r.osm_type(1)?,
                    category: OsmCategory::from_name(&category)
                        .ok_or_else(|| LoadError::Parse(format!("unknown category {category}")))?,
                    label: r.opt(3).map(str::to_owned),
                    tags,
                    geometry: r.opt(5).map(|_| r.geometry(5, self.crs)).transpose()?,
                })?;
            }
            "osm_class.tsv" => {
                r.arity(3)?;
                self.insert_osm_class(OsmClassRow {
                    osm_id: r.int(0)?,
                    osm_type: r.osm_type(1)?,
                    class_name: r.text(2)?,
                })?;
            }
            "linkage.tsv" => {
                r.arity(6)?;
                let kind = r.text(4)?;
                self.insert_linkage(LinkageRecord {
                    citygml_surface_id: r.int(0)?,
                    osm_type: r.osm_type(1)?,
                    osm_id: r.int(2)?,
                    ratio: r.float(3)?,
                    kind: LinkKind::from_name(&kind).ok_or_else(|| LoadError::Parse(format!("unknown kind {kind}")))?,
                    relation_class: r
                        .opt(5)
                        .map(|c| {
                            RelationClass::from_label(c).ok_or_else(|| LoadError::Parse(format!("unknown class {c}")))
                        })
                        .transpose()?,
                })?;
            }
            _ => unreachable!("file list is fixed"),
        }
        Ok(())
    }
}

enum LoadError {
    Parse(String),
    Store(StoreError),
}

impl From<StoreError> for LoadError {
    fn from(e: StoreError) -> Self {
        LoadError::Store(e)
    }
}

struct Row {
    fields: Vec<Option<String>>,
}

impl Row {
    fn arity(&self, n: usize) -> std::result::Result<(), LoadError> {
        if self.fields.len() == n {
            Ok(())
        } else {
            Err(LoadError::Parse(format!("expected {n} fields, found {}", self.fields.len())))
        }
    }

    fn opt(&self, i: usize) -> Option<&str> {
        self.fields.get(i).and_then(|f| f.as_deref())
    }

    fn text(&self, i: usize) -> std::result::Result<String, LoadError> {
        self.opt(i).map(str::to_owned).ok_or_else(|| LoadError::Parse(format!("field {} is missing or NULL", i + 1)))
    }

    fn int(&self, i: usize) -> std::result::Result<i64, LoadError> {
        let t = self.text(i)?;
        t.parse().map_err(|_| LoadError::Parse(format!("field {}: `{t}` is not an integer", i + 1)))
    }

    fn float(&self, i: usize) -> std::result::Result<f64, LoadError> {
        let t = self.text(i)?;
        t.parse().map_err(|_| LoadError::Parse(format!("field {}: `{t}` is not a number", i + 1)))
    }

    fn osm_type(&self, i: usize) -> std::result::Result<OsmType, LoadError> {
        let t = self.text(i)?;
        OsmType::from_code(&t).ok_or_else(|| LoadError::Parse(format!("unknown osm_type {t}")))
    }

    fn geometry(&self, i: usize, crs: Option<Crs>) -> std::result::Result<citykg_geometry::Geometry, LoadError> {
        let crs = crs.ok_or_else(|| LoadError::Parse("geometry before the store CRS is known".into()))?;
        parse_wkt(&self.text(i)?, crs).map_err(|e| LoadError::Parse(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escaping_round_trips() {
        for s in ["plain", "tab\there", "back\\slash", "new\nline", "", "\\N"] {
            assert_eq!(unescape(&escape(s)).as_deref(), Some(s));
        }
        assert_eq!(unescape("bad\\x"), None);
    }

    #[test]
    fn empty_store_round_trip() {
        let store = CityStore::new();
        let files = store.snapshot_files();
        let back =
            CityStore::from_snapshot_files(|n| files.iter().find(|(f, _)| *f == n).map(|(_, b)| b.as_str())).unwrap();
        assert_eq!(back.snapshot_files(), files);
    }

    #[test]
    fn rows_survive_round_trip() {
        let mut store = CityStore::new();
        store.set_crs(Crs::utm32n()).unwrap();
        store.set_meta("citygml_imported", "1");
        store.insert_cityobject(CityObjectRow { id: 1, objectclass_id: 26, gmlid: "b\t1".into() }).unwrap();
        store
            .insert_building(BuildingRow {
                id: 1,
                objectclass_id: 26,
                building_root_id: 1,
                roof_type: None,
                measured_height: Some(0.1 + 0.2),
                lod2_solid_id: None,
            })
            .unwrap();
        let mut tags = BTreeMap::new();
        tags.insert("name".to_owned(), "Caf\u{e9} \"X\"".to_owned());
        store
            .insert_osm_entity(OsmEntityRow {
                osm_id: 7,
                osm_type: OsmType::Node,
                category: OsmCategory::Poi,
                geometry: Some(citykg_geometry::Geometry::point(1.5, -2.0, Crs::utm32n())),
                label: Some("Caf\u{e9}".into()),
                tags,
            })
            .unwrap();
        let files = store.snapshot_files();
        let back =
            CityStore::from_snapshot_files(|n| files.iter().find(|(f, _)| *f == n).map(|(_, b)| b.as_str())).unwrap();
        assert_eq!(back.buildings(), store.buildings());
        assert_eq!(back.osm_entities(), store.osm_entities());
        assert_eq!(back.meta("citygml_imported"), Some("1"));
        assert_eq!(back.snapshot_files(), files);
    }

    #[test]
    fn reports_line_of_bad_row() {
        let err = CityStore::from_snapshot_files(|n| match n {
            "cityobject.tsv" => Some("id\tobjectclass_id\tgmlid\n1\t26\ta\nx\t26\tb\n"),
            _ => None,
        })
        .unwrap_err();
        assert!(matches!(err, SnapshotError::Parse { line: 3, .. }), "{err}");
    }
}
