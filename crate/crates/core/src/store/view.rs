//! Relational view of the store: untyped rows, predicate scans and hash
//! equi-joins.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use citykg_geometry::{polygon_area, to_wkt, transform, Crs, Geometry};

use super::{CityStore, Result, StoreError};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Int(i64),
    Float(f64),
    Text(String),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    /// SQL-style comparison: NULL is incomparable, numbers compare
    /// numerically, text lexicographically, and mixed kinds are incomparable.
    pub fn compare(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Text(a), Value::Text(b)) => Some(a.cmp(b)),
            (a, b) => a.as_f64()?.partial_cmp(&b.as_f64()?),
        }
    }

    fn join_key(&self) -> Option<JoinKey> {
        match self {
            Value::Null => None,
            Value::Text(s) => Some(JoinKey::Text(s.clone())),
            v => {
                let f = v.as_f64()?;
                Some(JoinKey::Num(if f == 0.0 { 0 } else { f.to_bits() }))
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => Ok(()),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => f.write_str(&citykg_geometry::format_number(*x)),
            Value::Text(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_owned())
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Null, Into::into)
    }
}

#[derive(Hash, PartialEq, Eq)]
enum JoinKey {
    Num(u64),
    Text(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl FilterOp {
    pub fn symbol(self) -> &'static str {
        match self {
            FilterOp::Eq => "=",
            FilterOp::Ne => "!=",
            FilterOp::Lt => "<",
            FilterOp::Le => "<=",
            FilterOp::Gt => ">",
            FilterOp::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "=" => FilterOp::Eq,
            "!=" | "<>" => FilterOp::Ne,
            "<" => FilterOp::Lt,
            "<=" => FilterOp::Le,
            ">" => FilterOp::Gt,
            ">=" => FilterOp::Ge,
            _ => return None,
        })
    }

    fn holds(self, ord: Ordering) -> bool {
        match self {
            FilterOp::Eq => ord == Ordering::Equal,
            FilterOp::Ne => ord != Ordering::Equal,
            FilterOp::Lt => ord == Ordering::Less,
            FilterOp::Le => ord != Ordering::Greater,
            FilterOp::Gt => ord == Ordering::Greater,
            FilterOp::Ge => ord != Ordering::Less,
        }
    }
}

/// Column predicate `column op value`.
#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    pub column: String,
    pub op: FilterOp,
    pub value: Value,
}

impl Filter {
    pub fn new(column: impl Into<String>, op: FilterOp, value: impl Into<Value>) -> Self {
        Self { column: column.into(), op, value: value.into() }
    }
}

/// A materialized relation: named columns and rows in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl View {
    pub fn column_index(&self, column: &str) -> Result<usize> {
        let mut hits = self.columns.iter().enumerate().filter(|(_, c)| c.as_str() == column);
        match (hits.next(), hits.next()) {
            (Some((i, _)), None) => Ok(i),
            (Some(_), Some(_)) => {
                Err(StoreError::InvalidValue(format!("ambiguous column `{column}` in {}", self.name)))
            }
            _ => Err(StoreError::UnknownColumn { table: self.name.clone(), column: column.to_owned() }),
        }
    }

    /// Prefixes every column with `alias.`.
    pub fn qualified(mut self, alias: &str) -> View {
        for c in &mut self.columns {
            *c = format!("{alias}.{c}");
        }
        self
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Rows satisfying every filter, in order.
pub fn scan(view: &View, filters: &[Filter]) -> Result<View> {
    let idx: Vec<usize> = filters.iter().map(|f| view.column_index(&f.column)).collect::<Result<_>>()?;
    let rows = view
        .rows
        .iter()
        .filter(|row| filters.iter().zip(&idx).all(|(f, &i)| row[i].compare(&f.value).is_some_and(|o| f.op.holds(o))))
        .cloned()
        .collect();
    Ok(View { name: view.name.clone(), columns: view.columns.clone(), rows })
}

/// Inner equi-join; output columns are the left columns followed by the
/// right ones. Rows come out in left order, then right order.
pub fn equi_join(left: &View, right: &View, on: &[(&str, &str)]) -> Result<View> {
    let li: Vec<usize> = on.iter().map(|(l, _)| left.column_index(l)).collect::<Result<_>>()?;
    let ri: Vec<usize> = on.iter().map(|(_, r)| right.column_index(r)).collect::<Result<_>>()?;
    let mut table: HashMap<Vec<JoinKey>, Vec<usize>> = HashMap::new();
    for (n, row) in right.rows.iter().enumerate() {
        if let Some(key) = ri.iter().map(|&i| row[i].join_key()).collect::<Option<Vec<_>>>() {
            table.entry(key).or_default().push(n);
        }
    }
    let mut rows = Vec::new();
    for row in &left.rows {
        let Some(key) = li.iter().map(|&i| row[i].join_key()).collect::<Option<Vec<_>>>() else {
            continue;
        };
        for &n in table.get(&key).map(Vec::as_slice).unwrap_or(&[]) {
            let mut out = row.clone();
            out.extend(right.rows[n].iter().cloned());
            rows.push(out);
        }
    }
    let mut columns = left.columns.clone();
    columns.extend(right.columns.iter().cloned());
    Ok(View { name: format!("{}*{}", left.name, right.name), columns, rows })
}

fn roof_types() -> &'static HashMap<String, String> {
    static TABLE: OnceLock<HashMap<String, String>> = OnceLock::new();
    TABLE.get_or_init(|| {
        include_str!("../../data/roof_types.tsv")
            .lines()
            .skip(1)
            .filter_map(|l| l.split_once('\t'))
            .map(|(c, l)| (c.to_owned(), l.to_owned()))
            .collect()
    })
}

/// English label for an ALKIS roof-type code.
pub fn roof_type_label(code: &str) -> Option<&'static str> {
    roof_types().get(code).map(String::as_str)
}

fn wgs84_wkt(g: &Geometry) -> Value {
    match transform(g, Crs::Wgs84) {
        Ok(w) => Value::Text(to_wkt(&w)),
        Err(_) => Value::Null,
    }
}

fn metric_area(g: &Geometry) -> Value {
    if g.is_polygonal() {
        polygon_area(g).map_or(Value::Null, Value::Float)
    } else {
        Value::Null
    }
}

pub const TABLES: [&str; 8] =
    ["cityobject", "building", "surface_geometry", "thematic_surface", "address", "osm_entity", "osm_class", "linkage"];

fn cols(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| (*s).to_owned()).collect()
}

impl CityStore {
    /// Relational view of a table. Besides the stored columns, geometry
    /// tables expose `wkt` (WGS84) and `area` (m², polygons only), and
    /// `building` exposes `roof_type_label`.
    pub fn view(&self, table: &str) -> Result<View> {
        let (columns, rows): (Vec<String>, Vec<Vec<Value>>) = match table {
            "cityobject" => (
                cols(&["id", "objectclass_id", "gmlid"]),
                self.cityobjects
                    .iter()
                    .map(|r| vec![r.id.into(), r.objectclass_id.into(), r.gmlid.as_str().into()])
                    .collect(),
            ),
            "building" => (
                cols(&[
                    "id",
                    "objectclass_id",
                    "building_root_id",
                    "roof_type",
                    "measured_height",
                    "lod2_solid_id",
                    "roof_type_label",
                ]),
                self.buildings
                    .iter()
                    .map(|r| {
                        vec![
                            r.id.into(),
                            r.objectclass_id.into(),
                            r.building_root_id.into(),
                            r.roof_type.as_deref().into(),
                            r.measured_height.into(),
                            r.lod2_solid_id.into(),
                            r.roof_type.as_deref().and_then(roof_type_label).into(),
                        ]
                    })
                    .collect(),
            ),
            "surface_geometry" => (
                cols(&["id", "root_id", "cityobject_id", "geometry", "wkt", "area"]),
                self.surface_geometries
                    .iter()
                    .map(|r| {
                        vec![
                            r.id.into(),
                            r.root_id.into(),
                            r.cityobject_id.into(),
                            Value::Text(to_wkt(&r.geometry)),
                            wgs84_wkt(&r.geometry),
                            metric_area(&r.geometry),
                        ]
                    })
                    .collect(),
            ),
            "thematic_surface" => (
                cols(&["id", "objectclass_id", "building_id", "surface_kind", "lod2_multi_surface_id"]),
                self.thematic_surfaces
                    .iter()
                    .map(|r| {
                        vec![
                            r.id.into(),
                            r.surface_kind.objectclass_id().into(),
                            r.building_id.into(),
                            r.surface_kind.class_name().into(),
                            r.lod2_multi_surface_id.into(),
                        ]
                    })
                    .collect(),
            ),
            "address" => (
                cols(&["id", "building_id", "thoroughfare", "administrative_area", "label"]),
                self.addresses
                    .iter()
                    .map(|r| {
                        vec![
                            r.id.into(),
                            r.building_id.into(),
                            r.thoroughfare.as_str().into(),
                            r.administrative_area.as_str().into(),
                            r.label.as_str().into(),
                        ]
                    })
                    .collect(),
            ),
            "osm_entity" => (
                cols(&["osm_id", "osm_type", "osm_path", "category", "label", "tags", "geometry", "wkt"]),
                self.osm_entities
                    .iter()
                    .map(|r| {
                        vec![
                            r.osm_id.into(),
                            r.osm_type.code().into(),
                            r.osm_type.path().into(),
                            r.category.name().into(),
                            r.label.as_deref().into(),
                            Value::Text(super::snapshot::tags_to_json(&r.tags)),
                            r.geometry.as_ref().map(|g| Value::Text(to_wkt(g))).unwrap_or(Value::Null),
                            r.geometry.as_ref().map(wgs84_wkt).unwrap_or(Value::Null),
                        ]
                    })
                    .collect(),
            ),
            "osm_class" => (
                cols(&["osm_id", "osm_type", "osm_path", "class"]),
                self.osm_classes
                    .iter()
                    .map(|r| {
                        vec![
                            r.osm_id.into(),
                            r.osm_type.code().into(),
                            r.osm_type.path().into(),
                            r.class_name.as_str().into(),
                        ]
                    })
                    .collect(),
            ),
            "linkage" => (
                cols(&["citygml_surface_id", "osm_type", "osm_path", "osm_id", "ratio", "kind", "relation_class"]),
                self.linkage
                    .iter()
                    .map(|r| {
                        vec![
                            r.citygml_surface_id.into(),
                            r.osm_type.code().into(),
                            r.osm_type.path().into(),
                            r.osm_id.into(),
                            r.ratio.into(),
                            r.kind.name().into(),
                            r.relation_class.map(|c| c.label()).into(),
                        ]
                    })
                    .collect(),
            ),
            other => return Err(StoreError::UnknownTable(other.to_owned())),
        };
        Ok(View { name: table.to_owned(), columns, rows })
    }

    /// Column names of a table view, without materializing rows.
    pub fn view_columns(&self, table: &str) -> Result<Vec<String>> {
        let names: &[&str] = match table {
            "cityobject" => &["id", "objectclass_id", "gmlid"],
            "building" => &[
                "id",
                "objectclass_id",
                "building_root_id",
                "roof_type",
                "measured_height",
                "lod2_solid_id",
                "roof_type_label",
            ],
            "surface_geometry" => &["id", "root_id", "cityobject_id", "geometry", "wkt", "area"],
            "thematic_surface" => &["id", "objectclass_id", "building_id", "surface_kind", "lod2_multi_surface_id"],
            "address" => &["id", "building_id", "thoroughfare", "administrative_area", "label"],
            "osm_entity" => &["osm_id", "osm_type", "osm_path", "category", "label", "tags", "geometry", "wkt"],
            "osm_class" => &["osm_id", "osm_type", "osm_path", "class"],
            "linkage" => &["citygml_surface_id", "osm_type", "osm_path", "osm_id", "ratio", "kind", "relation_class"],
            other => return Err(StoreError::UnknownTable(other.to_owned())),
        };
        Ok(cols(names))
    }
}

#[cfg(test)]
mod tests {
    use super::super::{objectclass, BuildingRow};
    use super::*;

    fn table1() -> CityStore {
        let mut store = CityStore::new();
        for (id, roof, h, solid) in [(10, "1000", 13.363, 117), (54, "3100", 13.99, 315), (248, "1000", 17.362, 1258)] {
            store
                .insert_building(BuildingRow {
                    id,
                    objectclass_id: objectclass::BUILDING,
                    building_root_id: id,
                    roof_type: Some(roof.into()),
                    measured_height: Some(h),
                    lod2_solid_id: Some(solid),
                })
                .unwrap();
        }
        store
    }

    fn ids(v: &View) -> Vec<Value> {
        v.rows.iter().map(|r| r[0].clone()).collect()
    }

    #[test]
    fn scan_by_roof_code() {
        let b = table1().view("building").unwrap();
        let flat = scan(&b, &[Filter::new("roof_type", FilterOp::Eq, "1000")]).unwrap();
        assert_eq!(ids(&flat), vec![Value::Int(10), Value::Int(248)]);
        assert_eq!(scan(&b, &[]).unwrap().len(), 3);
    }

    #[test]
    fn scan_numeric_and_label() {
        let b = table1().view("building").unwrap();
        let tall = scan(&b, &[Filter::new("measured_height", FilterOp::Gt, 14i64)]).unwrap();
        assert_eq!(ids(&tall), vec![Value::Int(248)]);
        let gabled = scan(&b, &[Filter::new("roof_type_label", FilterOp::Eq, "gabled roof")]).unwrap();
        assert_eq!(ids(&gabled), vec![Value::Int(54)]);
    }

    #[test]
    fn unknown_column_and_table() {
        let store = table1();
        let b = store.view("building").unwrap();
        assert!(matches!(scan(&b, &[Filter::new("nope", FilterOp::Eq, 1i64)]), Err(StoreError::UnknownColumn { .. })));
        assert!(matches!(store.view("objectclass"), Err(StoreError::UnknownTable(_))));
    }

    #[test]
    fn self_join_preserves_count_and_empty_join_is_empty() {
        let store = table1();
        let b = store.view("building").unwrap();
        let j = equi_join(&b.clone().qualified("a"), &b.qualified("b"), &[("a.id", "b.id")]).unwrap();
        assert_eq!(j.len(), 3);
        let empty = store.view("address").unwrap();
        let j = equi_join(&store.view("building").unwrap(), &empty, &[("id", "building_id")]).unwrap();
        assert!(j.is_empty());
    }

    #[test]
    fn null_never_matches() {
        assert_eq!(Value::Null.compare(&Value::Null), None);
        assert_eq!(Value::Int(2).compare(&Value::Float(2.0)), Some(Ordering::Equal));
        assert_eq!(Value::Text("2".into()).compare(&Value::Int(2)), None);
    }

    #[test]
    fn roof_labels() {
        assert_eq!(roof_type_label("1000"), Some("flat roof"));
        assert_eq!(roof_type_label("3100"), Some("gabled roof"));
        assert_eq!(roof_type_label("0"), None);
    }
}
