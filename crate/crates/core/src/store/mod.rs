//! In-memory tabular store modelled on a reduced 3DCityDB schema, plus the
//! OSM tables and the linkage table.
//!
//! Tables are typed row vectors. The mapping engine sees them through
//! [`View`]s, which expose every table (and a few computed columns) as
//! rows of [`Value`]s.

mod snapshot;
mod view;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use citykg_geometry::{Crs, Geometry};

pub use snapshot::{SnapshotError, SNAPSHOT_FILES};
pub use view::{equi_join, roof_type_label, scan, Filter, FilterOp, Value, View, TABLES};

/// 3DCityDB objectclass ids used by the ingest.
pub mod objectclass {
    pub const BUILDING: i64 = 26;
    pub const ROOF_SURFACE: i64 = 33;
    pub const WALL_SURFACE: i64 = 34;
    pub const GROUND_SURFACE: i64 = 35;
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StoreError {
    #[error("duplicate key {key} in table {table}")]
    DuplicateKey { table: &'static str, key: String },
    #[error("{table}.{column} = {value} does not resolve")]
    DanglingReference { table: &'static str, column: &'static str, value: String },
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown column `{column}` in {table}")]
    UnknownColumn { table: String, column: String },
    #[error("geometry in {0} is not in the store CRS")]
    CrsMismatch(&'static str),
    #[error("invalid value: {0}")]
    InvalidValue(String),
}

pub type Result<T> = std::result::Result<T, StoreError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SurfaceKind {
    Ground,
    Roof,
    Wall,
}

impl SurfaceKind {
    /// CityGML element / class local name.
    pub fn class_name(self) -> &'static str {
        match self {
            SurfaceKind::Ground => "GroundSurface",
            SurfaceKind::Roof => "RoofSurface",
            SurfaceKind::Wall => "WallSurface",
        }
    }

    pub fn from_class_name(name: &str) -> Option<Self> {
        match name {
            "GroundSurface" => Some(SurfaceKind::Ground),
            "RoofSurface" => Some(SurfaceKind::Roof),
            "WallSurface" => Some(SurfaceKind::Wall),
            _ => None,
        }
    }

    pub fn objectclass_id(self) -> i64 {
        match self {
            SurfaceKind::Ground => objectclass::GROUND_SURFACE,
            SurfaceKind::Roof => objectclass::ROOF_SURFACE,
            SurfaceKind::Wall => objectclass::WALL_SURFACE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OsmType {
    Node,
    Way,
    Relation,
}

impl OsmType {
    pub fn code(self) -> &'static str {
        match self {
            OsmType::Node => "N",
            OsmType::Way => "W",
            OsmType::Relation => "R",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "N" => Some(OsmType::Node),
            "W" => Some(OsmType::Way),
            "R" => Some(OsmType::Relation),
            _ => None,
        }
    }

    /// Path segment used in LinkedGeoData-style IRIs.
    pub fn path(self) -> &'static str {
        match self {
            OsmType::Node => "node",
            OsmType::Way => "way",
            OsmType::Relation => "relation",
        }
    }
}

/// Role of an OSM entity in linking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OsmCategory {
    Footprint,
    Poi,
    Highway,
    Other,
}

impl OsmCategory {
    pub fn name(self) -> &'static str {
        match self {
            OsmCategory::Footprint => "footprint",
            OsmCategory::Poi => "poi",
            OsmCategory::Highway => "highway",
            OsmCategory::Other => "other",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "footprint" => Some(OsmCategory::Footprint),
            "poi" => Some(OsmCategory::Poi),
            "highway" => Some(OsmCategory::Highway),
            "other" => Some(OsmCategory::Other),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LinkKind {
    Match,
    Adjacent,
    PoiMatch,
}

impl LinkKind {
    pub fn name(self) -> &'static str {
        match self {
            LinkKind::Match => "match",
            LinkKind::Adjacent => "adjacent",
            LinkKind::PoiMatch => "poi",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "match" => Some(LinkKind::Match),
            "adjacent" => Some(LinkKind::Adjacent),
            "poi" => Some(LinkKind::PoiMatch),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelationClass {
    OneToOne,
    OneToN,
    MToOne,
    MToN,
}

impl RelationClass {
    pub fn label(self) -> &'static str {
        match self {
            RelationClass::OneToOne => "1:1",
            RelationClass::OneToN => "1:n",
            RelationClass::MToOne => "m:1",
            RelationClass::MToN => "m:n",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "1:1" => Some(RelationClass::OneToOne),
            "1:n" => Some(RelationClass::OneToN),
            "m:1" => Some(RelationClass::MToOne),
            "m:n" => Some(RelationClass::MToN),
            _ => None,
        }
    }

    pub const ALL: [RelationClass; 4] =
        [RelationClass::OneToOne, RelationClass::OneToN, RelationClass::MToOne, RelationClass::MToN];
}

impl fmt::Display for RelationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CityObjectRow {
    pub id: i64,
    pub objectclass_id: i64,
    pub gmlid: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingRow {
    pub id: i64,
    pub objectclass_id: i64,
    pub building_root_id: i64,
    pub roof_type: Option<String>,
    pub measured_height: Option<f64>,
    pub lod2_solid_id: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGeometryRow {
    pub id: i64,
    pub root_id: i64,
    pub cityobject_id: i64,
    pub geometry: Geometry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThematicSurfaceRow {
    pub id: i64,
    pub building_id: i64,
    pub surface_kind: SurfaceKind,
    pub lod2_multi_surface_id: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AddressRow {
    pub id: i64,
    pub building_id: i64,
    pub thoroughfare: String,
    pub administrative_area: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OsmEntityRow {
    pub osm_id: i64,
    pub osm_type: OsmType,
    pub category: OsmCategory,
    pub geometry: Option<Geometry>,
    pub label: Option<String>,
    pub tags: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OsmClassRow {
    pub osm_id: i64,
    pub osm_type: OsmType,
    pub class_name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkageRecord {
    pub citygml_surface_id: i64,
    pub osm_id: i64,
    pub osm_type: OsmType,
    pub ratio: f64,
    pub kind: LinkKind,
    pub relation_class: Option<RelationClass>,
}

/// The store. Rows keep insertion order; keyed lookups go through side maps.
#[derive(Debug, Clone, Default)]
pub struct CityStore {
    crs: Option<Crs>,
    cityobjects: Vec<CityObjectRow>,
    buildings: Vec<BuildingRow>,
    surface_geometries: Vec<SurfaceGeometryRow>,
    thematic_surfaces: Vec<ThematicSurfaceRow>,
    addresses: Vec<AddressRow>,
    osm_entities: Vec<OsmEntityRow>,
    osm_classes: Vec<OsmClassRow>,
    linkage: Vec<LinkageRecord>,
    meta: BTreeMap<String, String>,
    cityobject_idx: HashMap<i64, usize>,
    gmlid_idx: HashMap<String, i64>,
    building_idx: HashMap<i64, usize>,
    surface_geometry_idx: HashMap<i64, usize>,
    thematic_idx: HashMap<i64, usize>,
    address_idx: HashMap<i64, usize>,
    osm_idx: HashMap<(OsmType, i64), usize>,
    osm_class_keys: HashSet<(OsmType, i64, String)>,
}

impl CityStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Projected CRS shared by all stored geometries, fixed by the first
    /// geometry-bearing import.
    pub fn crs(&self) -> Option<Crs> {
        self.crs
    }

    pub fn set_crs(&mut self, crs: Crs) -> Result<()> {
        match self.crs {
            Some(c) if c != crs => Err(StoreError::InvalidValue(format!("store CRS is {c}, not {crs}"))),
            _ if !crs.is_projected() => {
                Err(StoreError::InvalidValue(format!("store CRS must be projected, got {crs}")))
            }
            _ => {
                self.crs = Some(crs);
                Ok(())
            }
        }
    }

    fn check_crs(&self, g: &Geometry, table: &'static str) -> Result<()> {
        match self.crs {
            Some(c) if c == g.crs => Ok(()),
            _ => Err(StoreError::CrsMismatch(table)),
        }
    }

    /// Free-form pipeline state (e.g. which imports have run).
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.get(key).map(String::as_str)
    }

    pub fn set_meta(&mut self, key: &str, value: &str) {
        self.meta.insert(key.to_owned(), value.to_owned());
    }

    pub fn cityobjects(&self) -> &[CityObjectRow] {
        &self.cityobjects
    }
    pub fn buildings(&self) -> &[BuildingRow] {
        &self.buildings
    }
    pub fn surface_geometries(&self) -> &[SurfaceGeometryRow] {
        &self.surface_geometries
    }
    pub fn thematic_surfaces(&self) -> &[ThematicSurfaceRow] {
        &self.thematic_surfaces
    }
    pub fn addresses(&self) -> &[AddressRow] {
        &self.addresses
    }
    pub fn osm_entities(&self) -> &[OsmEntityRow] {
        &self.osm_entities
    }
    pub fn osm_classes(&self) -> &[OsmClassRow] {
        &self.osm_classes
    }
    pub fn linkage(&self) -> &[LinkageRecord] {
        &self.linkage
    }

    pub fn cityobject(&self, id: i64) -> Option<&CityObjectRow> {
        self.cityobject_idx.get(&id).map(|&i| &self.cityobjects[i])
    }
    pub fn cityobject_by_gmlid(&self, gmlid: &str) -> Option<&CityObjectRow> {
        self.gmlid_idx.get(gmlid).and_then(|id| self.cityobject(*id))
    }
    pub fn building(&self, id: i64) -> Option<&BuildingRow> {
        self.building_idx.get(&id).map(|&i| &self.buildings[i])
    }
    pub fn surface_geometry(&self, id: i64) -> Option<&SurfaceGeometryRow> {
        self.surface_geometry_idx.get(&id).map(|&i| &self.surface_geometries[i])
    }
    pub fn thematic_surface(&self, id: i64) -> Option<&ThematicSurfaceRow> {
        self.thematic_idx.get(&id).map(|&i| &self.thematic_surfaces[i])
    }
    pub fn osm_entity(&self, osm_type: OsmType, osm_id: i64) -> Option<&OsmEntityRow> {
        self.osm_idx.get(&(osm_type, osm_id)).map(|&i| &self.osm_entities[i])
    }

    /// Next free id in the shared cityobject key space.
    pub fn next_cityobject_id(&self) -> i64 {
        self.cityobjects.iter().map(|r| r.id).max().unwrap_or(0) + 1
    }
    pub fn next_surface_geometry_id(&self) -> i64 {
        self.surface_geometries.iter().map(|r| r.id).max().unwrap_or(0) + 1
    }
    pub fn next_address_id(&self) -> i64 {
        self.addresses.iter().map(|r| r.id).max().unwrap_or(0) + 1
    }

    pub fn insert_cityobject(&mut self, row: CityObjectRow) -> Result<i64> {
        if self.cityobject_idx.contains_key(&row.id) {
            return Err(StoreError::DuplicateKey { table: "cityobject", key: row.id.to_string() });
        }
        if self.gmlid_idx.contains_key(&row.gmlid) {
            return Err(StoreError::DuplicateKey { table: "cityobject", key: row.gmlid.clone() });
        }
        self.cityobject_idx.insert(row.id, self.cityobjects.len());
        self.gmlid_idx.insert(row.gmlid.clone(), row.id);
        let id = row.id;
        self.cityobjects.push(row);
        Ok(id)
    }

    /// The building row itself is checked for a unique id and a positive
    /// height. Its solid reference is checked by [`CityStore::check_integrity`],
    /// because the solid is usually inserted after the building.
    pub fn insert_building(&mut self, row: BuildingRow) -> Result<i64> {
        if self.building_idx.contains_key(&row.id) {
            return Err(StoreError::DuplicateKey { table: "building", key: row.id.to_string() });
        }
        if let Some(h) = row.measured_height {
            if !(h > 0.0 && h.is_finite()) {
                return Err(StoreError::InvalidValue(format!("measured_height {h}")));
            }
        }
        self.building_idx.insert(row.id, self.buildings.len());
        let id = row.id;
        self.buildings.push(row);
        Ok(id)
    }

    pub fn insert_surface_geometry(&mut self, row: SurfaceGeometryRow) -> Result<i64> {
        if self.surface_geometry_idx.contains_key(&row.id) {
            return Err(StoreError::DuplicateKey { table: "surface_geometry", key: row.id.to_string() });
        }
        self.check_crs(&row.geometry, "surface_geometry")?;
        if !self.cityobject_idx.contains_key(&row.cityobject_id) {
            return Err(StoreError::DanglingReference {
                table: "surface_geometry",
                column: "cityobject_id",
                value: row.cityobject_id.to_string(),
            });
        }
        self.surface_geometry_idx.insert(row.id, self.surface_geometries.len());
        let id = row.id;
        self.surface_geometries.push(row);
        Ok(id)
    }

    pub fn insert_thematic_surface(&mut self, row: ThematicSurfaceRow) -> Result<i64> {
        if self.thematic_idx.contains_key(&row.id) {
            return Err(StoreError::DuplicateKey { table: "thematic_surface", key: row.id.to_string() });
        }
        if !self.building_idx.contains_key(&row.building_id) {
            return Err(StoreError::DanglingReference {
                table: "thematic_surface",
                column: "building_id",
                value: row.building_id.to_string(),
            });
        }
        self.thematic_idx.insert(row.id, self.thematic_surfaces.len());
        let id = row.id;
        self.thematic_surfaces.push(row);
        Ok(id)
    }

    pub fn insert_address(&mut self, row: AddressRow) -> Result<i64> {
        if self.address_idx.contains_key(&row.id) {
            return Err(StoreError::DuplicateKey { table: "address", key: row.id.to_string() });
        }
        if !self.building_idx.contains_key(&row.building_id) {
            return Err(StoreError::DanglingReference {
                table: "address",
                column: "building_id",
                value: row.building_id.to_string(),
            });
        }
        self.address_idx.insert(row.id, self.addresses.len());
        let id = row.id;
        self.addresses.push(row);
        Ok(id)
    }

    pub fn insert_osm_entity(&mut self, row: OsmEntityRow) -> Result<(OsmType, i64)> {
        let key = (row.osm_type, row.osm_id);
        if self.osm_idx.contains_key(&key) {
            return Err(StoreError::DuplicateKey { table: "osm_entity", key: format!("{}{}", key.0.code(), key.1) });
        }
        if let Some(g) = &row.geometry {
            self.check_crs(g, "osm_entity")?;
        }
        self.osm_idx.insert(key, self.osm_entities.len());
        self.osm_entities.push(row);
        Ok(key)
    }

    pub fn insert_osm_class(&mut self, row: OsmClassRow) -> Result<()> {
        if !self.osm_idx.contains_key(&(row.osm_type, row.osm_id)) {
            return Err(StoreError::DanglingReference {
                table: "osm_class",
                column: "osm_id",
                value: format!("{}{}", row.osm_type.code(), row.osm_id),
            });
        }
        let key = (row.osm_type, row.osm_id, row.class_name.clone());
        if !self.osm_class_keys.insert(key) {
            return Err(StoreError::DuplicateKey {
                table: "osm_class",
                key: format!("{}{} {}", row.osm_type.code(), row.osm_id, row.class_name),
            });
        }
        self.osm_classes.push(row);
        Ok(())
    }

    pub fn insert_linkage(&mut self, row: LinkageRecord) -> Result<()> {
        if !self.thematic_idx.contains_key(&row.citygml_surface_id) {
            return Err(StoreError::DanglingReference {
                table: "linkage",
                column: "citygml_surface_id",
                value: row.citygml_surface_id.to_string(),
            });
        }
        if !self.osm_idx.contains_key(&(row.osm_type, row.osm_id)) {
            return Err(StoreError::DanglingReference {
                table: "linkage",
                column: "osm_id",
                value: format!("{}{}", row.osm_type.code(), row.osm_id),
            });
        }
        if !(0.0..=1.0 + 1e-9).contains(&row.ratio) {
            return Err(StoreError::InvalidValue(format!("ratio {}", row.ratio)));
        }
        if row.relation_class.is_some() != (row.kind == LinkKind::Match) {
            return Err(StoreError::InvalidValue("relation_class is set exactly on match records".into()));
        }
        self.linkage.push(row);
        Ok(())
    }

    /// Drops all linkage records (linking is rerun from scratch).
    pub fn clear_linkage(&mut self) {
        self.linkage.clear();
    }

    /// Full referential-integrity sweep; returns every violation found.
    pub fn check_integrity(&self) -> Vec<StoreError> {
        let mut errors = Vec::new();
        let dangling =
            |table, column, value: i64| StoreError::DanglingReference { table, column, value: value.to_string() };
        for b in &self.buildings {
            if !self.cityobject_idx.contains_key(&b.id) {
                errors.push(dangling("building", "id", b.id));
            }
            if !self.building_idx.contains_key(&b.building_root_id) {
                errors.push(dangling("building", "building_root_id", b.building_root_id));
            }
            if let Some(s) = b.lod2_solid_id {
                match self.surface_geometry(s) {
                    Some(row) if matches!(row.geometry.shape, citykg_geometry::Shape::PolyhedralSurface(_)) => {}
                    _ => errors.push(dangling("building", "lod2_solid_id", s)),
                }
            }
        }
        for s in &self.surface_geometries {
            if !self.cityobject_idx.contains_key(&s.cityobject_id) {
                errors.push(dangling("surface_geometry", "cityobject_id", s.cityobject_id));
            }
            if !self.surface_geometry_idx.contains_key(&s.root_id) {
                errors.push(dangling("surface_geometry", "root_id", s.root_id));
            }
        }
        for t in &self.thematic_surfaces {
            if !self.building_idx.contains_key(&t.building_id) {
                errors.push(dangling("thematic_surface", "building_id", t.building_id));
            }
            if !self.cityobject_idx.contains_key(&t.id) {
                errors.push(dangling("thematic_surface", "id", t.id));
            }
            if !self.surface_geometry_idx.contains_key(&t.lod2_multi_surface_id) {
                errors.push(dangling("thematic_surface", "lod2_multi_surface_id", t.lod2_multi_surface_id));
            }
        }
        for a in &self.addresses {
            if !self.building_idx.contains_key(&a.building_id) {
                errors.push(dangling("address", "building_id", a.building_id));
            }
        }
        for c in &self.osm_classes {
            if !self.osm_idx.contains_key(&(c.osm_type, c.osm_id)) {
                errors.push(dangling("osm_class", "osm_id", c.osm_id));
            }
        }
        let matched: HashSet<i64> =
            self.linkage.iter().filter(|l| l.kind == LinkKind::Match).map(|l| l.citygml_surface_id).collect();
        for l in &self.linkage {
            if !self.thematic_idx.contains_key(&l.citygml_surface_id) {
                errors.push(dangling("linkage", "citygml_surface_id", l.citygml_surface_id));
            }
            if !self.osm_idx.contains_key(&(l.osm_type, l.osm_id)) {
                errors.push(dangling("linkage", "osm_id", l.osm_id));
            }
            if l.kind == LinkKind::Adjacent && matched.contains(&l.citygml_surface_id) {
                errors.push(StoreError::InvalidValue(format!(
                    "surface {} has both a match and an adjacent record",
                    l.citygml_surface_id
                )));
            }
        }
        errors
    }

    /// Ground surfaces with their footprint geometry, in insertion order.
    pub fn ground_surfaces(&self) -> impl Iterator<Item = (&ThematicSurfaceRow, &Geometry)> {
        self.thematic_surfaces
            .iter()
            .filter(|t| t.surface_kind == SurfaceKind::Ground)
            .filter_map(|t| self.surface_geometry(t.lod2_multi_surface_id).map(|g| (t, &g.geometry)))
    }

    /// Row counts per table, in snapshot order.
    pub fn table_counts(&self) -> Vec<(&'static str, usize)> {
        vec![
            ("cityobject", self.cityobjects.len()),
            ("building", self.buildings.len()),
            ("surface_geometry", self.surface_geometries.len()),
            ("thematic_surface", self.thematic_surfaces.len()),
            ("address", self.addresses.len()),
            ("osm_entity", self.osm_entities.len()),
            ("osm_class", self.osm_classes.len()),
            ("linkage", self.linkage.len()),
        ]
    }
}
