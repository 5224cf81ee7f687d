//! CityGML 2.0 LoD2 building subset into store rows.
//!
//! Each `bldg:Building` becomes a building row plus a cityobject row. Each
//! `bldg:boundedBy` Ground/Roof/Wall surface becomes a thematic surface
//! with one surface geometry (a polygon, or a multipolygon when the
//! surface has several). The `bldg:lod2Solid` becomes one polyhedral
//! surface with one face per `gml:surfaceMember`, resolving
//! `xlink:href` references to polygons declared in the boundedBy surfaces.

use std::collections::{BTreeMap, HashMap};

use citykg_geometry::{transform, Coord, Crs, Geometry, GeometryError, Polygon, Shape};
use roxmltree::{Document, Node};

use crate::store::{
    objectclass, AddressRow, BuildingRow, CityObjectRow, CityStore, StoreError, SurfaceGeometryRow, SurfaceKind,
    ThematicSurfaceRow,
};

pub const NS_CORE: &str = "http://www.opengis.net/citygml/2.0";
pub const NS_BLDG: &str = "http://www.opengis.net/citygml/building/2.0";
pub const NS_GML: &str = "http://www.opengis.net/gml";
pub const NS_XLINK: &str = "http://www.w3.org/1999/xlink";
pub const NS_XAL: &str = "urn:oasis:names:tc:ciq:xsdschema:xAL:2.0";

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("malformed XML at {line}:{col}: {message}")]
    Xml { line: u32, col: u32, message: String },
    #[error("{line}:{col}: {message}")]
    Content { line: u32, col: u32, message: String },
    #[error("not a CityGML 2.0 document (root element {0})")]
    UnrecognizedDocument(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PosListError {
    #[error("token {index} (`{token}`) is not a number")]
    BadToken { index: usize, token: String },
    #[error("{count} ordinates are not divisible by dimension {dims}")]
    CountMismatch { count: usize, dims: usize },
}

/// Whitespace-separated ordinates grouped into `dims`-tuples (2 or 3).
pub fn decode_poslist(text: &str, dims: usize) -> Result<Vec<Coord>, PosListError> {
    let mut values = Vec::new();
    for (i, token) in text.split_whitespace().enumerate() {
        match token.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ => return Err(PosListError::BadToken { index: i + 1, token: token.to_owned() }),
        }
    }
    if dims == 0 || values.len() % dims != 0 {
        return Err(PosListError::CountMismatch { count: values.len(), dims });
    }
    Ok(values
        .chunks(dims)
        .map(|c| if dims == 3 { Coord::xyz(c[0], c[1], c[2]) } else { Coord::xy(c[0], c[1]) })
        .collect())
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct CityGmlReport {
    pub buildings: usize,
    pub ground_surfaces: usize,
    pub roof_surfaces: usize,
    pub wall_surfaces: usize,
    pub solids: usize,
    pub addresses: usize,
    pub skipped_surfaces: usize,
    pub ignored_elements: usize,
    pub warnings: Vec<String>,
}

impl CityGmlReport {
    /// `key: value` lines, stable order.
    pub fn lines(&self) -> Vec<String> {
        vec![
            format!("buildings: {}", self.buildings),
            format!("ground_surfaces: {}", self.ground_surfaces),
            format!("roof_surfaces: {}", self.roof_surfaces),
            format!("wall_surfaces: {}", self.wall_surfaces),
            format!("solids: {}", self.solids),
            format!("addresses: {}", self.addresses),
            format!("skipped_surfaces: {}", self.skipped_surfaces),
            format!("ignored_elements: {}", self.ignored_elements),
        ]
    }
}

fn is(node: Node<'_, '_>, ns: &str, name: &str) -> bool {
    node.is_element() && node.tag_name().name() == name && node.tag_name().namespace() == Some(ns)
}

fn children<'a, 'i>(node: Node<'a, 'i>, ns: &'a str, name: &'a str) -> impl Iterator<Item = Node<'a, 'i>> + 'a {
    node.children().filter(move |c| is(*c, ns, name))
}

fn first_descendant<'a, 'i>(node: Node<'a, 'i>, ns: &str, name: &str) -> Option<Node<'a, 'i>> {
    node.descendants().find(|d| is(*d, ns, name))
}

fn gml_id(node: Node<'_, '_>) -> Option<String> {
    node.attribute((NS_GML, "id")).map(str::to_owned)
}

struct Parser<'a, 'i> {
    doc: &'a Document<'i>,
    store: CityStore,
    report: CityGmlReport,
    target: Crs,
    polygons: HashMap<String, Polygon>,
    ignored: BTreeMap<String, usize>,
    anon: usize,
}

impl<'a, 'i> Parser<'a, 'i> {
    fn err<T>(&self, node: Node<'_, '_>, message: impl Into<String>) -> Result<T, IngestError> {
        let pos = self.doc.text_pos_at(node.range().start);
        Err(IngestError::Content { line: pos.row, col: pos.col, message: message.into() })
    }

    fn srs_of(&self, node: Node<'_, '_>) -> Result<Crs, IngestError> {
        let named = node.ancestors().find_map(|a| a.attribute("srsName")).or_else(|| {
            self.doc.descendants().find(|d| is(*d, NS_GML, "Envelope")).and_then(|e| e.attribute("srsName"))
        });
        match named {
            Some(name) => match Crs::from_srs_name(name) {
                Some(crs) if crs.is_projected() => Ok(crs),
                Some(_) => self.err(node, format!("geographic srsName `{name}` is not supported; use a UTM CRS")),
                None => self.err(node, format!("unsupported srsName `{name}`")),
            },
            None => Ok(self.target),
        }
    }

    fn ring(&self, ring: Node<'_, '_>) -> Result<Vec<Coord>, IngestError> {
        let coords = if let Some(pl) = children(ring, NS_GML, "posList").next() {
            let dims = match pl
                .attribute("srsDimension")
                .or_else(|| ring.ancestors().find_map(|a| a.attribute("srsDimension")))
            {
                Some(d) => d.parse().or_else(|_| self.err(pl, format!("bad srsDimension `{d}`")))?,
                None => 3,
            };
            decode_poslist(pl.text().unwrap_or(""), dims).or_else(|e| self.err(pl, e.to_string()))?
        } else {
            let mut out = Vec::new();
            for pos in children(ring, NS_GML, "pos") {
                let mut c = decode_poslist(pos.text().unwrap_or(""), 3)
                    .or_else(|_| decode_poslist(pos.text().unwrap_or(""), 2))
                    .or_else(|e| self.err(pos, e.to_string()))?;
                if c.len() != 1 {
                    return self.err(pos, "gml:pos must hold exactly one position");
                }
                out.push(c.remove(0));
            }
            out
        };
        match citykg_geometry::Polygon::new(coords.clone(), Vec::new()) {
            Ok(_) => Ok(coords),
            Err(GeometryError::UnclosedRing { .. }) => self.err(ring, "unclosed ring"),
            Err(e) => self.err(ring, e.to_string()),
        }
    }

    fn polygon(&self, poly: Node<'_, '_>) -> Result<Polygon, IngestError> {
        let ext = children(poly, NS_GML, "exterior")
            .next()
            .and_then(|e| children(e, NS_GML, "LinearRing").next())
            .map_or_else(|| self.err(poly, "polygon without exterior LinearRing"), Ok)?;
        let exterior = self.ring(ext)?;
        let mut interiors = Vec::new();
        for int in children(poly, NS_GML, "interior") {
            if let Some(r) = children(int, NS_GML, "LinearRing").next() {
                interiors.push(self.ring(r)?);
            }
        }
        let crs = self.srs_of(poly)?;
        let p = Polygon::new(exterior, interiors).or_else(|e| self.err(poly, e.to_string()))?;
        if crs == self.target {
            return Ok(p);
        }
        match transform(&Geometry::polygon(p, crs), self.target) {
            Ok(Geometry { shape: Shape::Polygon(p), .. }) => Ok(p),
            Ok(_) => unreachable!("transform keeps the shape"),
            Err(e) => self.err(poly, e.to_string()),
        }
    }

    fn ignore(&mut self, node: Node<'_, '_>) {
        self.report.ignored_elements += 1;
        *self.ignored.entry(node.tag_name().name().to_owned()).or_default() += 1;
    }

    fn building(&mut self, b: Node<'_, '_>, root_id: Option<i64>) -> Result<(), IngestError> {
        let id = self.store.next_cityobject_id();
        let gmlid = gml_id(b).unwrap_or_else(|| {
            self.anon += 1;
            self.report.warnings.push(format!("building without gml:id named anonymous-{}", self.anon));
            format!("anonymous-{}", self.anon)
        });
        self.store.insert_cityobject(CityObjectRow { id, objectclass_id: objectclass::BUILDING, gmlid })?;

        let mut measured_height = None;
        let mut roof_type = None;
        let mut surfaces = Vec::new();
        let mut solid = None;
        let mut address = None;
        let mut parts = Vec::new();
        for child in b.children().filter(Node::is_element) {
            if child.tag_name().namespace() != Some(NS_BLDG) {
                self.ignore(child);
                continue;
            }
            match child.tag_name().name() {
                "measuredHeight" => {
                    let t = child.text().unwrap_or("").trim();
                    let h: f64 =
                        t.parse().or_else(|_| self.err(child, format!("measuredHeight `{t}` is not a number")))?;
                    measured_height = Some(h);
                }
                "roofType" => roof_type = child.text().map(|t| t.trim().to_owned()),
                "boundedBy" => {
                    for s in child.children().filter(Node::is_element) {
                        match SurfaceKind::from_class_name(s.tag_name().name()) {
                            Some(kind) if s.tag_name().namespace() == Some(NS_BLDG) => surfaces.push((kind, s)),
                            _ => {
                                self.report.skipped_surfaces += 1;
                                self.report
                                    .warnings
                                    .push(format!("skipped unsupported surface {}", s.tag_name().name()));
                            }
                        }
                    }
                }
                "lod2Solid" => solid = Some(child),
                "address" => address = Some(child),
                "consistsOfBuildingPart" => parts.extend(children(child, NS_BLDG, "BuildingPart")),
                _ => self.ignore(child),
            }
        }

        // surfaces first, so that solid members can reference their polygons
        let mut surface_rows = Vec::new();
        for (kind, s) in surfaces {
            let mut polys = Vec::new();
            for p in s.descendants().filter(|d| is(*d, NS_GML, "Polygon")) {
                let poly = self.polygon(p)?;
                if let Some(pid) = gml_id(p) {
                    self.polygons.insert(pid, poly.clone());
                }
                polys.push(poly);
            }
            if polys.is_empty() {
                self.report.skipped_surfaces += 1;
                self.report.warnings.push(format!("{} without polygons skipped", kind.class_name()));
                continue;
            }
            surface_rows.push((kind, gml_id(s), polys));
        }

        let mut solid_faces = None;
        if let Some(sol) = solid {
            let mut faces = Vec::new();
            for m in sol.descendants().filter(|d| is(*d, NS_GML, "surfaceMember")) {
                if let Some(href) = m.attribute((NS_XLINK, "href")) {
                    let key = href.trim_start_matches('#');
                    match self.polygons.get(key) {
                        Some(p) => faces.push(p.clone()),
                        None => return self.err(m, format!("unresolved xlink:href `{href}`")),
                    }
                } else if let Some(p) = first_descendant(m, NS_GML, "Polygon") {
                    faces.push(self.polygon(p)?);
                } else {
                    return self.err(m, "surfaceMember without polygon");
                }
            }
            if faces.is_empty() {
                self.report.warnings.push("lod2Solid without surface members ignored".into());
            } else {
                solid_faces = Some(faces);
            }
        }

        let lod2_solid_id = solid_faces.as_ref().map(|_| self.store.next_surface_geometry_id());
        self.store.insert_building(BuildingRow {
            id,
            objectclass_id: objectclass::BUILDING,
            building_root_id: root_id.unwrap_or(id),
            roof_type,
            measured_height,
            lod2_solid_id,
        })?;
        if let (Some(sid), Some(faces)) = (lod2_solid_id, solid_faces) {
            self.store.insert_surface_geometry(SurfaceGeometryRow {
                id: sid,
                root_id: sid,
                cityobject_id: id,
                geometry: Geometry::new(Shape::PolyhedralSurface(faces), self.target),
            })?;
            self.report.solids += 1;
        }

        for (kind, sgml, mut polys) in surface_rows {
            let sid = self.store.next_cityobject_id();
            let gmlid = sgml.unwrap_or_else(|| format!("{}-{}", kind.class_name(), sid));
            self.store.insert_cityobject(CityObjectRow { id: sid, objectclass_id: kind.objectclass_id(), gmlid })?;
            let gid = self.store.next_surface_geometry_id();
            let shape = if polys.len() == 1 { Shape::Polygon(polys.remove(0)) } else { Shape::MultiPolygon(polys) };
            self.store.insert_surface_geometry(SurfaceGeometryRow {
                id: gid,
                root_id: gid,
                cityobject_id: sid,
                geometry: Geometry::new(shape, self.target),
            })?;
            self.store.insert_thematic_surface(ThematicSurfaceRow {
                id: sid,
                building_id: id,
                surface_kind: kind,
                lod2_multi_surface_id: gid,
            })?;
            match kind {
                SurfaceKind::Ground => self.report.ground_surfaces += 1,
                SurfaceKind::Roof => self.report.roof_surfaces += 1,
                SurfaceKind::Wall => self.report.wall_surfaces += 1,
            }
        }

        if let Some(a) = address {
            let row = parse_address(a, self.store.next_address_id(), id);
            self.store.insert_address(row)?;
            self.report.addresses += 1;
        }
        self.report.buildings += 1;
        for part in parts {
            self.building(part, Some(root_id.unwrap_or(id)))?;
        }
        Ok(())
    }
}

fn xal_text(node: Node<'_, '_>, name: &str) -> Option<String> {
    node.descendants()
        .find(|d| is(*d, NS_XAL, name))
        .and_then(|n| n.text())
        .map(|t| t.trim().to_owned())
        .filter(|t| !t.is_empty())
}

/// Decomposes an xAL address into thoroughfare, administrative area and a
/// display label such as `"Stephansplatz 1, 80331 München"`.
fn parse_address(a: Node<'_, '_>, id: i64, building_id: i64) -> AddressRow {
    let street = xal_text(a, "ThoroughfareName");
    let number = xal_text(a, "ThoroughfareNumber");
    let thoroughfare = match (street, number) {
        (Some(s), Some(n)) => format!("{s} {n}"),
        (Some(s), None) => s,
        (None, Some(n)) => n,
        (None, None) => String::new(),
    };
    let locality = xal_text(a, "LocalityName");
    let administrative_area = xal_text(a, "AdministrativeAreaName").or_else(|| locality.clone()).unwrap_or_default();
    let place = match (xal_text(a, "PostalCodeNumber"), locality) {
        (Some(p), Some(l)) => format!("{p} {l}"),
        (Some(p), None) => p,
        (None, Some(l)) => l,
        (None, None) => String::new(),
    };
    let label = [thoroughfare.as_str(), place.as_str()]
        .iter()
        .filter(|s| !s.is_empty())
        .copied()
        .collect::<Vec<_>>()
        .join(", ");
    AddressRow { id, building_id, thoroughfare, administrative_area, label }
}

/// Parses one CityGML document into `store`. On error the store is left
/// unchanged.
pub fn parse_citygml(store: &mut CityStore, text: &str) -> Result<CityGmlReport, IngestError> {
    let doc = Document::parse(text).map_err(|e| {
        let pos = e.pos();
        IngestError::Xml { line: pos.row, col: pos.col, message: e.to_string() }
    })?;
    let root = doc.root_element();
    if !is(root, NS_CORE, "CityModel") {
        let name = match root.tag_name().namespace() {
            Some(ns) => format!("{{{ns}}}{}", root.tag_name().name()),
            None => root.tag_name().name().to_owned(),
        };
        return Err(IngestError::UnrecognizedDocument(name));
    }
    let mut p = Parser {
        doc: &doc,
        store: store.clone(),
        report: CityGmlReport::default(),
        target: store.crs().unwrap_or(Crs::utm32n()),
        polygons: HashMap::new(),
        ignored: BTreeMap::new(),
        anon: 0,
    };
    if store.crs().is_none() {
        // the first import fixes the store CRS
        let any = root.descendants().find(|d| d.attribute("srsName").is_some()).unwrap_or(root);
        p.target = p.srs_of(any)?;
    }
    if p.store.crs().is_none() {
        p.store.set_crs(p.target)?;
    }
    let buildings: Vec<Node<'_, '_>> = children(root, NS_CORE, "cityObjectMember")
        .flat_map(|m| m.children().filter(Node::is_element).collect::<Vec<_>>())
        .collect();
    for b in buildings {
        if is(b, NS_BLDG, "Building") {
            p.building(b, None)?;
        } else {
            p.ignore(b);
        }
    }
    for (name, n) in &p.ignored {
        p.report.warnings.push(format!("ignored {n} unsupported element(s) <{name}>"));
    }
    p.store.set_meta("citygml_imported", "1");
    *store = p.store;
    Ok(p.report)
}
