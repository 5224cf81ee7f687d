use std::fmt;

use crate::error::{GeometryError, Result};
use crate::Crs;

/// Coordinate equality tolerance in CRS units.
pub const COORD_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coord {
    pub x: f64,
    pub y: f64,
    pub z: Option<f64>,
}

impl Coord {
    pub const fn xy(x: f64, y: f64) -> Self {
        Self { x, y, z: None }
    }

    pub const fn xyz(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z: Some(z) }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_none_or(f64::is_finite)
    }

    pub fn approx_eq(&self, other: &Coord, tol: f64) -> bool {
        (self.x - other.x).abs() <= tol
            && (self.y - other.y).abs() <= tol
            && match (self.z, other.z) {
                (Some(a), Some(b)) => (a - b).abs() <= tol,
                (None, None) => true,
                _ => false,
            }
    }

    /// Drops the z ordinate.
    pub fn flat(&self) -> Coord {
        Coord::xy(self.x, self.y)
    }
}

/// Axis-aligned 2D bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bbox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bbox {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self { min_x, min_y, max_x, max_y }
    }

    pub fn empty() -> Self {
        Self::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY)
    }

    pub fn is_empty(&self) -> bool {
        self.min_x > self.max_x || self.min_y > self.max_y
    }

    pub fn extend(&mut self, c: &Coord) {
        self.min_x = self.min_x.min(c.x);
        self.min_y = self.min_y.min(c.y);
        self.max_x = self.max_x.max(c.x);
        self.max_y = self.max_y.max(c.y);
    }

    pub fn union(&self, other: &Bbox) -> Bbox {
        Bbox::new(
            self.min_x.min(other.min_x),
            self.min_y.min(other.min_y),
            self.max_x.max(other.max_x),
            self.max_y.max(other.max_y),
        )
    }

    pub fn intersects(&self, other: &Bbox) -> bool {
        self.min_x <= other.max_x && other.min_x <= self.max_x && self.min_y <= other.max_y && other.min_y <= self.max_y
    }

    pub fn expand(&self, by: f64) -> Bbox {
        Bbox::new(self.min_x - by, self.min_y - by, self.max_x + by, self.max_y + by)
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.min_x + self.max_x) / 2.0, (self.min_y + self.max_y) / 2.0)
    }
}

/// A polygon with one exterior ring and zero or more holes. Rings are closed.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub exterior: Vec<Coord>,
    pub interiors: Vec<Vec<Coord>>,
}

impl Polygon {
    /// Builds a polygon, checking closure, ring length and finiteness.
    pub fn new(exterior: Vec<Coord>, interiors: Vec<Vec<Coord>>) -> Result<Self> {
        validate_ring(&exterior)?;
        for ring in &interiors {
            validate_ring(ring)?;
        }
        Ok(Self { exterior, interiors })
    }

    /// Axis-aligned rectangle, counter-clockwise.
    pub fn rect(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            exterior: vec![
                Coord::xy(min_x, min_y),
                Coord::xy(max_x, min_y),
                Coord::xy(max_x, max_y),
                Coord::xy(min_x, max_y),
                Coord::xy(min_x, min_y),
            ],
            interiors: Vec::new(),
        }
    }

    pub fn rings(&self) -> impl Iterator<Item = &Vec<Coord>> {
        std::iter::once(&self.exterior).chain(self.interiors.iter())
    }

    pub fn bbox(&self) -> Bbox {
        let mut b = Bbox::empty();
        self.exterior.iter().for_each(|c| b.extend(c));
        b
    }

    /// Exterior counter-clockwise, holes clockwise (in the xy projection).
    pub fn normalize(&mut self) {
        if signed_ring_area(&self.exterior) < 0.0 {
            self.exterior.reverse();
        }
        for hole in &mut self.interiors {
            if signed_ring_area(hole) > 0.0 {
                hole.reverse();
            }
        }
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    /// The same polygon with z dropped.
    pub fn flat(&self) -> Polygon {
        Polygon {
            exterior: self.exterior.iter().map(Coord::flat).collect(),
            interiors: self.interiors.iter().map(|r| r.iter().map(Coord::flat).collect()).collect(),
        }
    }

    pub fn has_z(&self) -> bool {
        self.exterior.first().is_some_and(|c| c.z.is_some())
    }
}

pub(crate) fn validate_ring(ring: &[Coord]) -> Result<()> {
    if ring.iter().any(|c| !c.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    if ring.len() < 4 {
        return Err(GeometryError::RingTooShort(ring.len()));
    }
    let (first, last) = (ring[0], ring[ring.len() - 1]);
    if !first.approx_eq(&last, COORD_EPSILON) {
        return Err(GeometryError::UnclosedRing { first: (first.x, first.y), last: (last.x, last.y) });
    }
    Ok(())
}

/// Shoelace signed area of a closed ring; positive when counter-clockwise.
pub fn signed_ring_area(ring: &[Coord]) -> f64 {
    if ring.len() < 3 {
        return 0.0;
    }
    // translate to the first vertex to keep UTM-sized ordinates well conditioned
    let (ox, oy) = (ring[0].x, ring[0].y);
    let mut twice = 0.0;
    for w in ring.windows(2) {
        let (ax, ay) = (w[0].x - ox, w[0].y - oy);
        let (bx, by) = (w[1].x - ox, w[1].y - oy);
        twice += ax * by - bx * ay;
    }
    twice / 2.0
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Point(Coord),
    LineString(Vec<Coord>),
    Polygon(Polygon),
    MultiPolygon(Vec<Polygon>),
    /// Faces of a 3D boundary representation.
    PolyhedralSurface(Vec<Polygon>),
}

impl Shape {
    pub fn kind(&self) -> &'static str {
        match self {
            Shape::Point(_) => "POINT",
            Shape::LineString(_) => "LINESTRING",
            Shape::Polygon(_) => "POLYGON",
            Shape::MultiPolygon(_) => "MULTIPOLYGON",
            Shape::PolyhedralSurface(_) => "POLYHEDRALSURFACE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub shape: Shape,
    pub crs: Crs,
}

impl Geometry {
    pub fn new(shape: Shape, crs: Crs) -> Self {
        Self { shape, crs }
    }

    pub fn point(x: f64, y: f64, crs: Crs) -> Self {
        Self::new(Shape::Point(Coord::xy(x, y)), crs)
    }

    pub fn polygon(p: Polygon, crs: Crs) -> Self {
        Self::new(Shape::Polygon(p), crs)
    }

    pub fn kind(&self) -> &'static str {
        self.shape.kind()
    }

    pub fn coords(&self) -> Box<dyn Iterator<Item = &Coord> + '_> {
        match &self.shape {
            Shape::Point(c) => Box::new(std::iter::once(c)),
            Shape::LineString(cs) => Box::new(cs.iter()),
            Shape::Polygon(p) => Box::new(p.rings().flatten()),
            Shape::MultiPolygon(ps) | Shape::PolyhedralSurface(ps) => {
                Box::new(ps.iter().flat_map(|p| p.rings().flatten()))
            }
        }
    }

    pub fn map_coords(&self, f: &mut impl FnMut(&Coord) -> Result<Coord>) -> Result<Shape> {
        let mut ring = |r: &Vec<Coord>| r.iter().map(&mut *f).collect::<Result<Vec<_>>>();
        let mut poly = |p: &Polygon| -> Result<Polygon> {
            Ok(Polygon {
                exterior: ring(&p.exterior)?,
                interiors: p.interiors.iter().map(&mut ring).collect::<Result<_>>()?,
            })
        };
        Ok(match &self.shape {
            Shape::Point(c) => Shape::Point(f(c)?),
            Shape::LineString(cs) => Shape::LineString(cs.iter().map(&mut *f).collect::<Result<_>>()?),
            Shape::Polygon(p) => Shape::Polygon(poly(p)?),
            Shape::MultiPolygon(ps) => Shape::MultiPolygon(ps.iter().map(&mut poly).collect::<Result<_>>()?),
            Shape::PolyhedralSurface(ps) => Shape::PolyhedralSurface(ps.iter().map(&mut poly).collect::<Result<_>>()?),
        })
    }

    pub fn bbox(&self) -> Bbox {
        let mut b = Bbox::empty();
        self.coords().for_each(|c| b.extend(c));
        b
    }

    /// Polygonal parts projected to the xy plane. Polyhedral faces are
    /// included as (possibly degenerate) polygons; points and lines yield none.
    pub fn footprint_polygons(&self) -> Vec<Polygon> {
        match &self.shape {
            Shape::Polygon(p) => vec![p.flat()],
            Shape::MultiPolygon(ps) | Shape::PolyhedralSurface(ps) => ps.iter().map(Polygon::flat).collect(),
            Shape::Point(_) | Shape::LineString(_) => Vec::new(),
        }
    }

    pub fn is_polygonal(&self) -> bool {
        matches!(self.shape, Shape::Polygon(_) | Shape::MultiPolygon(_))
    }

    /// Checks every coordinate is finite and every ring valid.
    pub fn validate(&self) -> Result<()> {
        match &self.shape {
            Shape::Point(c) => c.is_finite().then_some(()).ok_or(GeometryError::NonFinite),
            Shape::LineString(cs) => cs.iter().all(Coord::is_finite).then_some(()).ok_or(GeometryError::NonFinite),
            Shape::Polygon(p) => p.rings().try_for_each(|r| validate_ring(r)),
            Shape::MultiPolygon(ps) | Shape::PolyhedralSurface(ps) => {
                ps.iter().flat_map(Polygon::rings).try_for_each(|r| validate_ring(r))
            }
        }
    }
}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::wkt::to_wkt(self))
    }
}
