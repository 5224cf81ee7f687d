//! Point location, segment tests, `sf_intersects` and boundary distance.

use crate::error::{GeometryError, Result};
use crate::types::{Coord, Geometry, Polygon, Shape, COORD_EPSILON};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Inside,
    Boundary,
    Outside,
}

#[inline]
pub(crate) fn cross(o: &Coord, a: &Coord, b: &Coord) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Euclidean distance from `p` to the segment `a`-`b` in the xy plane.
pub fn point_segment_distance(p: &Coord, a: &Coord, b: &Coord) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0) };
    let (qx, qy) = (a.x + t * dx, a.y + t * dy);
    ((p.x - qx).powi(2) + (p.y - qy).powi(2)).sqrt()
}

/// Closed-segment intersection test with an absolute tolerance.
pub fn segments_intersect(a1: &Coord, a2: &Coord, b1: &Coord, b2: &Coord, tol: f64) -> bool {
    let d1 = cross(b1, b2, a1);
    let d2 = cross(b1, b2, a2);
    let d3 = cross(a1, a2, b1);
    let d4 = cross(a1, a2, b2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    point_segment_distance(a1, b1, b2) <= tol
        || point_segment_distance(a2, b1, b2) <= tol
        || point_segment_distance(b1, a1, a2) <= tol
        || point_segment_distance(b2, a1, a2) <= tol
}

/// Minimum distance between two closed segments.
pub fn segment_distance(a1: &Coord, a2: &Coord, b1: &Coord, b2: &Coord) -> f64 {
    if segments_intersect(a1, a2, b1, b2, 0.0) {
        return 0.0;
    }
    point_segment_distance(a1, b1, b2)
        .min(point_segment_distance(a2, b1, b2))
        .min(point_segment_distance(b1, a1, a2))
        .min(point_segment_distance(b2, a1, a2))
}

/// Even-odd location of a point relative to a closed ring.
pub fn locate_in_ring(p: &Coord, ring: &[Coord], tol: f64) -> Location {
    if ring.windows(2).any(|w| point_segment_distance(p, &w[0], &w[1]) <= tol) {
        return Location::Boundary;
    }
    let mut inside = false;
    for w in ring.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    if inside {
        Location::Inside
    } else {
        Location::Outside
    }
}

pub fn locate_in_polygon(p: &Coord, poly: &Polygon, tol: f64) -> Location {
    match locate_in_ring(p, &poly.exterior, tol) {
        Location::Inside => {}
        other => return other,
    }
    for hole in &poly.interiors {
        match locate_in_ring(p, hole, tol) {
            Location::Inside => return Location::Outside,
            Location::Boundary => return Location::Boundary,
            Location::Outside => {}
        }
    }
    Location::Inside
}

fn check_same_crs(a: &Geometry, b: &Geometry) -> Result<()> {
    if a.crs != b.crs {
        return Err(GeometryError::CrsMismatch(a.crs, b.crs));
    }
    Ok(())
}

/// Point-in-polygon with inclusive boundary. `g` must be polygonal.
pub fn point_in_polygon(p: &Geometry, g: &Geometry) -> Result<bool> {
    check_same_crs(p, g)?;
    let Shape::Point(c) = &p.shape else {
        return Err(GeometryError::WrongKind { op: "point_in_polygon", kind: p.kind() });
    };
    let polys: &[Polygon] = match &g.shape {
        Shape::Polygon(poly) => std::slice::from_ref(poly),
        Shape::MultiPolygon(ps) => ps,
        _ => return Err(GeometryError::WrongKind { op: "point_in_polygon", kind: g.kind() }),
    };
    Ok(polys.iter().any(|poly| locate_in_polygon(c, poly, COORD_EPSILON) != Location::Outside))
}

enum Part {
    Point(Coord),
    Line(Vec<Coord>),
    Area(Polygon),
}

fn parts(g: &Geometry) -> Vec<Part> {
    match &g.shape {
        Shape::Point(c) => vec![Part::Point(c.flat())],
        Shape::LineString(cs) => vec![Part::Line(cs.iter().map(Coord::flat).collect())],
        _ => g.footprint_polygons().into_iter().map(Part::Area).collect(),
    }
}

fn segments(cs: &[Coord]) -> impl Iterator<Item = (&Coord, &Coord)> {
    cs.windows(2).map(|w| (&w[0], &w[1]))
}

fn ring_segments(p: &Polygon) -> impl Iterator<Item = (&Coord, &Coord)> {
    p.rings().flat_map(|r| segments(r))
}

fn lines_touch<'a>(a: impl Iterator<Item = (&'a Coord, &'a Coord)>, b: &'a [(&'a Coord, &'a Coord)], tol: f64) -> bool {
    a.into_iter().any(|(a1, a2)| b.iter().any(|(b1, b2)| segments_intersect(a1, a2, b1, b2, tol)))
}

fn parts_intersect(a: &Part, b: &Part, tol: f64) -> bool {
    match (a, b) {
        (Part::Point(p), Part::Point(q)) => p.approx_eq(q, tol),
        (Part::Point(p), Part::Line(l)) | (Part::Line(l), Part::Point(p)) => {
            segments(l).any(|(s1, s2)| point_segment_distance(p, s1, s2) <= tol)
        }
        (Part::Point(p), Part::Area(poly)) | (Part::Area(poly), Part::Point(p)) => {
            locate_in_polygon(p, poly, tol) != Location::Outside
        }
        (Part::Line(l1), Part::Line(l2)) => {
            let segs: Vec<_> = segments(l2).collect();
            lines_touch(segments(l1), &segs, tol)
        }
        (Part::Line(l), Part::Area(poly)) | (Part::Area(poly), Part::Line(l)) => {
            let segs: Vec<_> = ring_segments(poly).collect();
            lines_touch(segments(l), &segs, tol)
                || l.first().is_some_and(|c| locate_in_polygon(c, poly, tol) != Location::Outside)
        }
        (Part::Area(p1), Part::Area(p2)) => {
            let segs: Vec<_> = ring_segments(p2).collect();
            lines_touch(ring_segments(p1), &segs, tol)
                || locate_in_polygon(&p1.exterior[0], p2, tol) != Location::Outside
                || locate_in_polygon(&p2.exterior[0], p1, tol) != Location::Outside
        }
    }
}

/// True when the two point sets share at least one point. 3D geometries are
/// compared through their xy projection.
pub fn sf_intersects(a: &Geometry, b: &Geometry) -> Result<bool> {
    check_same_crs(a, b)?;
    let (ba, bb) = (a.bbox(), b.bbox());
    if !ba.expand(COORD_EPSILON).intersects(&bb) {
        return Ok(false);
    }
    let pa = parts(a);
    let pb = parts(b);
    Ok(pa.iter().any(|x| pb.iter().any(|y| parts_intersect(x, y, COORD_EPSILON))))
}

/// Minimum distance between polygon boundaries; zero when the polygons
/// intersect (including containment).
pub fn polygon_distance(a: &Geometry, b: &Geometry) -> Result<f64> {
    check_same_crs(a, b)?;
    for g in [a, b] {
        if !g.is_polygonal() {
            return Err(GeometryError::WrongKind { op: "polygon_distance", kind: g.kind() });
        }
        if !g.crs.is_projected() {
            return Err(GeometryError::NotProjected { op: "polygon_distance", crs: g.crs });
        }
    }
    if sf_intersects(a, b)? {
        return Ok(0.0);
    }
    let pa = a.footprint_polygons();
    let pb = b.footprint_polygons();
    let mut best = f64::INFINITY;
    for p in &pa {
        for q in &pb {
            for (a1, a2) in ring_segments(p) {
                for (b1, b2) in ring_segments(q) {
                    best = best.min(segment_distance(a1, a2, b1, b2));
                }
            }
        }
    }
    Ok(best)
}
