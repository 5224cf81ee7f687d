//! Round-cap buffers built from segment capsules.
//!
//! Every boundary segment is swept into a capsule whose end caps are
//! inscribed regular-polygon arcs; the capsules (and, for polygon input, the
//! polygon itself) are merged with a polygon union. Arc vertices lie exactly
//! on the true offset circle, so the result is inside the exact buffer and
//! within `radius * (1 - cos(pi / arc_segments))` of it.

use geo::{
    BooleanOps, Coord as GeoCoord, LineString as GeoLineString, MultiPolygon as GeoMultiPolygon, Polygon as GeoPolygon,
};

use crate::error::{GeometryError, Result};
use crate::types::{Coord, Geometry, Polygon, Shape};

pub const DEFAULT_ARC_SEGMENTS: usize = 32;

fn arc_points(cx: f64, cy: f64, radius: f64, from: f64, steps: usize, out: &mut Vec<Coord>) {
    for k in 0..=steps {
        let t = from + std::f64::consts::PI * k as f64 / steps as f64;
        out.push(Coord::xy(cx + radius * t.cos(), cy + radius * t.sin()));
    }
}

/// Counter-clockwise capsule around segment `a`-`b`. A zero-length segment
/// yields a regular polygon with `arc_segments` vertices.
pub fn capsule(a: &Coord, b: &Coord, radius: f64, arc_segments: usize) -> Polygon {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let mut ring = Vec::with_capacity(arc_segments + 3);
    if dx == 0.0 && dy == 0.0 {
        for k in 0..arc_segments {
            let t = std::f64::consts::TAU * k as f64 / arc_segments as f64;
            ring.push(Coord::xy(a.x + radius * t.cos(), a.y + radius * t.sin()));
        }
    } else {
        let half = arc_segments.div_ceil(2);
        let theta = dy.atan2(dx);
        let right = theta - std::f64::consts::FRAC_PI_2;
        arc_points(b.x, b.y, radius, right, half, &mut ring);
        arc_points(a.x, a.y, radius, right + std::f64::consts::PI, half, &mut ring);
    }
    ring.push(ring[0]);
    Polygon { exterior: ring, interiors: Vec::new() }
}

fn to_geo(p: &Polygon) -> GeoPolygon<f64> {
    let ring = |r: &Vec<Coord>| GeoLineString::from(r.iter().map(|c| GeoCoord { x: c.x, y: c.y }).collect::<Vec<_>>());
    GeoPolygon::new(ring(&p.exterior), p.interiors.iter().map(ring).collect())
}

fn from_geo(p: &GeoPolygon<f64>) -> Polygon {
    let ring = |r: &GeoLineString<f64>| r.0.iter().map(|c| Coord::xy(c.x, c.y)).collect::<Vec<_>>();
    Polygon { exterior: ring(p.exterior()), interiors: p.interiors().iter().map(ring).collect() }.normalized()
}

/// Buffers a LineString, Point or Polygon (MultiPolygon parts are buffered
/// together) by `radius` metres.
pub fn buffer(g: &Geometry, radius: f64, arc_segments: usize) -> Result<Geometry> {
    if !g.crs.is_projected() {
        return Err(GeometryError::NotProjected { op: "buffer", crs: g.crs });
    }
    if !radius.is_finite() || radius <= 0.0 {
        return Err(GeometryError::NonPositiveRadius(radius));
    }
    if arc_segments < 8 {
        return Err(GeometryError::TooFewArcSegments(arc_segments));
    }
    let mut pieces: Vec<Polygon> = Vec::new();
    let sweep = |cs: &[Coord], pieces: &mut Vec<Polygon>| {
        let flat: Vec<Coord> = cs.iter().map(Coord::flat).collect();
        if flat.len() == 1 {
            pieces.push(capsule(&flat[0], &flat[0], radius, arc_segments));
        }
        for w in flat.windows(2) {
            pieces.push(capsule(&w[0], &w[1], radius, arc_segments));
        }
    };
    match &g.shape {
        Shape::Point(c) => sweep(std::slice::from_ref(c), &mut pieces),
        Shape::LineString(cs) => sweep(cs, &mut pieces),
        Shape::Polygon(_) | Shape::MultiPolygon(_) => {
            for p in g.footprint_polygons() {
                for ring in p.rings() {
                    sweep(ring, &mut pieces);
                }
                pieces.push(p.normalized());
            }
        }
        Shape::PolyhedralSurface(_) => {
            return Err(GeometryError::WrongKind { op: "buffer", kind: g.kind() });
        }
    }
    // zero-length linestrings collapse to a disc
    let all_same = pieces.len() > 1 && pieces.windows(2).all(|w| w[0] == w[1]);
    let merged: Vec<Polygon> = if pieces.len() == 1 || all_same {
        vec![pieces.swap_remove(0)]
    } else {
        let geo_pieces: Vec<GeoMultiPolygon<f64>> =
            pieces.iter().map(|p| GeoMultiPolygon::new(vec![to_geo(p)])).collect();
        let union = geo_pieces.iter().skip(1).fold(geo_pieces[0].clone(), |acc, p| acc.union(p));
        union.0.iter().map(from_geo).collect()
    };
    let shape = if merged.len() == 1 {
        Shape::Polygon(merged.into_iter().next().expect("one polygon"))
    } else {
        Shape::MultiPolygon(merged)
    };
    Ok(Geometry::new(shape, g.crs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{parse_wkt, polygon_area, Crs};

    const CRS: Crs = Crs::utm32n();

    #[test]
    fn segment_capsule_area_close_to_analytic() {
        let line = parse_wkt("LINESTRING (0 0, 10 0)", CRS).unwrap();
        let buf = buffer(&line, 20.0, 32).unwrap();
        let area = polygon_area(&buf).unwrap();
        let exact = 10.0 * 40.0 + std::f64::consts::PI * 400.0;
        assert!((area - exact).abs() / exact < 0.01, "{area} vs {exact}");
        assert!(area <= exact);
    }

    #[test]
    fn zero_length_line_is_a_disc() {
        let line = parse_wkt("LINESTRING (5 5, 5 5)", CRS).unwrap();
        let buf = buffer(&line, 3.0, 32).unwrap();
        let exact = std::f64::consts::PI * 9.0;
        let area = polygon_area(&buf).unwrap();
        assert!((area - exact).abs() / exact < 0.01, "{area}");
    }

    #[test]
    fn rejects_bad_parameters() {
        let line = parse_wkt("LINESTRING (0 0, 10 0)", CRS).unwrap();
        assert!(matches!(buffer(&line, 0.0, 32), Err(GeometryError::NonPositiveRadius(_))));
        assert!(matches!(buffer(&line, 1.0, 4), Err(GeometryError::TooFewArcSegments(4))));
        let geo = parse_wkt("LINESTRING (0 0, 1 0)", Crs::Wgs84).unwrap();
        assert!(matches!(buffer(&geo, 1.0, 32), Err(GeometryError::NotProjected { .. })));
    }

    #[test]
    fn bent_line_union_is_single_polygon() {
        let line = parse_wkt("LINESTRING (0 0, 10 0, 10 10)", CRS).unwrap();
        let buf = buffer(&line, 2.0, 32).unwrap();
        assert!(matches!(buf.shape, Shape::Polygon(_)));
    }
}
