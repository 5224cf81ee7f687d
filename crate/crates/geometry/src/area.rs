use crate::clip::ring_intersection_area;
use crate::error::{GeometryError, Result};
use crate::types::{signed_ring_area, Geometry, Polygon, Shape};

fn polygon_parts<'a>(g: &'a Geometry, op: &'static str) -> Result<&'a [Polygon]> {
    if !g.crs.is_projected() {
        return Err(GeometryError::NotProjected { op, crs: g.crs });
    }
    match &g.shape {
        Shape::Polygon(p) => Ok(std::slice::from_ref(p)),
        Shape::MultiPolygon(ps) => Ok(ps),
        _ => Err(GeometryError::WrongKind { op, kind: g.kind() }),
    }
}

/// Planar area of a single polygon: exterior minus holes.
pub fn single_polygon_area(p: &Polygon) -> f64 {
    let outer = signed_ring_area(&p.exterior).abs();
    let holes: f64 = p.interiors.iter().map(|h| signed_ring_area(h).abs()).sum();
    (outer - holes).max(0.0)
}

/// Area in square metres of a Polygon or MultiPolygon in a projected CRS.
pub fn polygon_area(g: &Geometry) -> Result<f64> {
    Ok(polygon_parts(g, "polygon_area")?.iter().map(single_polygon_area).sum())
}

/// Intersection area of two single polygons with holes.
///
/// Holes are disjoint subsets of their exterior, so the indicator of a
/// polygon is `1_ext - sum(1_hole)`; expanding the product of two such sums
/// reduces the problem to ring-ring intersections.
pub fn polygon_pair_intersection_area(p: &Polygon, q: &Polygon) -> f64 {
    let mut area = ring_intersection_area(&p.exterior, &q.exterior);
    for h in &p.interiors {
        area -= ring_intersection_area(h, &q.exterior);
    }
    for g in &q.interiors {
        area -= ring_intersection_area(&p.exterior, g);
    }
    for h in &p.interiors {
        for g in &q.interiors {
            area += ring_intersection_area(h, g);
        }
    }
    area.max(0.0)
}

/// Area of the set intersection of two polygonal geometries in the same
/// projected CRS. MultiPolygon parts are assumed interior-disjoint.
pub fn intersection_area(a: &Geometry, b: &Geometry) -> Result<f64> {
    if a.crs != b.crs {
        return Err(GeometryError::CrsMismatch(a.crs, b.crs));
    }
    let pa = polygon_parts(a, "intersection_area")?;
    let pb = polygon_parts(b, "intersection_area")?;
    let mut total = 0.0;
    for p in pa {
        let bp = p.bbox();
        for q in pb {
            if bp.intersects(&q.bbox()) {
                total += polygon_pair_intersection_area(p, q);
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{parse_wkt, Crs};

    const CRS: Crs = Crs::utm32n();

    fn g(wkt: &str) -> Geometry {
        parse_wkt(wkt, CRS).unwrap()
    }

    #[test]
    fn square_area() {
        assert_eq!(polygon_area(&g("POLYGON ((0 0, 4 0, 4 4, 0 4, 0 0))")).unwrap(), 16.0);
    }

    #[test]
    fn square_with_hole() {
        let p = g("POLYGON ((0 0, 4 0, 4 4, 0 4, 0 0), (1.5 1.5, 1.5 2.5, 2.5 2.5, 2.5 1.5, 1.5 1.5))");
        assert_eq!(polygon_area(&p).unwrap(), 15.0);
    }

    #[test]
    fn geographic_rejected() {
        let p = parse_wkt("POLYGON ((0 0, 4 0, 4 4, 0 4, 0 0))", Crs::Wgs84).unwrap();
        assert!(matches!(polygon_area(&p), Err(GeometryError::NotProjected { .. })));
    }

    #[test]
    fn line_rejected() {
        assert!(matches!(polygon_area(&g("LINESTRING (0 0, 1 1)")), Err(GeometryError::WrongKind { .. })));
    }

    #[test]
    fn axis_aligned_overlap() {
        let a = g("POLYGON ((0 0, 2 0, 2 2, 0 2, 0 0))");
        let b = g("POLYGON ((1 1, 3 1, 3 3, 1 3, 1 1))");
        assert!((intersection_area(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let unit = g("POLYGON ((0 0, 1 0, 1 1, 0 1, 0 0))");
        assert_eq!(intersection_area(&unit, &unit).unwrap(), 1.0);
    }

    #[test]
    fn holes_on_both_sides() {
        let a = g("POLYGON ((0 0, 4 0, 4 4, 0 4, 0 0), (1 1, 1 3, 3 3, 3 1, 1 1))");
        let b = g("POLYGON ((2 0, 6 0, 6 4, 2 4, 2 0), (2.5 0.5, 2.5 1.5, 3.5 1.5, 3.5 0.5, 2.5 0.5))");
        // overlap strip [2,4]x[0,4] = 8, minus a's hole part [2,3]x[1,3] = 2,
        // minus b's hole [2.5,3.5]x[0.5,1.5] = 1, plus hole-hole [2.5,3]x[1,1.5] = 0.25
        let area = intersection_area(&a, &b).unwrap();
        assert!((area - 5.25).abs() < 1e-6, "{area}");
    }

    #[test]
    fn utm_sized_coordinates() {
        let a = g("POLYGON ((691000 5334000, 691020 5334000, 691020 5334020, 691000 5334020, 691000 5334000))");
        let b = g("POLYGON ((691010 5334010, 691030 5334010, 691030 5334030, 691010 5334030, 691010 5334010))");
        assert!((intersection_area(&a, &b).unwrap() - 100.0).abs() < 1e-6);
        assert_eq!(polygon_area(&a).unwrap(), 400.0);
    }
}
