//! GeoSPARQL functions over WKT literals.
//!
//! Literals are WGS84 (an optional CRS84 IRI prefix is accepted). Metric
//! work happens in the UTM zone of the first operand's bbox centre and
//! results are returned in WGS84.

use citykg_geometry::{buffer, parse_wkt, sf_intersects, to_wkt, transform, Crs, Geometry, DEFAULT_ARC_SEGMENTS};

use crate::rdf::{vocab, Term};

const CRS84: &str = "<http://www.opengis.net/def/crs/OGC/1.3/CRS84>";

/// Geometry of a `geo:wktLiteral`; `None` for other terms or bad WKT.
pub fn parse_wkt_literal(t: &Term) -> Option<Geometry> {
    let Term::Literal { lexical, datatype, .. } = t else { return None };
    if datatype != vocab::WKT_LITERAL {
        return None;
    }
    let text = lexical.trim_start();
    let text = text.strip_prefix(CRS84).unwrap_or(text);
    parse_wkt(text, Crs::Wgs84).ok()
}

/// WGS84 geometry as a `geo:wktLiteral`.
pub fn wkt_literal(g: &Geometry) -> Option<Term> {
    let g = transform(g, Crs::Wgs84).ok()?;
    Some(Term::typed(to_wkt(&g), vocab::WKT_LITERAL))
}

fn metric_crs(g: &Geometry) -> Crs {
    let (lon, lat) = g.bbox().center();
    Crs::utm_for_lonlat(lon, lat)
}

fn numeric(t: &Term) -> Option<f64> {
    let Term::Literal { lexical, datatype, lang: None } = t else { return None };
    let dt = datatype.strip_prefix(vocab::XSD)?;
    matches!(
        dt,
        "integer"
            | "decimal"
            | "double"
            | "float"
            | "int"
            | "long"
            | "short"
            | "nonNegativeInteger"
            | "positiveInteger"
    )
    .then(|| lexical.trim().parse().ok())
    .flatten()
}

/// `geof:buffer(geom, distance, uom:metre)`. `None` on any error: other
/// units, non-positive or non-numeric distance, unparseable geometry.
pub fn geof_buffer(geom: &Term, distance: &Term, unit: &Term) -> Option<Term> {
    if unit.as_iri()? != format!("{}metre", vocab::UOM) {
        return None;
    }
    let d = numeric(distance)?;
    let g = parse_wkt_literal(geom)?;
    let metric = transform(&g, metric_crs(&g)).ok()?;
    wkt_literal(&buffer(&metric, d, DEFAULT_ARC_SEGMENTS).ok()?)
}

/// `geof:sfIntersects(a, b)` as an `xsd:boolean`; 3D input is compared by
/// its xy projection.
pub fn geof_sf_intersects(a: &Term, b: &Term) -> Option<Term> {
    let (ga, gb) = (parse_wkt_literal(a)?, parse_wkt_literal(b)?);
    Some(Term::boolean(intersects_geometries(&ga, &gb)?))
}

pub(crate) fn intersects_geometries(a: &Geometry, b: &Geometry) -> Option<bool> {
    let crs = metric_crs(a);
    let (ma, mb) = (transform(a, crs).ok()?, transform(b, crs).ok()?);
    sf_intersects(&ma, &mb).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wkt(s: &str) -> Term {
        Term::typed(s, vocab::WKT_LITERAL)
    }

    fn metre() -> Term {
        Term::iri(format!("{}metre", vocab::UOM))
    }

    #[test]
    fn buffer_contains_its_linestring() {
        let line = wkt("LINESTRING (11.56 48.14, 11.561 48.1405)");
        let b = geof_buffer(&line, &Term::typed("20", vocab::XSD_INTEGER), &metre()).unwrap();
        assert_eq!(b.datatype(), Some(vocab::WKT_LITERAL));
        assert_eq!(geof_sf_intersects(&b, &line), Some(Term::boolean(true)));
        let g = parse_wkt_literal(&b).unwrap();
        let poly = transform(&g, Crs::utm32n()).unwrap();
        let l = transform(&parse_wkt_literal(&line).unwrap(), Crs::utm32n()).unwrap();
        for c in l.coords() {
            let p = Geometry::point(c.x, c.y, Crs::utm32n());
            assert!(citykg_geometry::point_in_polygon(&p, &poly).unwrap());
        }
    }

    #[test]
    fn buffer_rejects_other_units() {
        let line = wkt("LINESTRING (11.56 48.14, 11.561 48.1405)");
        let unit = Term::iri(format!("{}degree", vocab::UOM));
        assert_eq!(geof_buffer(&line, &Term::typed("20", vocab::XSD_INTEGER), &unit), None);
        assert_eq!(geof_buffer(&line, &Term::string("20"), &metre()), None);
    }

    #[test]
    fn touching_and_disjoint_squares() {
        let a = wkt("POLYGON ((11.0 48.0, 11.001 48.0, 11.001 48.001, 11.0 48.001, 11.0 48.0))");
        let b = wkt("POLYGON ((11.001 48.0, 11.002 48.0, 11.002 48.001, 11.001 48.001, 11.001 48.0))");
        let c = wkt("<http://www.opengis.net/def/crs/OGC/1.3/CRS84> POLYGON ((11.01 48.0, 11.02 48.0, 11.02 48.01, 11.01 48.0))");
        assert_eq!(geof_sf_intersects(&a, &b), Some(Term::boolean(true)));
        assert_eq!(geof_sf_intersects(&a, &c), Some(Term::boolean(false)));
        assert_eq!(geof_sf_intersects(&a, &Term::string("POINT (1 2)")), None);
        assert_eq!(geof_sf_intersects(&a, &wkt("POLYGON ((")), None);
    }
}
