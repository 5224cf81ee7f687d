//! WKT reading and writing for the supported Simple Features subset.

use std::fmt::Write;

use crate::error::{GeometryError, Result};
use crate::types::{validate_ring, Coord, Geometry, Polygon, Shape};
use crate::Crs;

/// Formats a float with the shortest representation that round-trips.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        // collapses -0
        return "0".to_owned();
    }
    format!("{v}")
}

fn write_coord(out: &mut String, c: &Coord) {
    out.push_str(&format_number(c.x));
    out.push(' ');
    out.push_str(&format_number(c.y));
    if let Some(z) = c.z {
        out.push(' ');
        out.push_str(&format_number(z));
    }
}

fn write_coords(out: &mut String, cs: &[Coord]) {
    out.push('(');
    for (i, c) in cs.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_coord(out, c);
    }
    out.push(')');
}

fn write_polygon(out: &mut String, p: &Polygon) {
    out.push('(');
    for (i, ring) in p.rings().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_coords(out, ring);
    }
    out.push(')');
}

fn write_polygons(out: &mut String, ps: &[Polygon]) {
    out.push('(');
    for (i, p) in ps.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_polygon(out, p);
    }
    out.push(')');
}

/// Serializes a geometry as WKT. The CRS is not encoded.
pub fn to_wkt(g: &Geometry) -> String {
    let has_z = g.coords().next().is_some_and(|c| c.z.is_some());
    let mut out = String::new();
    out.push_str(g.kind());
    if has_z || matches!(g.shape, Shape::PolyhedralSurface(_)) {
        out.push_str(" Z");
    }
    out.push(' ');
    match &g.shape {
        Shape::Point(c) => {
            let _ = write!(out, "(");
            write_coord(&mut out, c);
            out.push(')');
        }
        Shape::LineString(cs) => write_coords(&mut out, cs),
        Shape::Polygon(p) => write_polygon(&mut out, p),
        Shape::MultiPolygon(ps) | Shape::PolyhedralSurface(ps) => write_polygons(&mut out, ps),
    }
    out
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
    dims: Option<usize>,
}

impl<'a> Parser<'a> {
    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(GeometryError::Syntax { offset: self.pos, message: message.into() })
    }

    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.text[self.pos..].chars().next()
    }

    fn expect(&mut self, ch: char) -> Result<()> {
        match self.peek() {
            Some(c) if c == ch => {
                self.pos += 1;
                Ok(())
            }
            Some(c) => self.error(format!("expected `{ch}`, found `{c}`")),
            None => self.error(format!("expected `{ch}`, found end of input")),
        }
    }

    fn word(&mut self) -> &'a str {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let len = rest.find(|c: char| !c.is_ascii_alphabetic()).unwrap_or(rest.len());
        self.pos += len;
        &rest[..len]
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let len = rest
            .find(|c: char| !(c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E')))
            .unwrap_or(rest.len());
        if len == 0 {
            return self.error("expected a number");
        }
        match rest[..len].parse::<f64>() {
            Ok(v) if v.is_finite() => {
                self.pos += len;
                Ok(v)
            }
            _ => self.error(format!("invalid number `{}`", &rest[..len])),
        }
    }

    fn coord(&mut self) -> Result<Coord> {
        let x = self.number()?;
        let y = self.number()?;
        let third = matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == '-' || c == '+' || c == '.');
        let z = if third { Some(self.number()?) } else { None };
        let dims = if z.is_some() { 3 } else { 2 };
        match self.dims {
            None => self.dims = Some(dims),
            Some(d) if d != dims => return self.error(format!("expected {d} ordinates, found {dims}")),
            Some(_) => {}
        }
        Ok(Coord { x, y, z })
    }

    fn coords(&mut self) -> Result<Vec<Coord>> {
        self.expect('(')?;
        let mut out = vec![self.coord()?];
        while self.peek() == Some(',') {
            self.pos += 1;
            out.push(self.coord()?);
        }
        self.expect(')')?;
        Ok(out)
    }

    fn ring(&mut self) -> Result<Vec<Coord>> {
        let start = self.pos;
        let ring = self.coords()?;
        validate_ring(&ring).map_err(|e| match e {
            GeometryError::UnclosedRing { .. } | GeometryError::RingTooShort(_) => {
                GeometryError::Syntax { offset: start, message: e.to_string() }
            }
            other => other,
        })?;
        Ok(ring)
    }

    fn polygon(&mut self) -> Result<Polygon> {
        self.expect('(')?;
        let exterior = self.ring()?;
        let mut interiors = Vec::new();
        while self.peek() == Some(',') {
            self.pos += 1;
            interiors.push(self.ring()?);
        }
        self.expect(')')?;
        Ok(Polygon { exterior, interiors })
    }

    fn polygons(&mut self) -> Result<Vec<Polygon>> {
        self.expect('(')?;
        let mut out = vec![self.polygon()?];
        while self.peek() == Some(',') {
            self.pos += 1;
            out.push(self.polygon()?);
        }
        self.expect(')')?;
        Ok(out)
    }
}

/// Parses WKT for POINT, LINESTRING, POLYGON, MULTIPOLYGON and
/// POLYHEDRALSURFACE (each optionally with a `Z` marker).
pub fn parse_wkt(text: &str, crs: Crs) -> Result<Geometry> {
    let mut p = Parser { text, pos: 0, dims: None };
    let kind_start = {
        p.skip_ws();
        p.pos
    };
    let kind = p.word().to_ascii_uppercase();
    if kind.is_empty() {
        p.pos = kind_start;
        return p.error("expected a geometry type");
    }
    let save = p.pos;
    match p.word().to_ascii_uppercase().as_str() {
        "Z" => p.dims = Some(3),
        "EMPTY" => return Err(GeometryError::Unsupported(format!("{kind} EMPTY"))),
        "" => p.pos = save,
        other => {
            p.pos = save;
            return p.error(format!("unexpected `{other}` after {kind}"));
        }
    }
    let shape = match kind.as_str() {
        "POINT" => {
            p.expect('(')?;
            let c = p.coord()?;
            p.expect(')')?;
            Shape::Point(c)
        }
        "LINESTRING" => {
            let cs = p.coords()?;
            if cs.len() < 2 {
                return p.error("a linestring needs at least 2 coordinates");
            }
            Shape::LineString(cs)
        }
        "POLYGON" => Shape::Polygon(p.polygon()?),
        "MULTIPOLYGON" => Shape::MultiPolygon(p.polygons()?),
        "POLYHEDRALSURFACE" => Shape::PolyhedralSurface(p.polygons()?),
        _ => return Err(GeometryError::Unsupported(kind)),
    };
    if p.peek().is_some() {
        return p.error("trailing input");
    }
    Ok(Geometry::new(shape, crs))
}
