//! Coordinate reference systems and the WGS84 <-> UTM transverse Mercator
//! projection.
//!
//! The projection uses Krüger's series in the sixth-order form given by
//! Karney, which is accurate to well below a millimetre inside a UTM zone.
//! The inverse recovers geodetic latitude from the conformal latitude by
//! Newton iteration instead of a truncated series.

use std::fmt;

use crate::error::{GeometryError, Result};
use crate::types::{Coord, Geometry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hemisphere {
    North,
    South,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Crs {
    /// Longitude/latitude in degrees (x = lon, y = lat).
    Wgs84,
    /// Easting/northing in metres.
    Utm { zone: u8, hemisphere: Hemisphere },
}

impl Crs {
    pub fn utm(zone: u8, hemisphere: Hemisphere) -> Result<Crs> {
        if !(1..=60).contains(&zone) {
            return Err(GeometryError::InvalidZone(zone));
        }
        Ok(Crs::Utm { zone, hemisphere })
    }

    /// UTM zone 32 north, which covers Bavaria.
    pub const fn utm32n() -> Crs {
        Crs::Utm { zone: 32, hemisphere: Hemisphere::North }
    }

    pub fn is_projected(&self) -> bool {
        matches!(self, Crs::Utm { .. })
    }

    /// The zone containing a WGS84 position.
    pub fn utm_for_lonlat(lon: f64, lat: f64) -> Crs {
        let zone = (((lon + 180.0) / 6.0).floor() as i64).clamp(0, 59) as u8 + 1;
        let hemisphere = if lat >= 0.0 { Hemisphere::North } else { Hemisphere::South };
        Crs::Utm { zone, hemisphere }
    }

    pub fn epsg(&self) -> u32 {
        match self {
            Crs::Wgs84 => 4326,
            Crs::Utm { zone, hemisphere: Hemisphere::North } => 32600 + *zone as u32,
            Crs::Utm { zone, hemisphere: Hemisphere::South } => 32700 + *zone as u32,
        }
    }

    /// Accepts 4326, 326zz/327zz (WGS84 UTM) and 258zz (ETRS89 UTM, treated
    /// as WGS84 UTM).
    pub fn from_epsg(code: u32) -> Option<Crs> {
        match code {
            4326 => Some(Crs::Wgs84),
            32601..=32660 => Crs::utm((code - 32600) as u8, Hemisphere::North).ok(),
            32701..=32760 => Crs::utm((code - 32700) as u8, Hemisphere::South).ok(),
            25801..=25860 => Crs::utm((code - 25800) as u8, Hemisphere::North).ok(),
            _ => None,
        }
    }

    /// Parses a CRS out of strings such as `EPSG:25832`,
    /// `urn:ogc:def:crs,crs:EPSG::25832,crs:EPSG::7837`,
    /// `http://www.opengis.net/def/crs/EPSG/0/32632` or the AdV form
    /// `urn:adv:crs:ETRS89_UTM32*DE_DHHN2016_NH`.
    pub fn from_srs_name(name: &str) -> Option<Crs> {
        if name.contains("CRS84") {
            return Some(Crs::Wgs84);
        }
        let upper = name.to_ascii_uppercase();
        let digit_runs =
            |s: &str| -> Vec<u32> { s.split(|c: char| !c.is_ascii_digit()).filter_map(|d| d.parse().ok()).collect() };
        if upper.contains("EPSG") {
            if let Some(crs) = digit_runs(&upper).into_iter().find_map(Crs::from_epsg) {
                return Some(crs);
            }
        }
        let at = upper.find("UTM")?;
        let zone: String = upper[at + 3..].chars().take_while(char::is_ascii_digit).collect();
        Crs::utm(zone.parse().ok()?, Hemisphere::North).ok()
    }
}

impl fmt::Display for Crs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Crs::Wgs84 => f.write_str("WGS84"),
            Crs::Utm { zone, hemisphere } => {
                let h = if *hemisphere == Hemisphere::North { 'N' } else { 'S' };
                write!(f, "UTM{zone}{h}")
            }
        }
    }
}

const A: f64 = 6_378_137.0;
const F: f64 = 1.0 / 298.257_223_563;
const K0: f64 = 0.9996;
const FALSE_EASTING: f64 = 500_000.0;
const FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;
const MAX_LAT: f64 = 84.0;

struct Series {
    /// Rectifying radius times k0.
    scale: f64,
    e: f64,
    alpha: [f64; 6],
    beta: [f64; 6],
}

fn series() -> Series {
    let n = F / (2.0 - F);
    let n2 = n * n;
    let n3 = n2 * n;
    let n4 = n3 * n;
    let n5 = n4 * n;
    let n6 = n5 * n;
    let big_a = A / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
    let alpha = [
        n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0 + 41.0 * n4 / 180.0 - 127.0 * n5 / 288.0 + 7891.0 * n6 / 37800.0,
        13.0 * n2 / 48.0 - 3.0 * n3 / 5.0 + 557.0 * n4 / 1440.0 + 281.0 * n5 / 630.0 - 1983433.0 * n6 / 1935360.0,
        61.0 * n3 / 240.0 - 103.0 * n4 / 140.0 + 15061.0 * n5 / 26880.0 + 167603.0 * n6 / 181440.0,
        49561.0 * n4 / 161280.0 - 179.0 * n5 / 168.0 + 6601661.0 * n6 / 7257600.0,
        34729.0 * n5 / 80640.0 - 3418889.0 * n6 / 1995840.0,
        212378941.0 * n6 / 319334400.0,
    ];
    let beta = [
        n / 2.0 - 2.0 * n2 / 3.0 + 37.0 * n3 / 96.0 - n4 / 360.0 - 81.0 * n5 / 512.0 + 96199.0 * n6 / 604800.0,
        n2 / 48.0 + n3 / 15.0 - 437.0 * n4 / 1440.0 + 46.0 * n5 / 105.0 - 1118711.0 * n6 / 3870720.0,
        17.0 * n3 / 480.0 - 37.0 * n4 / 840.0 - 209.0 * n5 / 4480.0 + 5569.0 * n6 / 90720.0,
        4397.0 * n4 / 161280.0 - 11.0 * n5 / 504.0 - 830251.0 * n6 / 7257600.0,
        4583.0 * n5 / 161280.0 - 108847.0 * n6 / 3991680.0,
        20648693.0 * n6 / 638668800.0,
    ];
    Series { scale: K0 * big_a, e: (F * (2.0 - F)).sqrt(), alpha, beta }
}

fn central_meridian(zone: u8) -> f64 {
    zone as f64 * 6.0 - 183.0
}

/// WGS84 (degrees) to UTM easting/northing (metres) in the given zone.
pub fn lonlat_to_utm(lon: f64, lat: f64, zone: u8, hemisphere: Hemisphere) -> Result<(f64, f64)> {
    if !(1..=60).contains(&zone) {
        return Err(GeometryError::InvalidZone(zone));
    }
    if !lat.is_finite() || lat.abs() > MAX_LAT {
        return Err(GeometryError::LatitudeOutOfRange(lat));
    }
    let s = series();
    let phi = lat.to_radians();
    let lam = (lon - central_meridian(zone)).to_radians();

    // tangent of the conformal latitude
    let tau = phi.tan();
    let sigma = (s.e * (s.e * tau / (1.0 + tau * tau).sqrt()).atanh()).sinh();
    let tau_c = tau * (1.0 + sigma * sigma).sqrt() - sigma * (1.0 + tau * tau).sqrt();

    let xi_p = tau_c.atan2(lam.cos());
    let eta_p = (lam.sin() / (tau_c * tau_c + lam.cos().powi(2)).sqrt()).asinh();

    let mut xi = xi_p;
    let mut eta = eta_p;
    for (j, a) in s.alpha.iter().enumerate() {
        let k = 2.0 * (j + 1) as f64;
        xi += a * (k * xi_p).sin() * (k * eta_p).cosh();
        eta += a * (k * xi_p).cos() * (k * eta_p).sinh();
    }
    let easting = FALSE_EASTING + s.scale * eta;
    let mut northing = s.scale * xi;
    if hemisphere == Hemisphere::South {
        northing += FALSE_NORTHING_SOUTH;
    }
    Ok((easting, northing))
}

/// UTM easting/northing (metres) back to WGS84 degrees.
pub fn utm_to_lonlat(easting: f64, northing: f64, zone: u8, hemisphere: Hemisphere) -> Result<(f64, f64)> {
    if !(1..=60).contains(&zone) {
        return Err(GeometryError::InvalidZone(zone));
    }
    let s = series();
    let n = if hemisphere == Hemisphere::South { northing - FALSE_NORTHING_SOUTH } else { northing };
    let xi = n / s.scale;
    let eta = (easting - FALSE_EASTING) / s.scale;

    let mut xi_p = xi;
    let mut eta_p = eta;
    for (j, b) in s.beta.iter().enumerate() {
        let k = 2.0 * (j + 1) as f64;
        xi_p -= b * (k * xi).sin() * (k * eta).cosh();
        eta_p -= b * (k * xi).cos() * (k * eta).sinh();
    }
    let tau_c = xi_p.sin() / (eta_p.sinh().powi(2) + xi_p.cos().powi(2)).sqrt();
    let lam = eta_p.sinh().atan2(xi_p.cos());

    // invert the conformal latitude by Newton's method on tan(phi)
    let e2 = s.e * s.e;
    let mut tau = tau_c;
    for _ in 0..8 {
        let tau1 = (1.0 + tau * tau).sqrt();
        let sigma = (s.e * (s.e * tau / tau1).atanh()).sinh();
        let tau_ci = tau * (1.0 + sigma * sigma).sqrt() - sigma * tau1;
        let d =
            (tau_c - tau_ci) / (1.0 + tau_ci * tau_ci).sqrt() * (1.0 + (1.0 - e2) * tau * tau) / ((1.0 - e2) * tau1);
        tau += d;
        if d.abs() < 1e-15 * tau.abs().max(1.0) {
            break;
        }
    }
    let lat = tau.atan().to_degrees();
    let lon = central_meridian(zone) + lam.to_degrees();
    Ok((lon, lat))
}

/// Reprojects a geometry. z ordinates pass through unchanged.
pub fn transform(g: &Geometry, target: Crs) -> Result<Geometry> {
    if g.crs == target {
        return Ok(g.clone());
    }
    let source = g.crs;
    let mut f = |c: &Coord| -> Result<Coord> {
        let (lon, lat) = match source {
            Crs::Wgs84 => (c.x, c.y),
            Crs::Utm { zone, hemisphere } => utm_to_lonlat(c.x, c.y, zone, hemisphere)?,
        };
        let (x, y) = match target {
            Crs::Wgs84 => (lon, lat),
            Crs::Utm { zone, hemisphere } => lonlat_to_utm(lon, lat, zone, hemisphere)?,
        };
        Ok(Coord { x, y, z: c.z })
    };
    Ok(Geometry::new(g.map_coords(&mut f)?, target))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_meridian_on_equator_maps_to_false_easting() {
        let (e, n) = lonlat_to_utm(9.0, 0.0, 32, Hemisphere::North).unwrap();
        assert!((e - 500_000.0).abs() < 1e-6, "{e}");
        assert!(n.abs() < 1e-6, "{n}");
    }

    #[test]
    fn latitude_beyond_band_is_rejected() {
        assert!(matches!(lonlat_to_utm(9.0, 85.0, 32, Hemisphere::North), Err(GeometryError::LatitudeOutOfRange(_))));
    }

    #[test]
    fn srs_names() {
        assert_eq!(Crs::from_srs_name("EPSG:25832"), Some(Crs::utm32n()));
        assert_eq!(Crs::from_srs_name("urn:ogc:def:crs,crs:EPSG::25832,crs:EPSG::7837"), Some(Crs::utm32n()));
        assert_eq!(Crs::from_srs_name("urn:adv:crs:ETRS89_UTM32*DE_DHHN2016_NH"), Some(Crs::utm32n()));
        assert_eq!(Crs::from_srs_name("local"), None);
        assert_eq!(
            Crs::from_srs_name("http://www.opengis.net/def/crs/EPSG/0/32633"),
            Some(Crs::Utm { zone: 33, hemisphere: Hemisphere::North })
        );
        assert_eq!(Crs::from_srs_name("http://www.opengis.net/def/crs/OGC/1.3/CRS84"), Some(Crs::Wgs84));
    }

    #[test]
    fn zone_lookup() {
        assert_eq!(Crs::utm_for_lonlat(11.57, 48.14), Crs::utm32n());
        assert_eq!(Crs::utm_for_lonlat(-180.0, -1.0), Crs::Utm { zone: 1, hemisphere: Hemisphere::South });
        assert_eq!(Crs::utm_for_lonlat(180.0, 1.0).epsg(), 32660);
    }
}
