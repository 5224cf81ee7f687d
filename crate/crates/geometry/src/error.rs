use thiserror::Error;

use crate::Crs;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("WKT syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unsupported WKT geometry type `{0}`")]
    Unsupported(String),
    #[error("ring is not closed (first {first:?} != last {last:?})")]
    UnclosedRing { first: (f64, f64), last: (f64, f64) },
    #[error("ring has {0} coordinates, at least 4 are required")]
    RingTooShort(usize),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("operation `{op}` requires a projected CRS, got {crs}")]
    NotProjected { op: &'static str, crs: Crs },
    #[error("CRS mismatch: {0} vs {1}")]
    CrsMismatch(Crs, Crs),
    #[error("operation `{op}` does not accept {kind} geometries")]
    WrongKind { op: &'static str, kind: &'static str },
    #[error("buffer radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("buffer needs at least 8 arc segments, got {0}")]
    TooFewArcSegments(usize),
    #[error("latitude {0} outside the supported UTM band (±84°)")]
    LatitudeOutOfRange(f64),
    #[error("invalid UTM zone {0}")]
    InvalidZone(u8),
}

pub type Result<T> = std::result::Result<T, GeometryError>;
