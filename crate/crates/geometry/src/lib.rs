//! Planar geometry kernel: WKT, areas, Greiner–Hormann intersection areas,
//! point location, round buffers, UTM reprojection and an R-tree index.
//!
//! Metric operations (area, buffer, distance) require a projected (UTM)
//! CRS; WGS84 is only used at serialization boundaries.

mod area;
mod buffer;
mod clip;
mod crs;
mod error;
mod index;
mod predicates;
mod types;
mod wkt;

pub use area::{intersection_area, polygon_area, polygon_pair_intersection_area, single_polygon_area};
pub use buffer::{buffer, capsule, DEFAULT_ARC_SEGMENTS};
pub use crs::{lonlat_to_utm, transform, utm_to_lonlat, Crs, Hemisphere};
pub use error::{GeometryError, Result};
pub use index::SpatialIndex;
pub use predicates::{
    locate_in_polygon, locate_in_ring, point_in_polygon, point_segment_distance, polygon_distance, segment_distance,
    segments_intersect, sf_intersects, Location,
};
pub use types::{signed_ring_area, Bbox, Coord, Geometry, Polygon, Shape, COORD_EPSILON};
pub use wkt::{format_number, parse_wkt, to_wkt};
