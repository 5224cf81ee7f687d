//! CityGML and OpenStreetMap into one queryable knowledge graph.
//!
//! The pipeline: ingest CityGML LoD2 buildings ([`citygml`]) and OSM data
//! ([`osm`]) into a [`store::CityStore`], link the two sides
//! ([`linker`]), materialize RDF through declarative mappings
//! ([`mapping`]) and answer GeoSPARQL queries over the result
//! ([`sparql`]).

pub mod citygml;
pub mod linker;
pub mod mapping;
pub mod osm;
pub mod rdf;
pub mod sparql;
pub mod store;
