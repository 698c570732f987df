//! Occupancy grid, distance field, semantic map and visibility index.

pub mod edt;
pub mod grid;
pub mod semantic_map;
pub mod visibility;

pub use edt::{compute_distance_field, DistanceField};
pub use grid::{load_occupancy_grid, CellState, GridMetadata, OccupancyGrid};
pub use semantic_map::{
    load_semantic_map, Region, Room, SemanticMapDocument, SemanticObject, SemanticWorldMap,
    DEFAULT_CLASS_VOCABULARY,
};
pub use visibility::{
    build_visibility_index, query_visibility, BearingSet, BinRun, VisibilityIndex,
    DEFAULT_ANGULAR_RESOLUTION,
};
