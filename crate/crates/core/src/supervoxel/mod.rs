//! Oversegmentation into supervoxels and the inverse-distance neighbour graph.

mod graph;
mod partition;
mod slic;

pub use graph::{
    build_graph, build_graph_from_centers, default_k, SupervoxelGraph, COINCIDENT_EPS,
};
pub use partition::SupervoxelPartition;
pub use slic::{grid_layout, slic_oversegment, SLIC_ITERATIONS};
