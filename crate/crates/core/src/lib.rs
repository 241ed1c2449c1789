//! Geometry-aware active learning for volumetric segmentation.
//!
//! A volume is cut into supervoxels, each described by a feature row and
//! linked to its nearest neighbours. A boosted classifier trained on the few
//! labeled supervoxels yields probabilities whose feature entropy, combined
//! with the entropy of a random walk over the neighbour graph, ranks what to
//! ask next. Queries are single supervoxels or planar patches found by
//! branch-and-bound. The [`engine`] simulates an annotator and records
//! learning curves.

pub mod annotator;
pub mod classifier;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod features;
pub mod io;
pub mod plane;
pub mod seed;
pub mod supervoxel;
pub mod uncertainty;
pub mod volume;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/quickstart.md")]
    mod quickstart {}
    #[doc = include_str!("../../../book/src/supervoxels.md")]
    mod supervoxels {}
    #[doc = include_str!("../../../book/src/uncertainty.md")]
    mod uncertainty {}
    #[doc = include_str!("../../../book/src/classifier.md")]
    mod classifier {}
    #[doc = include_str!("../../../book/src/plane_queries.md")]
    mod plane_queries {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
