//! Bare-earth terrain recovery from airborne LiDAR point clouds.
//!
//! The crate is organised along the processing chain:
//!
//! * [`geom`] and [`index`]: points, clouds, bounding boxes and an exact
//!   k-nearest-neighbour index.
//! * [`io`]: PLY/PCD readers and writers, multi-scan merging.
//! * [`denoise`]: statistical outlier removal.
//! * [`csf`]: cloth simulation filtering (ground / non-ground separation).
//! * [`terrain`]: normals, DTM rasters, meshes, profiles and reports.
//! * [`synth`]: synthetic forest scenes with ground truth and error metrics.
//! * [`pipeline`]: the in-memory composition of the stages above.

pub mod csf;
pub mod denoise;
mod error;
pub mod geom;
pub mod index;
pub mod io;
pub mod kv;
pub mod labels;
pub mod pipeline;
pub mod synth;
pub mod terrain;

pub use csf::{ClothState, CsfParams, CsfResult};
pub use denoise::SorParams;
pub use error::{Error, Result};
pub use geom::{Aabb, Point3, PointCloud};
pub use index::NeighborIndex;
pub use labels::{Label, LabelMask};
