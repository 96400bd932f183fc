//! Products derived from ground points: normals, elevation rasters, meshes,
//! cross-section profiles and classification reports.

mod dtm;
mod mesh;
mod normals;
mod profile;
mod report;

pub use dtm::{build_dtm, read_esri_ascii, DtmParams, DtmRaster, NODATA_VALUE};
pub use mesh::{dtm_to_mesh, TriangleMesh};
pub use normals::{estimate_normals, NormalField, DEFAULT_NORMAL_K};
pub use profile::{extract_profile, Profile, Segment};
pub use report::{report, ClassificationReport};
