//! Fixed benchmark scenes.

use clothground::synth::{generate_scene, GroundModel, SceneSpec};
use clothground::PointCloud;

/// Forest scene of roughly `side * side * 28` points plus `outliers` noise points.
pub fn forest(side: f64, ground: GroundModel, outliers: usize) -> PointCloud {
    let trees = (side * side / 83.0).round() as usize;
    generate_scene(&SceneSpec {
        extent_x: side,
        extent_y: side,
        ground,
        ground_density: 20.0,
        tree_count: trees,
        outlier_count: outliers,
        seed: 42,
        ..SceneSpec::default()
    })
    .expect("valid scene")
    .cloud
}
