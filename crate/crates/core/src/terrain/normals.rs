use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use crate::{index::NeighborIndex, Error, PointCloud, Result};

/// Neighbourhood size used for surface normals.
pub const DEFAULT_NORMAL_K: usize = 100;

/// One upward-facing unit normal per point.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalField {
    pub normals: Vec<[f64; 3]>,
    /// Points whose neighbourhood collapsed to a single location; they got `(0, 0, 1)`.
    pub degenerate: usize,
}

/// PCA normals: the eigenvector of the smallest eigenvalue of the covariance
/// of each point together with its `k` nearest neighbours.
///
/// Orientation: `z >= 0`; for horizontal normals `x >= 0`, then `y >= 0`.
pub fn estimate_normals(ground: &PointCloud, k: usize) -> Result<NormalField> {
    if k == 0 {
        return Err(Error::InvalidParameter("normal k must be >= 1".into()));
    }
    if ground.len() <= k {
        return Err(Error::InsufficientNeighbors {
            requested: k,
            available: ground.len().saturating_sub(1),
        });
    }
    let index = NeighborIndex::build(ground)?;
    let results: Vec<(Vector3<f64>, bool)> = (0..ground.len())
        .into_par_iter()
        .map(|i| {
            let nn = index.knn_of_point(i, k)?;
            let pts: Vec<Vector3<f64>> = std::iter::once(i)
                .chain(nn.iter().map(|n| n.index))
                .map(|j| {
                    let p = ground.point(j);
                    Vector3::new(p.x, p.y, p.z)
                })
                .collect();
            Ok(plane_normal(&pts))
        })
        .collect::<Result<_>>()?;
    let degenerate = results.iter().filter(|(_, d)| *d).count();
    if degenerate > 0 {
        log::warn!("{degenerate} point(s) have coincident neighbourhoods; normal set to +z");
    }
    Ok(NormalField {
        normals: results.into_iter().map(|(n, _)| [n.x, n.y, n.z]).collect(),
        degenerate,
    })
}

fn plane_normal(pts: &[Vector3<f64>]) -> (Vector3<f64>, bool) {
    let centroid = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    if cov.iter().all(|&v| v == 0.0) {
        return (Vector3::z(), true);
    }
    let eig = SymmetricEigen::new(cov / pts.len() as f64);
    let smallest = eig.eigenvalues.imin();
    let mut n = eig.eigenvectors.column(smallest).normalize();
    let flip = if n.z != 0.0 {
        n.z < 0.0
    } else if n.x != 0.0 {
        n.x < 0.0
    } else {
        n.y < 0.0
    };
    if flip {
        n = -n;
    }
    (n, false)
}
