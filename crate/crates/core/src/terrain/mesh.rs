use std::fmt::Write as _;

use super::DtmRaster;
use crate::{Error, Point3, Result};

/// Indexed triangle mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<[u32; 3]>,
}

/// One vertex per data cell (at the cell centre) and two triangles per 2x2
/// block of data cells. Blocks touching a no-data cell are left open.
pub fn dtm_to_mesh(dtm: &DtmRaster) -> Result<TriangleMesh> {
    let mut vertex_of = vec![u32::MAX; dtm.elevation.len()];
    let mut vertices = Vec::with_capacity(dtm.valid_cells());
    for r in 0..dtm.height {
        for c in 0..dtm.width {
            if let Some(z) = dtm.get(r, c) {
                let (x, y) = dtm.cell_center(r, c);
                vertex_of[r * dtm.width + c] = vertices.len() as u32;
                vertices.push(Point3::new(x, y, z));
            }
        }
    }
    if vertices.is_empty() {
        return Err(Error::AllNoData);
    }
    let mut faces = Vec::new();
    for r in 0..dtm.height.saturating_sub(1) {
        for c in 0..dtm.width.saturating_sub(1) {
            let i = r * dtm.width + c;
            let (a, b, d, e) = (
                vertex_of[i],
                vertex_of[i + 1],
                vertex_of[i + dtm.width],
                vertex_of[i + dtm.width + 1],
            );
            if [a, b, d, e].contains(&u32::MAX) {
                continue;
            }
            // row r is north of row r+1; keep counter-clockwise seen from above
            faces.push([d, b, a]);
            faces.push([d, e, b]);
        }
    }
    Ok(TriangleMesh { vertices, faces })
}

impl TriangleMesh {
    /// ASCII PLY with `vertex` and `face` elements.
    pub fn to_ply(&self) -> String {
        let mut s = String::new();
        s.push_str("ply\nformat ascii 1.0\n");
        let _ = writeln!(s, "element vertex {}", self.vertices.len());
        s.push_str("property double x\nproperty double y\nproperty double z\n");
        let _ = writeln!(s, "element face {}", self.faces.len());
        s.push_str("property list uchar int vertex_indices\nend_header\n");
        for v in &self.vertices {
            let _ = writeln!(s, "{} {} {}", v.x, v.y, v.z);
        }
        for f in &self.faces {
            let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse_cloud;

    fn raster(w: usize, h: usize, cells: Vec<Option<f64>>) -> DtmRaster {
        DtmRaster {
            origin_x: 0.0,
            origin_y: 0.0,
            cell_size: 1.0,
            width: w,
            height: h,
            elevation: cells,
        }
    }

    #[test]
    fn two_by_two() {
        let m = dtm_to_mesh(&raster(2, 2, vec![Some(0.0); 4])).unwrap();
        assert_eq!(m.vertices.len(), 4);
        assert_eq!(m.faces.len(), 2);
    }

    #[test]
    fn hole_blocks_triangles() {
        let m = dtm_to_mesh(&raster(2, 2, vec![Some(0.0), None, Some(1.0), Some(2.0)])).unwrap();
        assert_eq!(m.vertices.len(), 3);
        assert!(m.faces.is_empty());
    }

    #[test]
    fn full_raster_count() {
        for (n, mm) in [(3, 5), (7, 2), (10, 10), (1, 4)] {
            let m = dtm_to_mesh(&raster(mm, n, vec![Some(1.0); n * mm])).unwrap();
            assert_eq!(m.faces.len(), 2 * (n - 1) * (mm - 1));
            assert_eq!(m.vertices.len(), n * mm);
        }
    }

    #[test]
    fn all_nodata() {
        assert!(matches!(
            dtm_to_mesh(&raster(2, 1, vec![None, None])),
            Err(Error::AllNoData)
        ));
    }

    #[test]
    fn faces_point_up() {
        let m = dtm_to_mesh(&raster(3, 3, vec![Some(0.0); 9])).unwrap();
        for f in &m.faces {
            let [a, b, c] = f.map(|i| m.vertices[i as usize]);
            let (u, v) = (b - a, c - a);
            assert!(u.x * v.y - u.y * v.x > 0.0);
        }
    }

    #[test]
    fn ply_vertices_readable() {
        let m = dtm_to_mesh(&raster(
            2,
            2,
            vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0)],
        ))
        .unwrap();
        let cloud = parse_cloud(m.to_ply().as_bytes()).unwrap().cloud;
        assert_eq!(cloud.points(), &m.vertices[..]);
    }
}
