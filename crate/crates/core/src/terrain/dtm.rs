use std::fmt::Write as _;

use rayon::prelude::*;

use crate::{index::KdTree, Error, PointCloud, Result};

/// Sentinel written for empty cells in ESRI ASCII grids.
pub const NODATA_VALUE: f64 = -9999.0;

/// Points closer than this to a cell centre set the cell value outright.
const COINCIDENT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtmParams {
    pub cell_size: f64,
    pub idw_power: f64,
    /// Defaults to three cells.
    pub search_radius: Option<f64>,
}

impl Default for DtmParams {
    fn default() -> Self {
        DtmParams {
            cell_size: 1.0,
            idw_power: 2.0,
            search_radius: None,
        }
    }
}

impl DtmParams {
    pub fn with_cell_size(cell_size: f64) -> Self {
        DtmParams {
            cell_size,
            ..DtmParams::default()
        }
    }

    pub fn radius(&self) -> f64 {
        self.search_radius.unwrap_or(3.0 * self.cell_size)
    }
}

/// Elevation grid. Row 0 is the northern (max y) edge; `origin_*` is the
/// lower-left corner of the lower-left cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DtmRaster {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub width: usize,
    pub height: usize,
    pub elevation: Vec<Option<f64>>,
}

impl DtmRaster {
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.elevation[row * self.width + col]
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin_x + (col as f64 + 0.5) * self.cell_size,
            self.origin_y + ((self.height - 1 - row) as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn valid_cells(&self) -> usize {
        self.elevation.iter().filter(|v| v.is_some()).count()
    }

    /// ESRI ASCII grid, rows north to south.
    pub fn to_esri_ascii(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "ncols {}", self.width);
        let _ = writeln!(s, "nrows {}", self.height);
        let _ = writeln!(s, "xllcorner {}", self.origin_x);
        let _ = writeln!(s, "yllcorner {}", self.origin_y);
        let _ = writeln!(s, "cellsize {}", self.cell_size);
        let _ = writeln!(s, "NODATA_value {NODATA_VALUE}");
        for row in self.elevation.chunks(self.width) {
            let cells: Vec<String> = row
                .iter()
                .map(|v| v.unwrap_or(NODATA_VALUE).to_string())
                .collect();
            s.push_str(&cells.join(" "));
            s.push('\n');
        }
        s
    }
}

/// Parses an ESRI ASCII grid (corner-registered).
pub fn read_esri_ascii(text: &str) -> Result<DtmRaster> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let mut header = std::collections::HashMap::new();
    for _ in 0..6 {
        let line = lines
            .next()
            .ok_or_else(|| Error::MalformedHeader("grid header too short".into()))?;
        let mut w = line.split_whitespace();
        let (Some(k), Some(v)) = (w.next(), w.next()) else {
            return Err(Error::MalformedHeader(format!(
                "bad grid header line `{line}`"
            )));
        };
        let v: f64 = v
            .parse()
            .map_err(|_| Error::MalformedHeader(format!("bad grid header value `{v}`")))?;
        header.insert(k.to_ascii_lowercase(), v);
    }
    let get = |k: &str| {
        header
            .get(k)
            .copied()
            .ok_or_else(|| Error::MalformedHeader(format!("grid header lacks {k}")))
    };
    let width = get("ncols")? as usize;
    let height = get("nrows")? as usize;
    let nodata = get("nodata_value")?;
    let mut elevation = Vec::with_capacity(width * height);
    for (r, line) in lines.take(height).enumerate() {
        let before = elevation.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::MalformedBody(format!("row {r}: bad value `{tok}`")))?;
            elevation.push(if v == nodata { None } else { Some(v) });
        }
        if elevation.len() - before != width {
            return Err(Error::MalformedBody(format!(
                "row {r} does not have {width} cells"
            )));
        }
    }
    if elevation.len() != width * height {
        return Err(Error::TruncatedBody {
            expected: height,
            read: elevation.len() / width.max(1),
        });
    }
    Ok(DtmRaster {
        origin_x: get("xllcorner")?,
        origin_y: get("yllcorner")?,
        cell_size: get("cellsize")?,
        width,
        height,
        elevation,
    })
}

/// Inverse-distance-weighted raster over the xy bounds of `ground`.
///
/// Each cell averages the z of ground points within the search radius of its
/// centre (horizontal distance) with weights `1 / d^power`. Cells without a
/// point in range are no-data.
pub fn build_dtm(ground: &PointCloud, params: &DtmParams) -> Result<DtmRaster> {
    let cell = params.cell_size;
    if !(cell.is_finite() && cell > 0.0) {
        return Err(Error::InvalidCellSize(cell));
    }
    let radius = params.radius();
    if radius.is_nan() || radius < cell {
        return Err(Error::InvalidParameter(format!(
            "search radius {radius} is smaller than the cell size {cell}"
        )));
    }
    if !(params.idw_power.is_finite() && params.idw_power >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "IDW power must be non-negative, got {}",
            params.idw_power
        )));
    }
    let bb = ground.bounding_box()?;
    let ext = bb.extent();
    let width = (ext.x / cell).floor() as usize + 1;
    let height = (ext.y / cell).floor() as usize + 1;
    let tree = KdTree::<2>::new(ground.iter().map(|p| [p.x, p.y]).collect());
    let mut raster = DtmRaster {
        origin_x: bb.min.x,
        origin_y: bb.min.y,
        cell_size: cell,
        width,
        height,
        elevation: vec![None; width * height],
    };
    let centers: Vec<(f64, f64)> = (0..height)
        .flat_map(|r| (0..width).map(move |c| (r, c)))
        .map(|(r, c)| raster.cell_center(r, c))
        .collect();
    raster.elevation = centers
        .par_iter()
        .map(|&(x, y)| {
            let nn = tree.within_radius(&[x, y], radius);
            idw(&nn, |i| ground.point(i).z, params.idw_power)
        })
        .collect();
    Ok(raster)
}

/// Weighted mean written as `z_ref + sum(w (z - z_ref)) / sum(w)` so constant
/// inputs come back exactly, then clamped to the input range.
fn idw(nn: &[crate::index::Neighbor], z: impl Fn(usize) -> f64, power: f64) -> Option<f64> {
    let first = nn.first()?;
    let reference = z(first.index);
    let (mut lo, mut hi) = (reference, reference);
    let mut coincident = (0.0, 0usize);
    let (mut num, mut den) = (0.0, 0.0);
    for n in nn {
        let zi = z(n.index);
        lo = lo.min(zi);
        hi = hi.max(zi);
        if n.distance < COINCIDENT {
            coincident.0 += zi - reference;
            coincident.1 += 1;
            continue;
        }
        let w = n.distance.powf(-power);
        num += w * (zi - reference);
        den += w;
    }
    let v = if coincident.1 > 0 {
        reference + coincident.0 / coincident.1 as f64
    } else {
        reference + num / den
    };
    Some(v.clamp(lo, hi))
}
