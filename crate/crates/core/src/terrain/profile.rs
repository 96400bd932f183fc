use std::fmt::Write as _;

use crate::{Error, PointCloud, Result};

/// Straight cut line in the xy plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: (f64, f64),
    pub end: (f64, f64),
}

impl Segment {
    pub fn new(start: (f64, f64), end: (f64, f64)) -> Self {
        Segment { start, end }
    }

    pub fn length(&self) -> f64 {
        (self.end.0 - self.start.0).hypot(self.end.1 - self.start.1)
    }

    /// Parses `x1,y1,x2,y2`.
    pub fn parse(s: &str) -> Result<Self> {
        let v: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidParameter(format!("cut `{s}` is not x1,y1,x2,y2")))?;
        match v.as_slice() {
            [x1, y1, x2, y2] => Ok(Segment::new((*x1, *y1), (*x2, *y2))),
            _ => Err(Error::InvalidParameter(format!(
                "cut `{s}` is not x1,y1,x2,y2"
            ))),
        }
    }
}

/// Ground elevation along a cut: lowest z per distance bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub cut: Segment,
    pub half_width: f64,
    pub bin: f64,
    /// `(distance along the cut, elevation)`, distance strictly increasing.
    pub samples: Vec<(f64, f64)>,
    /// Highest minus lowest binned elevation.
    pub delta: f64,
}

impl Profile {
    /// Two whitespace-separated columns and a closing `delta_m=` line.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# distance_m elevation_m\n");
        for (d, z) in &self.samples {
            let _ = writeln!(s, "{d} {z}");
        }
        let _ = writeln!(s, "delta_m={}", self.delta);
        s
    }
}

/// Projects the points lying within `half_width` of the cut onto it and keeps
/// the minimum z of every `bin`-wide stretch.
pub fn extract_profile(
    ground: &PointCloud,
    cut: Segment,
    half_width: f64,
    bin: f64,
) -> Result<Profile> {
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "half width must be positive, got {half_width}"
        )));
    }
    if !(bin > 0.0 && bin.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "bin must be positive, got {bin}"
        )));
    }
    let len = cut.length();
    if len.is_nan() || len <= 0.0 {
        return Err(Error::InvalidParameter("cut has zero length".into()));
    }
    let (ux, uy) = (
        (cut.end.0 - cut.start.0) / len,
        (cut.end.1 - cut.start.1) / len,
    );
    let bins = ((len / bin).ceil() as usize).max(1);
    let mut lowest = vec![f64::INFINITY; bins];
    for p in ground {
        let (dx, dy) = (p.x - cut.start.0, p.y - cut.start.1);
        let along = dx * ux + dy * uy;
        let across = -dx * uy + dy * ux;
        if along < 0.0 || along > len || across.abs() > half_width {
            continue;
        }
        let b = ((along / bin) as usize).min(bins - 1);
        lowest[b] = lowest[b].min(p.z);
    }
    let samples: Vec<(f64, f64)> = lowest
        .iter()
        .enumerate()
        .filter(|(_, z)| z.is_finite())
        .map(|(i, &z)| ((i as f64 + 0.5) * bin, z))
        .collect();
    if samples.is_empty() {
        return Err(Error::EmptyCorridor);
    }
    let hi = samples
        .iter()
        .map(|s| s.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let lo = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    Ok(Profile {
        cut,
        half_width,
        bin,
        samples,
        delta: hi - lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Point3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn plane(f: impl Fn(f64, f64) -> f64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        PointCloud::new(
            (0..20000)
                .map(|_| {
                    let (x, y) = (rng.gen::<f64>() * 100.0, rng.gen::<f64>() * 20.0);
                    Point3::new(x, y, f(x, y))
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn flat_profile() {
        let p = extract_profile(
            &plane(|_, _| 4.0),
            Segment::new((0.0, 10.0), (100.0, 10.0)),
            1.0,
            1.0,
        )
        .unwrap();
        assert_eq!(p.delta, 0.0);
        assert!(p.samples.iter().all(|s| s.1 == 4.0));
        assert!(p.samples.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn ramp_delta_and_monotone() {
        let bin = 0.5;
        let p = extract_profile(
            &plane(|x, _| 0.4 * x),
            Segment::new((0.0, 10.0), (100.0, 10.0)),
            1.0,
            bin,
        )
        .unwrap();
        assert!((p.delta - 40.0).abs() <= 0.4 * bin + 1e-9, "{}", p.delta);
        assert!(p.samples.windows(2).all(|w| w[0].1 <= w[1].1));
    }

    #[test]
    fn envelope_ignores_points_above_ground() {
        let mut pts: Vec<Point3> = (0..100)
            .map(|i| Point3::new(i as f64 * 0.1, 0.0, 0.0))
            .collect();
        pts.push(Point3::new(5.0, 0.0, 25.0));
        let p = extract_profile(
            &PointCloud::new(pts).unwrap(),
            Segment::new((0.0, 0.0), (10.0, 0.0)),
            0.5,
            1.0,
        )
        .unwrap();
        assert_eq!(p.delta, 0.0);
    }

    #[test]
    fn corridor_outside_data() {
        let r = extract_profile(
            &plane(|_, _| 0.0),
            Segment::new((0.0, 500.0), (100.0, 500.0)),
            2.0,
            1.0,
        );
        assert!(matches!(r, Err(Error::EmptyCorridor)));
    }

    #[test]
    fn diagonal_cut_and_text() {
        let pts = vec![
            Point3::new(1.0, 1.0, 2.0),
            Point3::new(2.0, 2.0, 5.0),
            Point3::new(2.0, 0.0, 9.0),
        ];
        let p = extract_profile(
            &PointCloud::new(pts).unwrap(),
            Segment::new((0.0, 0.0), (3.0, 3.0)),
            0.1,
            1.0,
        )
        .unwrap();
        assert_eq!(p.samples.len(), 2);
        assert!((p.delta - 3.0).abs() < 1e-12);
        let text = p.to_text();
        assert!(text.trim_end().ends_with("delta_m=3"));
    }

    #[test]
    fn parse_cut() {
        assert_eq!(
            Segment::parse("1,2, 3,4").unwrap(),
            Segment::new((1.0, 2.0), (3.0, 4.0))
        );
        assert!(Segment::parse("1,2,3").is_err());
        assert!(Segment::parse("a,b,c,d").is_err());
    }
}
