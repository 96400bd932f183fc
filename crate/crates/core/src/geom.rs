//! Points, clouds and axis-aligned boxes.

use std::ops::{Add, Sub};

use crate::{Error, Result};

/// A point in meters, right-handed, z up.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance_squared(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        self.distance_squared(other).sqrt()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Point3 {
    fn from([x, y, z]: [f64; 3]) -> Self {
        Point3 { x, y, z }
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

/// An ordered, immutable set of finite points with optional per-point intensity.
///
/// Index `i` names the same point for the lifetime of the cloud; stages that
/// select points return masks or index maps instead of editing the cloud.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point3>,
    intensity: Option<Vec<f32>>,
}

impl PointCloud {
    /// Builds a cloud, rejecting any point with a NaN or infinite coordinate.
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        let bad = points.iter().filter(|p| !p.is_finite()).count();
        if bad > 0 {
            return Err(Error::NonFiniteCoordinate { count: bad });
        }
        Ok(PointCloud {
            points,
            intensity: None,
        })
    }

    pub fn with_intensity(points: Vec<Point3>, intensity: Vec<f32>) -> Result<Self> {
        if intensity.len() != points.len() {
            return Err(Error::LengthMismatch {
                expected: points.len(),
                actual: intensity.len(),
            });
        }
        let mut cloud = PointCloud::new(points)?;
        cloud.intensity = Some(intensity);
        Ok(cloud)
    }

    pub fn empty() -> Self {
        PointCloud::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn point(&self, i: usize) -> Point3 {
        self.points[i]
    }

    pub fn intensity(&self) -> Option<&[f32]> {
        self.intensity.as_deref()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point3> {
        self.points.iter()
    }

    /// Applies `f` to every point. Intensities are carried over.
    pub fn map_points(&self, f: impl Fn(&Point3) -> Point3) -> Result<PointCloud> {
        let mut out = PointCloud::new(self.points.iter().map(f).collect())?;
        out.intensity = self.intensity.clone();
        Ok(out)
    }

    /// Subcloud made of the listed indices, in the listed order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            intensity: self
                .intensity
                .as_ref()
                .map(|v| indices.iter().map(|&i| v[i]).collect()),
        }
    }

    /// Concatenation in argument order. Intensity survives only if every part has it.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a PointCloud>) -> PointCloud {
        let mut points = Vec::new();
        let mut intensity = Some(Vec::new());
        for part in parts {
            points.extend_from_slice(&part.points);
            intensity = match (intensity, &part.intensity) {
                (Some(mut acc), Some(v)) => {
                    acc.extend_from_slice(v);
                    Some(acc)
                }
                _ => None,
            };
        }
        if points.is_empty() {
            intensity = None;
        }
        PointCloud { points, intensity }
    }

    pub fn bounding_box(&self) -> Result<Aabb> {
        Aabb::from_points(&self.points)
    }
}

impl<'a> IntoIterator for &'a PointCloud {
    type Item = &'a Point3;
    type IntoIter = std::slice::Iter<'a, Point3>;
    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}

/// Axis-aligned bounding box with `min <= max` on every axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn from_points(points: &[Point3]) -> Result<Self> {
        let first = *points.first().ok_or(Error::EmptyCloud)?;
        let mut bb = Aabb {
            min: first,
            max: first,
        };
        for p in &points[1..] {
            bb.min.x = bb.min.x.min(p.x);
            bb.min.y = bb.min.y.min(p.y);
            bb.min.z = bb.min.z.min(p.z);
            bb.max.x = bb.max.x.max(p.x);
            bb.max.y = bb.max.y.max(p.y);
            bb.max.z = bb.max.z.max(p.z);
        }
        Ok(bb)
    }

    pub fn extent(&self) -> Point3 {
        self.max - self.min
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (self.min.x..=self.max.x).contains(&p.x)
            && (self.min.y..=self.max.y).contains(&p.y)
            && (self.min.z..=self.max.z).contains(&p.z)
    }

    pub fn corners(&self) -> [Point3; 8] {
        let (a, b) = (self.min, self.max);
        [
            Point3::new(a.x, a.y, a.z),
            Point3::new(b.x, a.y, a.z),
            Point3::new(a.x, b.y, a.z),
            Point3::new(b.x, b.y, a.z),
            Point3::new(a.x, a.y, b.z),
            Point3::new(b.x, a.y, b.z),
            Point3::new(a.x, b.y, b.z),
            Point3::new(b.x, b.y, b.z),
        ]
    }
}

/// Tight bounds of a non-empty cloud.
pub fn bounding_box(cloud: &PointCloud) -> Result<Aabb> {
    cloud.bounding_box()
}
