//! Synthetic forest scenes with ground truth, and filter error metrics.
//!
//! Scenes are fully determined by their [`SceneSpec`] (seed included). Ground
//! is sampled uniformly over the extent on one of a few analytic surfaces
//! with 2 cm vertical noise, tree crowns are jittered ellipsoid shells held
//! up by (unsampled) trunks, and outliers are uniform in an inflated box.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::{kv::KeyValues, Error, Label, LabelMask, Point3, PointCloud, Result};

/// Vertical noise of ground returns, meters.
pub const GROUND_NOISE_SIGMA: f64 = 0.02;
/// Relative radial jitter of crown shell points.
const CROWN_JITTER: f64 = 0.05;
/// Vertical semi-axis of a crown relative to its horizontal radius.
const CROWN_ELONGATION: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GroundModel {
    Flat {
        z0: f64,
    },
    /// Rises along +x: `z = slope * x`.
    Ramp {
        slope: f64,
    },
    /// Cosine-shaped valley running along y through the middle of the scene.
    Ravine {
        depth: f64,
        width: f64,
    },
    /// Sum of Gaussian bumps at seeded random centres.
    GaussianHills {
        count: usize,
        amplitude: f64,
        radius: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub extent_x: f64,
    pub extent_y: f64,
    pub ground: GroundModel,
    /// Ground points per square meter.
    pub ground_density: f64,
    pub tree_count: usize,
    pub trunk_height: (f64, f64),
    pub crown_radius: (f64, f64),
    /// Crown points per square meter of crown surface.
    pub crown_density: f64,
    pub outlier_count: usize,
    /// Horizontal and vertical inflation of the scene box that bounds outliers.
    pub outlier_margin: (f64, f64),
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            extent_x: 100.0,
            extent_y: 100.0,
            ground: GroundModel::Flat { z0: 0.0 },
            ground_density: 1.0,
            tree_count: 0,
            trunk_height: (6.0, 12.0),
            crown_radius: (2.0, 4.0),
            crown_density: 4.0,
            outlier_count: 0,
            outlier_margin: (20.0, 60.0),
            seed: 0,
        }
    }
}

/// A generated cloud and its true labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneTruth {
    pub cloud: PointCloud,
    pub truth: LabelMask,
}

/// Ground-filter error rates. Outliers in the truth are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    /// True ground not labelled ground.
    pub type1: f64,
    /// True non-ground labelled ground.
    pub type2: f64,
    /// Misclassified fraction of all ground and non-ground points.
    pub total: f64,
    pub ground_total: usize,
    pub non_ground_total: usize,
    pub ground_rejected: usize,
    pub non_ground_accepted: usize,
}

impl GroundModel {
    fn elevation(&self, x: f64, y: f64, spec: &SceneSpec, hills: &[(f64, f64)]) -> f64 {
        match *self {
            GroundModel::Flat { z0 } => z0,
            GroundModel::Ramp { slope } => slope * x,
            GroundModel::Ravine { depth, width } => {
                let u = (x - spec.extent_x / 2.0) / (width / 2.0);
                if u.abs() >= 1.0 {
                    0.0
                } else {
                    -depth * 0.5 * (1.0 + (PI * u).cos())
                }
            }
            GroundModel::GaussianHills {
                amplitude, radius, ..
            } => hills
                .iter()
                .map(|&(cx, cy)| {
                    let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                    amplitude * (-d2 / (2.0 * radius * radius)).exp()
                })
                .sum(),
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if !(self.extent_x > 0.0 && self.extent_y > 0.0) {
            return bad("extent must be positive".into());
        }
        if !(self.ground_density >= 0.0 && self.crown_density >= 0.0) {
            return bad("densities must be non-negative".into());
        }
        let (tlo, thi) = self.trunk_height;
        let (rlo, rhi) = self.crown_radius;
        if self.tree_count > 0 {
            if !(0.0 <= tlo && tlo <= thi) {
                return bad("trunk height range must satisfy 0 <= min <= max".into());
            }
            if !(0.0 < rlo && rlo <= rhi) {
                return bad("crown radius range must satisfy 0 < min <= max".into());
            }
            if 2.0 * rhi >= self.extent_x.min(self.extent_y) {
                return bad("crowns do not fit inside the extent".into());
            }
        }
        if !(self.outlier_margin.0 >= 0.0 && self.outlier_margin.1 >= 0.0) {
            return bad("outlier margins must be non-negative".into());
        }
        match self.ground {
            GroundModel::Ravine { depth, width } if !(depth >= 0.0 && width > 0.0) => {
                bad("ravine needs depth >= 0 and width > 0".into())
            }
            GroundModel::GaussianHills { radius, .. } if radius.is_nan() || radius <= 0.0 => {
                bad("hill radius must be positive".into())
            }
            _ => Ok(()),
        }
    }

    /// Number of ground points the scene asks for.
    pub fn ground_point_count(&self) -> usize {
        (self.ground_density * self.extent_x * self.extent_y).round() as usize
    }

    /// Reads a spec from `key = value` text. Unset keys keep their defaults.
    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        const KEYS: &[&str] = &[
            "extent_x",
            "extent_y",
            "ground",
            "ground_z0",
            "ramp_slope",
            "ravine_depth",
            "ravine_width",
            "hills_count",
            "hills_amplitude",
            "hills_radius",
            "ground_density",
            "tree_count",
            "trunk_height_min",
            "trunk_height_max",
            "crown_radius_min",
            "crown_radius_max",
            "crown_density",
            "outlier_count",
            "outlier_margin_xy",
            "outlier_margin_z",
            "seed",
        ];
        if let Some(k) = kv.unknown_key(KEYS) {
            return Err(Error::InvalidSpec(format!("unknown key `{k}`")));
        }
        let mut s = SceneSpec::default();
        macro_rules! set {
            ($key:literal, $field:expr) => {
                if let Some(v) = kv.parse_value($key)? {
                    $field = v;
                }
            };
        }
        set!("extent_x", s.extent_x);
        set!("extent_y", s.extent_y);
        set!("ground_density", s.ground_density);
        set!("tree_count", s.tree_count);
        set!("trunk_height_min", s.trunk_height.0);
        set!("trunk_height_max", s.trunk_height.1);
        set!("crown_radius_min", s.crown_radius.0);
        set!("crown_radius_max", s.crown_radius.1);
        set!("crown_density", s.crown_density);
        set!("outlier_count", s.outlier_count);
        set!("outlier_margin_xy", s.outlier_margin.0);
        set!("outlier_margin_z", s.outlier_margin.1);
        set!("seed", s.seed);
        let f = |key: &str, default: f64| -> Result<f64> {
            Ok(kv.parse_value(key)?.unwrap_or(default))
        };
        s.ground = match kv.get("ground").unwrap_or("flat") {
            "flat" => GroundModel::Flat {
                z0: f("ground_z0", 0.0)?,
            },
            "ramp" => GroundModel::Ramp {
                slope: f("ramp_slope", 0.4)?,
            },
            "ravine" => GroundModel::Ravine {
                depth: f("ravine_depth", 40.0)?,
                width: f("ravine_width", 80.0)?,
            },
            "hills" => GroundModel::GaussianHills {
                count: kv.parse_value("hills_count")?.unwrap_or(5),
                amplitude: f("hills_amplitude", 5.0)?,
                radius: f("hills_radius", 10.0)?,
            },
            other => {
                return Err(Error::InvalidSpec(format!(
                    "unknown ground model `{other}`"
                )))
            }
        };
        s.validate()?;
        Ok(s)
    }
}

/// Samples the scene. The same spec always yields the same cloud, bit for bit.
pub fn generate_scene(spec: &SceneSpec) -> Result<SceneTruth> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, GROUND_NOISE_SIGMA).expect("valid sigma");
    let jitter = Normal::new(0.0, CROWN_JITTER).expect("valid sigma");
    let unit = Normal::new(0.0, 1.0).expect("valid sigma");

    let hills: Vec<(f64, f64)> = match spec.ground {
        GroundModel::GaussianHills { count, .. } => (0..count)
            .map(|_| {
                (
                    rng.gen::<f64>() * spec.extent_x,
                    rng.gen::<f64>() * spec.extent_y,
                )
            })
            .collect(),
        _ => Vec::new(),
    };
    let elevation = |x: f64, y: f64| spec.ground.elevation(x, y, spec, &hills);

    let mut points = Vec::new();
    let mut labels = Vec::new();

    for _ in 0..spec.ground_point_count() {
        let x = rng.gen::<f64>() * spec.extent_x;
        let y = rng.gen::<f64>() * spec.extent_y;
        points.push(Point3::new(x, y, elevation(x, y) + noise.sample(&mut rng)));
        labels.push(Label::Ground);
    }

    for _ in 0..spec.tree_count {
        let radius = rng.gen_range(spec.crown_radius.0..=spec.crown_radius.1);
        let trunk = rng.gen_range(spec.trunk_height.0..=spec.trunk_height.1);
        // rejection until the crown footprint is inside the extent
        let (tx, ty) = loop {
            let x = rng.gen::<f64>() * spec.extent_x;
            let y = rng.gen::<f64>() * spec.extent_y;
            if x >= radius
                && x <= spec.extent_x - radius
                && y >= radius
                && y <= spec.extent_y - radius
            {
                break (x, y);
            }
        };
        let vertical = radius * CROWN_ELONGATION;
        let centre = Point3::new(tx, ty, elevation(tx, ty) + trunk + vertical);
        let n = (spec.crown_density * ellipsoid_area(radius, vertical)).round() as usize;
        for _ in 0..n {
            let (dx, dy, dz) = loop {
                let v: [f64; 3] = [
                    unit.sample(&mut rng),
                    unit.sample(&mut rng),
                    unit.sample(&mut rng),
                ];
                let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if norm > 1e-12 {
                    break (v[0] / norm, v[1] / norm, v[2] / norm);
                }
            };
            let scale = 1.0 + jitter.sample(&mut rng);
            points.push(Point3::new(
                centre.x + dx * radius * scale,
                centre.y + dy * radius * scale,
                centre.z + dz * vertical * scale,
            ));
            labels.push(Label::NonGround);
        }
    }

    if spec.outlier_count > 0 {
        let (lo, hi) = if points.is_empty() {
            (
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(spec.extent_x, spec.extent_y, 0.0),
            )
        } else {
            let bb = crate::geom::Aabb::from_points(&points)?;
            (bb.min, bb.max)
        };
        let (mxy, mz) = spec.outlier_margin;
        for _ in 0..spec.outlier_count {
            points.push(Point3::new(
                lo.x - mxy + rng.gen::<f64>() * (hi.x - lo.x + 2.0 * mxy),
                lo.y - mxy + rng.gen::<f64>() * (hi.y - lo.y + 2.0 * mxy),
                lo.z - mz + rng.gen::<f64>() * (hi.z - lo.z + 2.0 * mz),
            ));
            labels.push(Label::Outlier);
        }
    }

    Ok(SceneTruth {
        cloud: PointCloud::new(points)?,
        truth: LabelMask::new(labels),
    })
}

/// Knud Thomsen's approximation of a spheroid's surface area.
fn ellipsoid_area(horizontal: f64, vertical: f64) -> f64 {
    const P: f64 = 1.6075;
    let (a, c) = (horizontal.powf(P), vertical.powf(P));
    4.0 * PI * ((a * a + 2.0 * a * c) / 3.0).powf(1.0 / P)
}

/// Type I, type II and total error of `predicted` against the scene truth.
///
/// A true ground point counts as rejected whenever it is not predicted
/// `Ground` (an `Outlier` prediction included).
pub fn evaluate(truth: &SceneTruth, predicted: &LabelMask) -> Result<ErrorMetrics> {
    predicted.expect_len(truth.truth.len())?;
    let (mut ng, mut nng, mut rejected, mut accepted) = (0usize, 0usize, 0usize, 0usize);
    for (t, p) in truth.truth.iter().zip(predicted.iter()) {
        match t {
            Label::Ground => {
                ng += 1;
                if p != Label::Ground {
                    rejected += 1;
                }
            }
            Label::NonGround => {
                nng += 1;
                if p == Label::Ground {
                    accepted += 1;
                }
            }
            _ => {}
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(ErrorMetrics {
        type1: ratio(rejected, ng),
        type2: ratio(accepted, nng),
        total: ratio(rejected + accepted, ng + nng),
        ground_total: ng,
        non_ground_total: nng,
        ground_rejected: rejected,
        non_ground_accepted: accepted,
    })
}
