use std::path::{Path, PathBuf};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

use crate::{Error, Point3, PointCloud, Result};

/// Rigid transform of one scan into the common frame: `p' = R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub translation: [f64; 3],
    /// Unit quaternion `(w, x, y, z)`.
    pub rotation: [f64; 4],
}

const UNIT_TOLERANCE: f64 = 1e-9;

impl Pose {
    pub fn new(translation: [f64; 3], rotation: [f64; 4]) -> Result<Self> {
        let pose = Pose {
            translation,
            rotation,
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn identity() -> Self {
        Pose {
            translation: [0.0; 3],
            rotation: [1.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let norm = self.rotation.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm.is_nan() || (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::NonUnitQuaternion { norm });
        }
        Ok(())
    }

    fn unit_quaternion(&self) -> UnitQuaternion<f64> {
        let [w, x, y, z] = self.rotation;
        UnitQuaternion::new_unchecked(Quaternion::new(w, x, y, z))
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        let v = self.unit_quaternion() * Vector3::new(p.x, p.y, p.z);
        let [tx, ty, tz] = self.translation;
        Point3::new(v.x + tx, v.y + ty, v.z + tz)
    }

    /// `self` applied after `inner`.
    pub fn compose(&self, inner: &Pose) -> Pose {
        let q = self.unit_quaternion() * inner.unit_quaternion();
        let t = self.unit_quaternion() * Vector3::from(inner.translation)
            + Vector3::from(self.translation);
        Pose {
            translation: [t.x, t.y, t.z],
            rotation: [q.w, q.i, q.j, q.k],
        }
    }
}

/// Transforms every scan into the common frame and concatenates them in
/// input order.
pub fn merge_scans(scans: &[(PointCloud, Pose)]) -> Result<PointCloud> {
    for (_, pose) in scans {
        pose.validate()?;
    }
    let moved = scans
        .iter()
        .map(|(cloud, pose)| cloud.map_points(|p| pose.apply(p)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PointCloud::concat(&moved))
}

/// Parses a pose list: one `path tx ty tz qw qx qy qz` line per scan, `#`
/// comments. Relative paths are resolved against `base_dir`.
pub fn parse_pose_list(text: &str, base_dir: &Path) -> Result<Vec<(PathBuf, Pose)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        let bad = || {
            Error::InvalidParameter(format!(
                "pose list line {}: expected `path tx ty tz qw qx qy qz`",
                n + 1
            ))
        };
        if words.len() != 8 {
            return Err(bad());
        }
        let nums = words[1..]
            .iter()
            .map(|w| w.parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let pose = Pose::new(
            [nums[0], nums[1], nums[2]],
            [nums[3], nums[4], nums[5], nums[6]],
        )?;
        let path = Path::new(words[0]);
        let path = if path.is_absolute() {
            path.to_path_buf()
        } else {
            base_dir.join(path)
        };
        out.push((path, pose));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cloud(n: usize, offset: f64) -> PointCloud {
        PointCloud::new(
            (0..n)
                .map(|i| Point3::new(i as f64 + offset, 2.0 * i as f64, -(i as f64)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn identity_pose_is_noop() {
        let c = cloud(5, 0.3);
        assert_eq!(merge_scans(&[(c.clone(), Pose::identity())]).unwrap(), c);
    }

    #[test]
    fn quarter_turn_about_z() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let pose = Pose::new([0.0; 3], [h, 0.0, 0.0, h]).unwrap();
        let c = PointCloud::new(vec![Point3::new(1.0, 0.0, 0.0)]).unwrap();
        let p = merge_scans(&[(c, pose)]).unwrap().point(0);
        assert!(
            p.x.abs() < 1e-9 && (p.y - 1.0).abs() < 1e-9 && p.z.abs() < 1e-9,
            "{p:?}"
        );
    }

    #[test]
    fn concatenates_in_order() {
        let (a, b) = (cloud(3, 0.0), cloud(4, 100.0));
        let m =
            merge_scans(&[(a.clone(), Pose::identity()), (b.clone(), Pose::identity())]).unwrap();
        assert_eq!(m.len(), 7);
        assert_eq!(&m.points()[..3], a.points());
        assert_eq!(&m.points()[3..], b.points());
    }

    #[test]
    fn rejects_non_unit_quaternion() {
        assert!(matches!(
            Pose::new([0.0; 3], [1.0, 0.1, 0.0, 0.0]),
            Err(Error::NonUnitQuaternion { .. })
        ));
        let bad = Pose {
            translation: [0.0; 3],
            rotation: [2.0, 0.0, 0.0, 0.0],
        };
        assert!(merge_scans(&[(cloud(1, 0.0), bad)]).is_err());
    }

    #[test]
    fn pose_list() {
        let text = "# scans\nscan0.ply 1 2 3 1 0 0 0\n/abs/scan1.pcd 0 0 0 0 0 0 1 # upside down\n";
        let list = parse_pose_list(text, Path::new("/data")).unwrap();
        assert_eq!(list.len(), 2);
        assert_eq!(list[0].0, PathBuf::from("/data/scan0.ply"));
        assert_eq!(list[0].1.translation, [1.0, 2.0, 3.0]);
        assert_eq!(list[1].0, PathBuf::from("/abs/scan1.pcd"));
        assert!(parse_pose_list("a 1 2 3", Path::new(".")).is_err());
        assert!(parse_pose_list("a 0 0 0 1 1 0 0", Path::new(".")).is_err());
    }

    fn unit_quat() -> impl Strategy<Value = [f64; 4]> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter("non-degenerate", |q| {
                q.0.abs() + q.1.abs() + q.2.abs() + q.3.abs() > 0.1
            })
            .prop_map(|(w, x, y, z)| {
                let n = (w * w + x * x + y * y + z * z).sqrt();
                [w / n, x / n, y / n, z / n]
            })
    }

    proptest! {
        #[test]
        fn merge_commutes_with_rigid_motion(
            q1 in unit_quat(), q2 in unit_quat(), qg in unit_quat(),
            t in prop::array::uniform3(-50.0f64..50.0),
        ) {
            let scans = vec![
                (cloud(4, 0.0), Pose { translation: [1.0, -2.0, 0.5], rotation: q1 }),
                (cloud(3, 10.0), Pose { translation: [-3.0, 4.0, 2.0], rotation: q2 }),
            ];
            let global = Pose { translation: t, rotation: qg };
            let a = merge_scans(&scans).unwrap().map_points(|p| global.apply(p)).unwrap();
            let moved: Vec<(PointCloud, Pose)> = scans.iter().map(|(c, p)| (c.clone(), global.compose(p))).collect();
            let b = merge_scans(&moved).unwrap();
            for (p, q) in a.iter().zip(b.iter()) {
                prop_assert!(p.distance(q) < 1e-9);
            }
        }
    }
}
