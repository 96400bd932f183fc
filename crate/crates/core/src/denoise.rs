//! Statistical outlier removal.
//!
//! Every point gets the mean distance `d_i` to its `k` nearest neighbours
//! (itself excluded). With `mu` and `s` the mean and population standard
//! deviation of all `d_i`, a point is an outlier iff `d_i > mu + sigma * s`.
//! The test is one-sided: unusually dense points are never rejected.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::{index::NeighborIndex, Error, Label, LabelMask, PointCloud, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SorParams {
    /// Neighbours averaged per point.
    pub k: usize,
    /// Multiplier on the standard deviation of mean distances.
    pub sigma: f64,
}

impl Default for SorParams {
    fn default() -> Self {
        SorParams { k: 20, sigma: 1.2 }
    }
}

impl SorParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("sor k must be >= 1".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sor sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Per-point statistics behind an outlier mask.
#[derive(Debug, Clone)]
pub struct SorStats {
    pub mean_distances: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
    pub threshold: f64,
}

/// Mean k-NN distance of every point, self excluded.
pub fn mean_neighbor_distances(cloud: &PointCloud, k: usize) -> Result<Vec<f64>> {
    if cloud.len() <= k {
        return Err(Error::InsufficientNeighbors {
            requested: k,
            available: cloud.len().saturating_sub(1),
        });
    }
    let index = NeighborIndex::build(cloud)?;
    (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let nn = index.knn_of_point(i, k)?;
            Ok(nn.iter().map(|n| n.distance).sum::<f64>() / k as f64)
        })
        .collect()
}

/// Mean, population standard deviation and cut-off. Sequential so the
/// floating-point reduction order never depends on the thread pool.
fn summarize(mean_distances: Vec<f64>, sigma: f64) -> SorStats {
    let n = mean_distances.len() as f64;
    let mean = mean_distances.iter().sum::<f64>() / n;
    let var = mean_distances
        .iter()
        .map(|d| (d - mean) * (d - mean))
        .sum::<f64>()
        / n;
    let std_dev = var.sqrt();
    SorStats {
        mean_distances,
        mean,
        std_dev,
        threshold: mean + sigma * std_dev,
    }
}

pub fn sor_stats(cloud: &PointCloud, params: &SorParams) -> Result<SorStats> {
    params.validate()?;
    Ok(summarize(
        mean_neighbor_distances(cloud, params.k)?,
        params.sigma,
    ))
}

/// Labels each point `Outlier` or `Unlabeled`.
pub fn statistical_outlier_removal(cloud: &PointCloud, params: &SorParams) -> Result<LabelMask> {
    let stats = sor_stats(cloud, params)?;
    Ok(stats
        .mean_distances
        .iter()
        .map(|&d| {
            if d > stats.threshold {
                Label::Outlier
            } else {
                Label::Unlabeled
            }
        })
        .collect())
}

/// Points whose label is in `keep`, in original order, together with the
/// original index of every kept point.
pub fn apply_mask(
    cloud: &PointCloud,
    mask: &LabelMask,
    keep: &[Label],
) -> Result<(PointCloud, Vec<usize>)> {
    mask.expect_len(cloud.len())?;
    let keep: HashSet<Label> = keep.iter().copied().collect();
    let index_map: Vec<usize> = mask
        .iter()
        .enumerate()
        .filter(|(_, l)| keep.contains(l))
        .map(|(i, _)| i)
        .collect();
    Ok((cloud.select(&index_map), index_map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Point3;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// All-pairs reference implementation.
    pub(crate) fn brute_sor(points: &[Point3], k: usize, sigma: f64) -> Vec<bool> {
        let d: Vec<f64> = (0..points.len())
            .map(|i| {
                let mut ds: Vec<(f64, usize)> = (0..points.len())
                    .filter(|&j| j != i)
                    .map(|j| (points[i].distance_squared(&points[j]), j))
                    .collect();
                ds.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                ds[..k].iter().map(|(d2, _)| d2.sqrt()).sum::<f64>() / k as f64
            })
            .collect();
        let n = d.len() as f64;
        let mu = d.iter().sum::<f64>() / n;
        let s = (d.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n).sqrt();
        d.iter().map(|&x| x > mu + sigma * s).collect()
    }

    fn cloud(points: Vec<Point3>) -> PointCloud {
        PointCloud::new(points).unwrap()
    }

    fn outliers(mask: &LabelMask) -> Vec<usize> {
        mask.indices_of(Label::Outlier)
    }

    #[test]
    fn defaults() {
        let p = SorParams::default();
        assert_eq!(p.k, 20);
        assert_eq!(p.sigma, 1.2);
    }

    #[test]
    fn far_point_on_a_line() {
        let mut pts: Vec<Point3> = (0..10).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        pts.push(Point3::new(1000.0, 0.0, 0.0));
        let mask =
            statistical_outlier_removal(&cloud(pts), &SorParams { k: 2, sigma: 1.2 }).unwrap();
        assert_eq!(outliers(&mask), vec![10]);
    }

    #[test]
    fn lattice_matches_oracle() {
        let mut pts = Vec::new();
        for x in 0..3 {
            for y in 0..3 {
                for z in 0..3 {
                    pts.push(Point3::new(x as f64, y as f64, z as f64));
                }
            }
        }
        let params = SorParams { k: 6, sigma: 1.2 };
        let mask = statistical_outlier_removal(&cloud(pts.clone()), &params).unwrap();
        let want = brute_sor(&pts, 6, 1.2);
        let got: Vec<bool> = mask.iter().map(|l| l == Label::Outlier).collect();
        assert_eq!(got, want);
        // the 8 corners have the largest mean distance (1 + 1 + 1 + 3*sqrt2)/6
        let stats = sor_stats(&cloud(pts), &params).unwrap();
        let corner = (3.0 + 3.0 * 2f64.sqrt()) / 6.0;
        assert!((stats.mean_distances[0] - corner).abs() < 1e-12);
        assert!((stats.mean_distances[13] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_ring_has_no_outliers() {
        // every point sees the same neighbourhood
        let n = 60;
        let pts: Vec<Point3> = (0..n)
            .map(|i| {
                let a = i as f64 * std::f64::consts::TAU / n as f64;
                Point3::new(10.0 * a.cos(), 10.0 * a.sin(), 0.0)
            })
            .collect();
        let stats = sor_stats(&cloud(pts.clone()), &SorParams { k: 4, sigma: 1.2 }).unwrap();
        assert!(stats.std_dev < 1e-12);
        let mask =
            statistical_outlier_removal(&cloud(pts), &SorParams { k: 4, sigma: 1.2 }).unwrap();
        assert!(outliers(&mask).is_empty());
    }

    #[test]
    fn constant_distances_no_outliers() {
        // exact grid on integer coordinates wrapped into a torus-free line of equal spacing
        let pts: Vec<Point3> = (0..8)
            .map(|i| Point3::new(0.0, 0.0, (i % 2) as f64))
            .collect();
        let mask =
            statistical_outlier_removal(&cloud(pts), &SorParams { k: 3, sigma: 1.2 }).unwrap();
        assert!(outliers(&mask).is_empty());
    }

    #[test]
    fn too_few_points() {
        let pts: Vec<Point3> = (0..20).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        assert!(matches!(
            statistical_outlier_removal(&cloud(pts), &SorParams::default()),
            Err(Error::InsufficientNeighbors { .. })
        ));
    }

    #[test]
    fn invalid_params() {
        let c = cloud(vec![Point3::default(); 3]);
        assert!(statistical_outlier_removal(&c, &SorParams { k: 0, sigma: 1.0 }).is_err());
        assert!(statistical_outlier_removal(&c, &SorParams { k: 1, sigma: 0.0 }).is_err());
    }

    #[test]
    fn apply_mask_identity_and_subset() {
        let c = cloud(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.0),
        ]);
        let m = LabelMask::new(vec![Label::Outlier, Label::Unlabeled, Label::Outlier]);
        let (all, map) = apply_mask(&c, &m, &Label::ALL).unwrap();
        assert_eq!(all, c);
        assert_eq!(map, vec![0, 1, 2]);
        let (sub, map) = apply_mask(&c, &m, &[Label::Unlabeled]).unwrap();
        assert_eq!(sub.points(), &[Point3::new(1.0, 0.0, 0.0)]);
        assert_eq!(map, vec![1]);
        assert!(matches!(
            apply_mask(&c, &LabelMask::filled(2, Label::Ground), &[Label::Ground]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn apply_mask_counts_match_histogram() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Point3> = (0..300).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let c = cloud(pts);
        let m: LabelMask = (0..300).map(|_| Label::ALL[rng.gen_range(0..4)]).collect();
        let counts = m.counts();
        for l in Label::ALL {
            let (sub, map) = apply_mask(&c, &m, &[l]).unwrap();
            assert_eq!(sub.len(), counts.get(l));
            assert!(map.windows(2).all(|w| w[0] < w[1]));
            assert!(map.iter().all(|&i| m.get(i) == l));
        }
    }

    #[test]
    fn random_clouds_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..5 {
            let n = rng.gen_range(30..300);
            let mut pts: Vec<Point3> = (0..n)
                .map(|_| Point3::new(rng.gen(), rng.gen(), rng.gen::<f64>() * 0.1))
                .collect();
            for _ in 0..3 {
                pts.push(Point3::new(
                    rng.gen::<f64>() * 5.0,
                    rng.gen::<f64>() * 5.0,
                    3.0,
                ));
            }
            let k = rng.gen_range(1..15);
            let params = SorParams { k, sigma: 1.2 };
            let got: Vec<bool> = statistical_outlier_removal(&cloud(pts.clone()), &params)
                .unwrap()
                .iter()
                .map(|l| l == Label::Outlier)
                .collect();
            assert_eq!(got, brute_sor(&pts, k, 1.2));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn lower_sigma_flags_superset(
            pts in prop::collection::vec((0.0f64..20.0, 0.0f64..20.0, 0.0f64..3.0), 30..120),
            s1 in 0.1f64..3.0,
            ds in 0.0f64..2.0,
        ) {
            let c = cloud(pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect());
            let lo = statistical_outlier_removal(&c, &SorParams { k: 8, sigma: s1 }).unwrap();
            let hi = statistical_outlier_removal(&c, &SorParams { k: 8, sigma: s1 + ds }).unwrap();
            for i in 0..c.len() {
                if hi.get(i) == Label::Outlier {
                    prop_assert_eq!(lo.get(i), Label::Outlier);
                }
            }
        }

        // power-of-two scale and integer shifts are exact in binary floating point
        #[test]
        fn invariant_under_exact_similarity(
            pts in prop::collection::vec((-64i32..64, -64i32..64, -16i32..16), 30..120),
            shift in (-1000i32..1000, -1000i32..1000, -100i32..100),
            scale_pow in -3i32..4,
            swap in any::<bool>(),
        ) {
            let base: Vec<Point3> = pts.iter().map(|&(x, y, z)| Point3::new(x as f64, y as f64, z as f64)).collect();
            let s = 2f64.powi(scale_pow);
            let moved: Vec<Point3> = base.iter().map(|p| {
                let (x, y) = if swap { (-p.y, p.x) } else { (p.x, p.y) };
                Point3::new(x * s + shift.0 as f64, y * s + shift.1 as f64, p.z * s + shift.2 as f64)
            }).collect();
            let params = SorParams { k: 6, sigma: 1.2 };
            let a = statistical_outlier_removal(&cloud(base), &params).unwrap();
            let b = statistical_outlier_removal(&cloud(moved), &params).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
