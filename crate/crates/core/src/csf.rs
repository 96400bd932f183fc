//! Cloth simulation filtering.
//!
//! The cloud is flipped upside down and a rectangular grid of particles is
//! dropped onto it from above. Particles fall under gravity (position Verlet,
//! vertical motion only), are stopped and frozen when they reach the
//! intersection height value (IHV) of the inverted terrain below them, and
//! are tied to their 4-neighbours by a stiffness constraint. Once the cloth
//! settles, points close to it are ground.
//!
//! All heights inside [`ClothState`] live in the inverted frame.

use rayon::prelude::*;

use crate::{geom::Aabb, index::KdTree, Error, Label, LabelMask, Point3, PointCloud, Result};

/// Fraction of a neighbour height difference corrected per constraint pass.
pub const CORRECTION_FRACTION: f64 = 0.5;

/// Smallest grid resolution accepted without [`CsfParams::allow_fine_grid`].
pub const MIN_GRID_RESOLUTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsfParams {
    /// Horizontal particle spacing in meters (GR).
    pub grid_resolution: f64,
    /// Integration time step (dT).
    pub time_step: f64,
    /// Constraint passes per iteration (RI), 1 to 3.
    pub rigidness: u8,
    /// Run the steep-slope post-processing (ST).
    pub steep_slope_fit: bool,
    /// Maximum point-to-cloth distance for a ground label, meters.
    pub class_threshold: f64,
    pub max_iterations: usize,
    /// Gravitational acceleration in cloth units.
    pub gravity: f64,
    /// Early stop once no particle moves more than this in one iteration.
    pub height_convergence: f64,
    /// IHV tolerance used by the steep-slope pass; `None` uses `class_threshold`.
    pub slope_threshold: Option<f64>,
    /// Lift the 0.1 m lower bound on `grid_resolution`.
    pub allow_fine_grid: bool,
}

impl Default for CsfParams {
    fn default() -> Self {
        CsfParams {
            grid_resolution: 0.1,
            time_step: 0.65,
            rigidness: 2,
            steep_slope_fit: true,
            class_threshold: 0.6,
            max_iterations: 500,
            gravity: 0.2,
            height_convergence: 0.00005,
            slope_threshold: None,
            allow_fine_grid: false,
        }
    }
}

impl CsfParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        let gr = self.grid_resolution;
        if !(gr.is_finite() && gr > 0.0) {
            return bad(format!("grid resolution must be positive, got {gr}"));
        }
        if gr < MIN_GRID_RESOLUTION && !self.allow_fine_grid {
            return bad(format!(
                "grid resolution {gr} is below {MIN_GRID_RESOLUTION} (enable the fine-grid expert option)"
            ));
        }
        if !(1..=3).contains(&self.rigidness) {
            return bad(format!(
                "rigidness must be 1, 2 or 3, got {}",
                self.rigidness
            ));
        }
        for (name, v) in [
            ("time step", self.time_step),
            ("class threshold", self.class_threshold),
            ("gravity", self.gravity),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.height_convergence.is_nan() || self.height_convergence < 0.0 {
            return bad(format!(
                "height convergence must be non-negative, got {}",
                self.height_convergence
            ));
        }
        if let Some(t) = self.slope_threshold {
            if !(t.is_finite() && t >= 0.0) {
                return bad(format!("slope threshold must be non-negative, got {t}"));
            }
        }
        Ok(())
    }

    pub fn effective_slope_threshold(&self) -> f64 {
        self.slope_threshold.unwrap_or(self.class_threshold)
    }

    /// Height change of a particle starting at rest after one gravity step.
    pub fn step_displacement(&self) -> f64 {
        self.gravity * self.time_step * self.time_step
    }
}

/// Particle grid of the simulation. Row-major, row `r` at
/// `origin_y + r * spacing`, column `c` at `origin_x + c * spacing`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClothState {
    pub rows: usize,
    pub cols: usize,
    pub origin_x: f64,
    pub origin_y: f64,
    pub spacing: f64,
    pub height: Vec<f64>,
    pub prev_height: Vec<f64>,
    pub movable: Vec<bool>,
    pub ihv: Vec<f64>,
}

/// Output of [`filter`].
#[derive(Debug, Clone)]
pub struct CsfResult {
    pub labels: LabelMask,
    pub cloth: ClothState,
    pub iterations_used: usize,
    pub max_last_displacement: f64,
}

/// Iteration count and last displacement of a [`simulate`] run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationStats {
    pub iterations_used: usize,
    pub max_last_displacement: f64,
}

/// Maps `(x, y, z)` to `(x, y, -z)`.
pub fn invert_cloud(cloud: &PointCloud) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    cloud.map_points(|p| Point3::new(p.x, p.y, -p.z))
}

/// Lays out the cloth over the inverted cloud and fills its IHVs.
pub fn init_cloth(inverted: &PointCloud, params: &CsfParams) -> Result<ClothState> {
    params.validate()?;
    let bb = inverted.bounding_box()?;
    let mut cloth = ClothState::layout(&bb, params.grid_resolution)?;
    cloth.compute_ihv(inverted);
    Ok(cloth)
}

impl ClothState {
    /// Grid over `bb` with one spacing of margin per side, every particle
    /// movable and at rest `0.05 * z_extent + spacing` above the top of `bb`.
    pub fn layout(bb: &Aabb, spacing: f64) -> Result<Self> {
        let ext = bb.extent();
        if ext.x <= 0.0 {
            return Err(Error::DegenerateExtent { axis: 'x' });
        }
        if ext.y <= 0.0 {
            return Err(Error::DegenerateExtent { axis: 'y' });
        }
        let cols = (ext.x / spacing).ceil() as usize + 3;
        let rows = (ext.y / spacing).ceil() as usize + 3;
        let start = bb.max.z + 0.05 * ext.z + spacing;
        let n = rows * cols;
        Ok(ClothState {
            rows,
            cols,
            origin_x: bb.min.x - spacing,
            origin_y: bb.min.y - spacing,
            spacing,
            height: vec![start; n],
            prev_height: vec![start; n],
            movable: vec![true; n],
            ihv: vec![f64::NEG_INFINITY; n],
        })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn particle_xy(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.origin_x + col as f64 * self.spacing,
            self.origin_y + row as f64 * self.spacing,
        )
    }

    pub fn movable_count(&self) -> usize {
        self.movable.iter().filter(|&&m| m).count()
    }

    /// IHV of each particle: inverted z of the cloud point nearest to it in
    /// the xy plane, ties to the lower point index.
    ///
    /// A particle with no point in its neighbourhood simply takes the
    /// nearest point at whatever distance, so every particle gets a value.
    pub fn compute_ihv(&mut self, inverted: &PointCloud) {
        let tree = KdTree::<2>::new(inverted.iter().map(|p| [p.x, p.y]).collect());
        let cols = self.cols;
        let (ox, oy, s) = (self.origin_x, self.origin_y, self.spacing);
        self.ihv
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(r, row)| {
                let y = oy + r as f64 * s;
                for (c, v) in row.iter_mut().enumerate() {
                    let x = ox + c as f64 * s;
                    let nn = tree.nearest_one(&[x, y]).expect("cloud checked non-empty");
                    *v = inverted.point(nn.index).z;
                }
            });
    }

    /// Position-Verlet step under gravity for every movable particle.
    pub fn gravity_step(&mut self, params: &CsfParams) {
        let drop = params.gravity * params.time_step * params.time_step;
        self.height
            .par_iter_mut()
            .zip(self.prev_height.par_iter_mut())
            .zip(self.movable.par_iter())
            .for_each(|((h, prev), &m)| {
                if m {
                    let next = 2.0 * *h - *prev - drop;
                    *prev = *h;
                    *h = next;
                }
            });
    }

    /// Stops particles that went below their IHV and freezes them there.
    pub fn collision_clamp(&mut self) {
        self.height
            .par_iter_mut()
            .zip(self.prev_height.par_iter_mut())
            .zip(self.movable.par_iter_mut())
            .zip(self.ihv.par_iter())
            .for_each(|(((h, prev), m), &ihv)| {
                if *h < ihv {
                    *h = ihv;
                    *prev = ihv;
                    *m = false;
                }
            });
    }

    /// One double-buffered pass over all 4-neighbour pairs.
    ///
    /// Per pair with `d = h_b - h_a`: two movable particles move towards each
    /// other by `d * f / 2` each, a movable particle tied to a frozen one moves
    /// by `d * f`. Corrections are computed from the pre-pass heights and
    /// applied together, so the outcome does not depend on traversal order.
    /// When a particle's pair weights sum above one the summed correction is
    /// divided by that sum, so it never moves past its neighbours.
    pub fn internal_constraint_step(&mut self) {
        let (rows, cols) = (self.rows, self.cols);
        let h = &self.height;
        let movable = &self.movable;
        let f = CORRECTION_FRACTION;
        let mut next = vec![0.0; h.len()];
        next.par_chunks_mut(cols).enumerate().for_each(|(r, out)| {
            for (c, o) in out.iter_mut().enumerate() {
                let i = r * cols + c;
                let hi = h[i];
                if !movable[i] {
                    *o = hi;
                    continue;
                }
                let mut acc = 0.0;
                let mut wsum = 0.0;
                let mut pull = |j: usize| {
                    let d = h[j] - hi;
                    let w = if movable[j] { f * 0.5 } else { f };
                    acc += d * w;
                    wsum += w;
                };
                if c > 0 {
                    pull(i - 1);
                }
                if c + 1 < cols {
                    pull(i + 1);
                }
                if r > 0 {
                    pull(i - cols);
                }
                if r + 1 < rows {
                    pull(i + cols);
                }
                // several frozen neighbours would push past them; cap at a
                // weighted mean of the neighbour heights
                if wsum > 1.0 {
                    acc /= wsum;
                }
                *o = hi + acc;
            }
        });
        self.height = next;
    }

    /// One full simulation iteration; returns the largest height change.
    pub fn iterate(&mut self, params: &CsfParams) -> f64 {
        let start = self.height.clone();
        self.gravity_step(params);
        self.collision_clamp();
        for _ in 0..params.rigidness {
            self.internal_constraint_step();
        }
        self.collision_clamp();
        start
            .par_iter()
            .zip(self.height.par_iter())
            .map(|(a, b)| (b - a).abs())
            .reduce(|| 0.0, f64::max)
    }

    /// Steep-slope handling: starting from the frozen particles, freeze every
    /// movable 4-neighbour whose IHV is within `threshold` of the frozen
    /// particle's IHV, setting it onto its IHV, until nothing changes.
    pub fn slope_postprocess(&mut self, threshold: f64) {
        let (rows, cols) = (self.rows, self.cols);
        let mut queue: std::collections::VecDeque<usize> =
            (0..self.len()).filter(|&i| !self.movable[i]).collect();
        while let Some(i) = queue.pop_front() {
            let (r, c) = (i / cols, i % cols);
            let mut nbrs = [usize::MAX; 4];
            if c > 0 {
                nbrs[0] = i - 1;
            }
            if c + 1 < cols {
                nbrs[1] = i + 1;
            }
            if r > 0 {
                nbrs[2] = i - cols;
            }
            if r + 1 < rows {
                nbrs[3] = i + cols;
            }
            for j in nbrs.into_iter().filter(|&j| j != usize::MAX) {
                if self.movable[j] && (self.ihv[j] - self.ihv[i]).abs() <= threshold {
                    self.movable[j] = false;
                    self.height[j] = self.ihv[j];
                    self.prev_height[j] = self.ihv[j];
                    queue.push_back(j);
                }
            }
        }
    }

    /// Inverted-frame cloth height at `(x, y)` by bilinear interpolation.
    pub fn height_at(&self, x: f64, y: f64) -> Option<f64> {
        let fc = (x - self.origin_x) / self.spacing;
        let fr = (y - self.origin_y) / self.spacing;
        let (max_c, max_r) = ((self.cols - 1) as f64, (self.rows - 1) as f64);
        if !(0.0..=max_c).contains(&fc) || !(0.0..=max_r).contains(&fr) {
            return None;
        }
        let c0 = (fc.floor() as usize).min(self.cols - 2);
        let r0 = (fr.floor() as usize).min(self.rows - 2);
        let (tx, ty) = (fc - c0 as f64, fr - r0 as f64);
        let i = self.index(r0, c0);
        let h00 = self.height[i];
        let h01 = self.height[i + 1];
        let h10 = self.height[i + self.cols];
        let h11 = self.height[i + self.cols + 1];
        let bottom = h00 + (h01 - h00) * tx;
        let top = h10 + (h11 - h10) * tx;
        Some(bottom + (top - bottom) * ty)
    }

    /// Particles as points in the original (non-inverted) frame.
    pub fn particles_cloud(&self) -> PointCloud {
        let mut pts = Vec::with_capacity(self.len());
        for r in 0..self.rows {
            for c in 0..self.cols {
                let (x, y) = self.particle_xy(r, c);
                pts.push(Point3::new(x, y, -self.height[self.index(r, c)]));
            }
        }
        PointCloud::new(pts).expect("cloth heights are finite")
    }
}

/// Drops the cloth and lets it settle; then applies the steep-slope pass if enabled.
pub fn simulate(
    inverted: &PointCloud,
    params: &CsfParams,
) -> Result<(ClothState, SimulationStats)> {
    let mut cloth = init_cloth(inverted, params)?;
    let stats = run_simulation(&mut cloth, params);
    Ok((cloth, stats))
}

/// Simulation loop on an already initialised cloth.
pub fn run_simulation(cloth: &mut ClothState, params: &CsfParams) -> SimulationStats {
    let mut stats = SimulationStats {
        iterations_used: 0,
        max_last_displacement: 0.0,
    };
    while stats.iterations_used < params.max_iterations {
        let moved = cloth.iterate(params);
        stats.iterations_used += 1;
        stats.max_last_displacement = moved;
        if moved < params.height_convergence {
            break;
        }
    }
    log::debug!(
        "cloth settled after {} iterations (last displacement {:.3e}), {} of {} particles movable",
        stats.iterations_used,
        stats.max_last_displacement,
        cloth.movable_count(),
        cloth.len()
    );
    if params.steep_slope_fit {
        cloth.slope_postprocess(params.effective_slope_threshold());
    }
    stats
}

/// Ground iff the point lies strictly closer than `class_threshold` to the cloth.
pub fn classify(cloud: &PointCloud, cloth: &ClothState, params: &CsfParams) -> Result<LabelMask> {
    let threshold = params.class_threshold;
    cloud
        .points()
        .par_iter()
        .map(|p| {
            let h = cloth
                .height_at(p.x, p.y)
                .ok_or(Error::PointOutsideCloth { x: p.x, y: p.y })?;
            // back to the original frame
            let z_cloth = -h;
            Ok(if (p.z - z_cloth).abs() < threshold {
                Label::Ground
            } else {
                Label::NonGround
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(LabelMask::new)
}

/// Full ground filter: invert, simulate, classify.
pub fn filter(cloud: &PointCloud, params: &CsfParams) -> Result<CsfResult> {
    let inverted = invert_cloud(cloud)?;
    let (cloth, stats) = simulate(&inverted, params)?;
    let labels = classify(cloud, &cloth, params)?;
    Ok(CsfResult {
        labels,
        cloth,
        iterations_used: stats.iterations_used,
        max_last_displacement: stats.max_last_displacement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(pts: Vec<Point3>) -> PointCloud {
        PointCloud::new(pts).unwrap()
    }

    fn random_cloud(n: usize, seed: u64, size: f64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        cloud(
            (0..n)
                .map(|_| {
                    Point3::new(
                        rng.gen::<f64>() * size,
                        rng.gen::<f64>() * size,
                        rng.gen::<f64>() * 3.0,
                    )
                })
                .collect(),
        )
    }

    /// Hand-built strip of particles, all at rest.
    fn strip(heights: &[f64], movable: &[bool], ihv: &[f64]) -> ClothState {
        ClothState {
            rows: 1,
            cols: heights.len(),
            origin_x: 0.0,
            origin_y: 0.0,
            spacing: 1.0,
            height: heights.to_vec(),
            prev_height: heights.to_vec(),
            movable: movable.to_vec(),
            ihv: ihv.to_vec(),
        }
    }

    fn flat_plane(z: f64) -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..=40 {
            for j in 0..=30 {
                pts.push(Point3::new(i as f64 * 0.25, j as f64 * 0.25, z));
            }
        }
        cloud(pts)
    }

    #[test]
    fn defaults_match_reference_setup() {
        let p = CsfParams::default();
        assert_eq!(
            (
                p.grid_resolution,
                p.time_step,
                p.rigidness,
                p.steep_slope_fit,
                p.class_threshold,
                p.max_iterations
            ),
            (0.1, 0.65, 2, true, 0.6, 500)
        );
        assert_eq!(p.gravity, 0.2);
        assert_eq!(p.height_convergence, 0.00005);
        p.validate().unwrap();
    }

    #[test]
    fn parameter_domain() {
        let ok = CsfParams::default();
        assert!(CsfParams { rigidness: 0, ..ok }.validate().is_err());
        assert!(CsfParams { rigidness: 4, ..ok }.validate().is_err());
        assert!(CsfParams {
            grid_resolution: 0.05,
            ..ok
        }
        .validate()
        .is_err());
        CsfParams {
            grid_resolution: 0.05,
            allow_fine_grid: true,
            ..ok
        }
        .validate()
        .unwrap();
        assert!(CsfParams {
            time_step: 0.0,
            ..ok
        }
        .validate()
        .is_err());
        assert!(CsfParams {
            class_threshold: -1.0,
            ..ok
        }
        .validate()
        .is_err());
    }

    #[test]
    fn invert() {
        let c = cloud(vec![
            Point3::new(1.0, 2.0, 3.0),
            Point3::new(-1.0, 0.0, -7.5),
        ]);
        let inv = invert_cloud(&c).unwrap();
        assert_eq!(inv.point(0), Point3::new(1.0, 2.0, -3.0));
        assert_eq!(invert_cloud(&inv).unwrap(), c);
        let (a, b) = (c.bounding_box().unwrap(), inv.bounding_box().unwrap());
        assert_eq!(a.max.z, -b.min.z);
        assert_eq!(a.min.z, -b.max.z);
        assert!(matches!(
            invert_cloud(&PointCloud::empty()),
            Err(Error::EmptyCloud)
        ));
    }

    #[test]
    fn init_ten_meter_square() {
        let mut pts = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(10.0, 10.0, 2.0)];
        pts.push(Point3::new(5.0, 5.0, 1.0));
        let inv = invert_cloud(&cloud(pts)).unwrap();
        let cl = init_cloth(&inv, &CsfParams::default()).unwrap();
        assert!(cl.rows >= 101 + 2 && cl.cols >= 101 + 2);
        assert_eq!((cl.rows, cl.cols), (103, 103));
        // h0 = 0.05 * 2 + 0.1 above the inverted maximum (0)
        assert!(cl.height.iter().all(|&h| (h - 0.2).abs() < 1e-12));
        assert_eq!(cl.height, cl.prev_height);
        assert!(cl.movable.iter().all(|&m| m));
    }

    #[test]
    fn init_degenerate_and_minimal() {
        let p = CsfParams::default();
        let line = cloud(vec![Point3::new(1.0, 0.0, 0.0), Point3::new(1.0, 5.0, 1.0)]);
        assert!(matches!(
            init_cloth(&line, &p),
            Err(Error::DegenerateExtent { axis: 'x' })
        ));
        let line = cloud(vec![Point3::new(0.0, 2.0, 0.0), Point3::new(5.0, 2.0, 1.0)]);
        assert!(matches!(
            init_cloth(&line, &p),
            Err(Error::DegenerateExtent { axis: 'y' })
        ));
        let pair = cloud(vec![Point3::new(0.0, 0.0, 0.0), Point3::new(0.1, 0.1, 0.0)]);
        let cl = init_cloth(&pair, &p).unwrap();
        assert_eq!((cl.rows, cl.cols), (4, 4));
    }

    #[test]
    fn init_covers_every_point() {
        for seed in 0..5 {
            let c = random_cloud(300, seed, 7.3 + seed as f64);
            let cl = init_cloth(&invert_cloud(&c).unwrap(), &CsfParams::default()).unwrap();
            let (x_end, y_end) = cl.particle_xy(cl.rows - 1, cl.cols - 1);
            for p in &c {
                assert!(p.x > cl.origin_x && p.x < x_end && p.y > cl.origin_y && p.y < y_end);
                assert!(cl.height_at(p.x, p.y).is_some());
            }
        }
    }

    #[test]
    fn ihv_flat_and_single_point() {
        let inv = invert_cloud(&flat_plane(5.0)).unwrap();
        let cl = init_cloth(&inv, &CsfParams::default()).unwrap();
        assert!(cl.ihv.iter().all(|&v| v == -5.0));

        let bb = Aabb {
            min: Point3::new(0.0, 0.0, 0.0),
            max: Point3::new(2.0, 1.0, 0.0),
        };
        let mut cl = ClothState::layout(&bb, 0.5).unwrap();
        cl.compute_ihv(&cloud(vec![Point3::new(0.3, 0.7, -2.5)]));
        assert!(cl.ihv.iter().all(|&v| v == -2.5));
    }

    #[test]
    fn ihv_matches_brute_force() {
        let inv = invert_cloud(&random_cloud(400, 9, 4.0)).unwrap();
        let cl = init_cloth(&inv, &CsfParams::default()).unwrap();
        for r in (0..cl.rows).step_by(3) {
            for c in (0..cl.cols).step_by(3) {
                let (x, y) = cl.particle_xy(r, c);
                let best = inv
                    .iter()
                    .enumerate()
                    .map(|(i, p)| ((p.x - x).powi(2) + (p.y - y).powi(2), i))
                    .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                    .unwrap();
                assert_eq!(cl.ihv[cl.index(r, c)], inv.point(best.1).z);
            }
        }
    }

    #[test]
    fn verlet_two_steps() {
        let p = CsfParams::default();
        let mut cl = strip(&[0.0, 0.0], &[true, false], &[-100.0, -100.0]);
        cl.gravity_step(&p);
        assert!((cl.height[0] - -0.0845).abs() < 1e-12);
        assert_eq!(cl.prev_height[0], 0.0);
        cl.gravity_step(&p);
        assert!((cl.height[0] - -0.2535).abs() < 1e-12);
        assert!((cl.prev_height[0] - -0.0845).abs() < 1e-12);
        assert_eq!(cl.height[1], 0.0);
        assert_eq!(cl.prev_height[1], 0.0);
    }

    #[test]
    fn clamp_cases() {
        let mut cl = strip(&[-5.1, -4.9], &[true, true], &[-5.0, -5.0]);
        cl.collision_clamp();
        assert_eq!(cl.height, vec![-5.0, -4.9]);
        assert_eq!(cl.prev_height[0], -5.0);
        assert_eq!(cl.movable, vec![false, true]);
    }

    #[test]
    fn clamp_restores_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 500;
        let h: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let ihv: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let mv: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        let mut cl = strip(&h, &mv, &ihv);
        cl.collision_clamp();
        for i in 0..n {
            assert!(cl.height[i] >= cl.ihv[i]);
            if h[i] < ihv[i] {
                assert!(!cl.movable[i] && cl.height[i] == ihv[i]);
            } else {
                assert_eq!(cl.movable[i], mv[i]);
            }
        }
    }

    #[test]
    fn constraint_pairs() {
        let low = [-10.0, -10.0];
        let mut cl = strip(&[0.0, 1.0], &[true, true], &low);
        cl.internal_constraint_step();
        assert_eq!(cl.height, vec![0.25, 0.75]);

        let mut cl = strip(&[0.0, 1.0], &[true, false], &low);
        cl.internal_constraint_step();
        assert_eq!(cl.height, vec![0.5, 1.0]);

        let mut cl = strip(&[2.0; 4], &[true, true, false, true], &[-1.0; 4]);
        cl.internal_constraint_step();
        assert_eq!(cl.height, vec![2.0; 4]);

        let mut cl = strip(&[0.0, 1.0], &[false, false], &low);
        cl.internal_constraint_step();
        assert_eq!(cl.height, vec![0.0, 1.0]);
    }

    #[test]
    fn constraint_does_not_overshoot_frozen_neighbours() {
        // centre of a 3x3 block, all four neighbours frozen at 1
        let mut cl = ClothState {
            rows: 3,
            cols: 3,
            origin_x: 0.0,
            origin_y: 0.0,
            spacing: 1.0,
            height: vec![1.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0],
            prev_height: vec![0.0; 9],
            movable: vec![true, false, true, false, true, false, true, false, true],
            ihv: vec![-5.0; 9],
        };
        cl.internal_constraint_step();
        assert_eq!(cl.height[4], 1.0);
        // a movable corner next to two frozen edges at its own height stays put
        assert_eq!(cl.height[0], 1.0);
    }

    /// Sweeps the strip left to right repeatedly until nothing changes.
    fn sweep_oracle(ihv: &[f64], frozen: &[bool], t: f64) -> Vec<bool> {
        let mut f = frozen.to_vec();
        loop {
            let mut changed = false;
            for i in 0..f.len() {
                if f[i] {
                    continue;
                }
                let near_frozen = |j: usize| f[j] && (ihv[i] - ihv[j]).abs() <= t;
                if (i > 0 && near_frozen(i - 1)) || (i + 1 < f.len() && near_frozen(i + 1)) {
                    f[i] = true;
                    changed = true;
                }
            }
            if !changed {
                return f;
            }
        }
    }

    #[test]
    fn staircase_freezes() {
        let ihv = [0.0, -0.5, -1.0, -1.5, -2.0];
        let frozen = [true, false, false, false, false];
        let mut cl = strip(&[0.0, 3.0, 3.0, 3.0, 3.0], &frozen.map(|f| !f), &ihv);
        cl.slope_postprocess(0.6);
        let want = sweep_oracle(&ihv, &frozen, 0.6);
        assert_eq!(cl.movable.iter().map(|m| !m).collect::<Vec<_>>(), want);
        assert!(want.iter().all(|&f| f));
        assert_eq!(cl.height, ihv.to_vec());
    }

    #[test]
    fn cliff_not_frozen() {
        let ihv = [0.0, -10.0, -10.0];
        let mut cl = strip(&[0.0, 2.0, 2.0], &[false, true, true], &ihv);
        cl.slope_postprocess(0.6);
        assert_eq!(cl.movable, vec![false, true, true]);
        assert_eq!(cl.height, vec![0.0, 2.0, 2.0]);
    }

    #[test]
    fn flat_terrain_settles_exactly() {
        let c = flat_plane(3.0);
        let inv = invert_cloud(&c).unwrap();
        let p = CsfParams {
            grid_resolution: 0.2,
            ..CsfParams::default()
        };
        let (cl, stats) = simulate(&inv, &p).unwrap();
        assert!(stats.iterations_used < 50, "{stats:?}");
        assert!(cl.movable.iter().all(|m| !m));
        for (h, ihv) in cl.height.iter().zip(&cl.ihv) {
            assert!((h - ihv).abs() < p.height_convergence);
        }
        let labels = classify(&c, &cl, &p).unwrap();
        assert!(labels.iter().all(|l| l == Label::Ground));
    }

    #[test]
    fn zero_iteration_budget() {
        let inv = invert_cloud(&random_cloud(200, 1, 5.0)).unwrap();
        let p = CsfParams {
            max_iterations: 0,
            steep_slope_fit: false,
            ..CsfParams::default()
        };
        let start = init_cloth(&inv, &p).unwrap();
        let (cl, stats) = simulate(&inv, &p).unwrap();
        assert_eq!(cl, start);
        assert_eq!(stats.iterations_used, 0);
    }

    #[test]
    fn convergence_or_budget() {
        for (seed, budget) in [(1, 5), (2, 500)] {
            let inv = invert_cloud(&random_cloud(300, seed, 6.0)).unwrap();
            let p = CsfParams {
                max_iterations: budget,
                ..CsfParams::default()
            };
            let (_, s) = simulate(&inv, &p).unwrap();
            assert!(s.max_last_displacement < p.height_convergence || s.iterations_used == budget);
        }
    }

    #[test]
    fn steep_slope_disabled_is_identity() {
        let inv = invert_cloud(&random_cloud(300, 3, 6.0)).unwrap();
        let p = CsfParams {
            steep_slope_fit: false,
            ..CsfParams::default()
        };
        let mut manual = init_cloth(&inv, &p).unwrap();
        let stats = run_simulation(&mut manual, &p);
        let mut again = init_cloth(&inv, &p).unwrap();
        for _ in 0..stats.iterations_used {
            again.iterate(&p);
        }
        assert_eq!(manual, again);
    }

    #[test]
    fn classify_threshold_rule() {
        let bb = Aabb {
            min: Point3::new(0.0, 0.0, 0.0),
            max: Point3::new(4.0, 4.0, 0.0),
        };
        let mut cl = ClothState::layout(&bb, 1.0).unwrap();
        cl.height.iter_mut().for_each(|h| *h = 0.0);
        let pts = cloud(vec![
            Point3::new(1.0, 1.0, 0.0),
            Point3::new(2.5, 2.5, 10.0),
            Point3::new(3.0, 1.5, 0.6),
            Point3::new(3.0, 1.5, -0.59),
        ]);
        let l = classify(&pts, &cl, &CsfParams::default()).unwrap();
        assert_eq!(
            l.as_slice(),
            &[
                Label::Ground,
                Label::NonGround,
                Label::NonGround,
                Label::Ground
            ]
        );
        let far = cloud(vec![Point3::new(100.0, 0.0, 0.0)]);
        assert!(matches!(
            classify(&far, &cl, &CsfParams::default()),
            Err(Error::PointOutsideCloth { .. })
        ));
    }

    #[test]
    fn bilinear_height() {
        let bb = Aabb {
            min: Point3::new(0.0, 0.0, 0.0),
            max: Point3::new(1.0, 1.0, 0.0),
        };
        let mut cl = ClothState::layout(&bb, 1.0).unwrap();
        // h = x + 2y on particle positions
        for r in 0..cl.rows {
            for c in 0..cl.cols {
                let (x, y) = cl.particle_xy(r, c);
                let i = cl.index(r, c);
                cl.height[i] = x + 2.0 * y;
            }
        }
        let h = cl.height_at(0.25, 0.75).unwrap();
        assert!((h - 1.75).abs() < 1e-12);
    }
}
