//! Exact nearest-neighbour search.
//!
//! [`KdTree`] is a static bucketed k-d tree over `D`-dimensional points.
//! Results are exact and ordered by `(squared distance, point index)`, so two
//! points at the same distance always come back in index order.

use std::cmp::Ordering;

use crate::{Error, Point3, PointCloud, Result};

const LEAF_SIZE: usize = 12;

/// A neighbour returned by a query: the point's index in the indexed set and
/// its Euclidean distance to the query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl Candidate {
    fn cmp_key(&self, other: &Candidate) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Static k-d tree. Construction is deterministic for a given input order.
#[derive(Debug, Clone)]
pub struct KdTree<const D: usize> {
    points: Vec<[f64; D]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

fn dist2<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    let mut s = 0.0;
    for i in 0..D {
        let d = a[i] - b[i];
        s += d * d;
    }
    s
}

/// Keeps the `k` best candidates, sorted ascending.
struct BestK {
    k: usize,
    items: Vec<Candidate>,
}

impl BestK {
    fn new(k: usize) -> Self {
        BestK {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    fn is_full(&self) -> bool {
        self.items.len() == self.k
    }

    fn worst_dist2(&self) -> f64 {
        if self.is_full() {
            self.items[self.k - 1].dist2
        } else {
            f64::INFINITY
        }
    }

    fn offer(&mut self, c: Candidate) {
        if self.is_full() && c.cmp_key(&self.items[self.k - 1]) != Ordering::Less {
            return;
        }
        let pos = self
            .items
            .partition_point(|x| x.cmp_key(&c) == Ordering::Less);
        self.items.insert(pos, c);
        self.items.truncate(self.k);
    }
}

impl<const D: usize> KdTree<D> {
    pub fn new(points: Vec<[f64; D]>) -> Self {
        let mut tree = KdTree {
            order: (0..points.len()).collect(),
            points,
            nodes: Vec::new(),
        };
        if !tree.points.is_empty() {
            let n = tree.points.len();
            tree.build(0, n);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64; D] {
        &self.points[i]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        // split on the axis of largest spread
        let mut lo = [f64::INFINITY; D];
        let mut hi = [f64::NEG_INFINITY; D];
        for &i in &self.order[start..end] {
            let p = &self.points[i];
            for a in 0..D {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let axis = (0..D)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        if hi[axis] - lo[axis] <= 0.0 {
            // all coincident
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// The `k` nearest points to `query`, optionally skipping one index.
    /// Returns fewer than `k` only when the tree holds fewer candidates.
    pub fn nearest(&self, query: &[f64; D], k: usize, exclude: Option<usize>) -> Vec<Neighbor> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut best = BestK::new(k);
        self.search(0, query, exclude, &mut best);
        best.items
            .into_iter()
            .map(|c| Neighbor {
                index: c.index,
                distance: c.dist2.sqrt(),
            })
            .collect()
    }

    /// Single nearest point, index tie-break. `None` only for an empty tree.
    pub fn nearest_one(&self, query: &[f64; D]) -> Option<Neighbor> {
        self.nearest(query, 1, None).into_iter().next()
    }

    fn search(&self, node: usize, q: &[f64; D], exclude: Option<usize>, best: &mut BestK) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    best.offer(Candidate {
                        dist2: dist2(q, &self.points[i]),
                        index: i,
                    });
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, exclude, best);
                // `<=` so equal-distance points with smaller indices are still found
                if diff * diff <= best.worst_dist2() {
                    self.search(far, q, exclude, best);
                }
            }
        }
    }

    /// Every point within `radius` (inclusive) of `query`, ordered by distance then index.
    pub fn within_radius(&self, query: &[f64; D], radius: f64) -> Vec<Neighbor> {
        let mut out: Vec<Candidate> = Vec::new();
        if self.points.is_empty() || radius < 0.0 {
            return Vec::new();
        }
        let r2 = radius * radius;
        self.collect_radius(0, query, r2, &mut out);
        out.sort_by(|a, b| a.cmp_key(b));
        out.into_iter()
            .map(|c| Neighbor {
                index: c.index,
                distance: c.dist2.sqrt(),
            })
            .collect()
    }

    fn collect_radius(&self, node: usize, q: &[f64; D], r2: f64, out: &mut Vec<Candidate>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d2 = dist2(q, &self.points[i]);
                    if d2 <= r2 {
                        out.push(Candidate {
                            dist2: d2,
                            index: i,
                        });
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                if diff <= 0.0 || diff * diff <= r2 {
                    self.collect_radius(left, q, r2, out);
                }
                if diff >= 0.0 || diff * diff <= r2 {
                    self.collect_radius(right, q, r2, out);
                }
            }
        }
    }
}

/// Exact k-NN and radius index over a [`PointCloud`]. Immutable and `Sync`.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    tree: KdTree<3>,
}

impl NeighborIndex {
    pub fn build(cloud: &PointCloud) -> Result<Self> {
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
        Ok(NeighborIndex {
            tree: KdTree::new(cloud.iter().map(|p| p.to_array()).collect()),
        })
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    /// The `k` nearest cloud points to `query`, ascending by distance, ties by index.
    pub fn knn(&self, query: &Point3, k: usize) -> Result<Vec<Neighbor>> {
        self.check_k(k, 0)?;
        Ok(self.tree.nearest(&query.to_array(), k, None))
    }

    /// The `k` nearest neighbours of cloud point `index`, not counting the point itself.
    pub fn knn_of_point(&self, index: usize, k: usize) -> Result<Vec<Neighbor>> {
        self.check_k(k, 1)?;
        let q = *self.tree.point(index);
        Ok(self.tree.nearest(&q, k, Some(index)))
    }

    /// Like [`knn`](Self::knn), with `exclude_self` naming the cloud point the
    /// query stands for.
    pub fn knn_excluding(
        &self,
        query: &Point3,
        k: usize,
        exclude_self: Option<usize>,
    ) -> Result<Vec<Neighbor>> {
        match exclude_self {
            Some(i) => {
                self.check_k(k, 1)?;
                Ok(self.tree.nearest(&query.to_array(), k, Some(i)))
            }
            None => self.knn(query, k),
        }
    }

    pub fn within_radius(&self, query: &Point3, radius: f64) -> Vec<Neighbor> {
        self.tree.within_radius(&query.to_array(), radius)
    }

    fn check_k(&self, k: usize, reserved: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        let available = self.tree.len().saturating_sub(reserved);
        if k > available {
            return Err(Error::InsufficientNeighbors {
                requested: k,
                available,
            });
        }
        Ok(())
    }
}

/// Builds the exact neighbour index over `cloud`.
pub fn build_index(cloud: &PointCloud) -> Result<NeighborIndex> {
    NeighborIndex::build(cloud)
}
