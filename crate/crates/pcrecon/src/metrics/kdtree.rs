//! Exact nearest-neighbor queries over a point cloud.
//!
//! The index is a median-split kd-tree. It is not approximate: for every
//! query it returns bitwise the same squared distance and the same point
//! index as a brute-force scan, with ties broken toward the lowest index.
//! That exactness is what lets the rest of the crate check the fast path
//! against [`nn_brute_force`] directly.

use crate::geometry::{Point3, PointCloud};

/// One query answer: the nearest indexed point and its squared distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist2: f64,
}

impl Neighbor {
    pub fn dist(&self) -> f64 {
        self.dist2.sqrt()
    }
}

/// Squared Euclidean distance, with a fixed evaluation order so the brute
/// force and the tree produce identical floating-point results.
#[inline]
pub(crate) fn dist2(a: &Point3, b: &Point3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

#[inline]
fn coord(p: &Point3, axis: usize) -> f64 {
    match axis {
        0 => p.x,
        1 => p.y,
        _ => p.z,
    }
}

/// Linear-scan nearest neighbor: the oracle the tree is checked against.
pub fn nn_brute_force(points: &[Point3], q: &Point3) -> Neighbor {
    let mut best = Neighbor {
        index: usize::MAX,
        dist2: f64::INFINITY,
    };
    for (i, p) in points.iter().enumerate() {
        let d2 = dist2(q, p);
        if d2 < best.dist2 || (d2 == best.dist2 && i < best.index) {
            best = Neighbor { index: i, dist2: d2 };
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
struct Node {
    /// Index into the original cloud.
    point: u32,
    axis: u8,
    /// Child slots in `nodes`; -1 for none.
    left: i32,
    right: i32,
}

/// A kd-tree over an immutable snapshot of a point cloud.
///
/// Queries are exact (see module docs) and the structure is safe to share
/// across threads once built.
#[derive(Debug, Clone)]
pub struct NnIndex {
    points: Vec<Point3>,
    nodes: Vec<Node>,
    root: i32,
    bbox_min: [f64; 3],
    bbox_max: [f64; 3],
}

impl NnIndex {
    pub fn build(cloud: &PointCloud) -> Self {
        Self::from_points(cloud.points().to_vec())
    }

    pub(crate) fn from_points(points: Vec<Point3>) -> Self {
        assert!(!points.is_empty(), "cannot index an empty point set");
        let mut bbox_min = [f64::INFINITY; 3];
        let mut bbox_max = [f64::NEG_INFINITY; 3];
        for p in &points {
            for a in 0..3 {
                bbox_min[a] = bbox_min[a].min(coord(p, a));
                bbox_max[a] = bbox_max[a].max(coord(p, a));
            }
        }
        let mut ids: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = build_node(&points, &mut ids, &mut nodes);
        NnIndex {
            points,
            nodes,
            root,
            bbox_min,
            bbox_max,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Axis-aligned bounds of the indexed points, as (min, max) corners.
    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        (self.bbox_min, self.bbox_max)
    }

    /// Nearest indexed point to `q`; ties go to the lowest point index.
    pub fn nearest(&self, q: &Point3) -> Neighbor {
        let mut best = Neighbor {
            index: usize::MAX,
            dist2: f64::INFINITY,
        };
        self.search(self.root, q, &mut best);
        best
    }

    fn search(&self, slot: i32, q: &Point3, best: &mut Neighbor) {
        if slot < 0 {
            return;
        }
        let node = self.nodes[slot as usize];
        let idx = node.point as usize;
        let d2 = dist2(q, &self.points[idx]);
        if d2 < best.dist2 || (d2 == best.dist2 && idx < best.index) {
            *best = Neighbor { index: idx, dist2: d2 };
        }
        let diff = coord(q, node.axis as usize) - coord(&self.points[idx], node.axis as usize);
        let (near, far) = if diff < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        self.search(near, q, best);
        // The far side can only be skipped when every point there is
        // *strictly* farther than the current best; at equality it may still
        // hold an equidistant point with a lower index.
        if diff * diff <= best.dist2 {
            self.search(far, q, best);
        }
    }
}

/// Recursively splits `ids` at the median of the widest axis.
fn build_node(points: &[Point3], ids: &mut [u32], nodes: &mut Vec<Node>) -> i32 {
    if ids.is_empty() {
        return -1;
    }
    // Widest spread wins; (coordinate, index) ordering keeps the build
    // deterministic when coordinates repeat.
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in ids.iter() {
        let p = &points[i as usize];
        for a in 0..3 {
            lo[a] = lo[a].min(coord(p, a));
            hi[a] = hi[a].max(coord(p, a));
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap();

    let mid = ids.len() / 2;
    ids.select_nth_unstable_by(mid, |&a, &b| {
        coord(&points[a as usize], axis)
            .total_cmp(&coord(&points[b as usize], axis))
            .then(a.cmp(&b))
    });
    let point = ids[mid];

    let (left_ids, rest) = ids.split_at_mut(mid);
    let right_ids = &mut rest[1..];
    let left = build_node(points, left_ids, nodes);
    let right = build_node(points, right_ids, nodes);
    nodes.push(Node {
        point,
        axis: axis as u8,
        left,
        right,
    });
    (nodes.len() - 1) as i32
}
