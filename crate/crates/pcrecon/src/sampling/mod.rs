//! Sampling: UV points in `[0,1]²` for the folding decoder, and point
//! sampling on triangle meshes.
//!
//! The decoder consumes UV batches — random during training (robustness),
//! a regular cell-center lattice at inference (evenness). Mesh sampling
//! offers plain area-uniform draws and a Lloyd-style relaxation that
//! redistributes an area-uniform oversampling into a visibly more even
//! covering: repeated rounds of assign-to-nearest, recenter, and project
//! back onto the surface.


use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, TriangleMesh};
use crate::metrics::NnIndex;
use crate::rng::{self, Stream};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// How a UV batch was laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UvLayout {
    Random,
    RegularGrid,
}

/// A batch of 2D points in the unit square, in a defined order.
#[derive(Debug, Clone, PartialEq)]
pub struct UvBatch {
    points: Vec<[f64; 2]>,
    layout: UvLayout,
}

impl UvBatch {
    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn layout(&self) -> UvLayout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Repeats the whole batch `times` times (block after block). The
    /// decoder uses this to feed the same inference lattice to each of its
    /// primitives.
    pub fn tile(&self, times: usize) -> UvBatch {
        let mut points = Vec::with_capacity(self.points.len() * times);
        for _ in 0..times {
            points.extend_from_slice(&self.points);
        }
        UvBatch {
            points,
            layout: self.layout,
        }
    }
}

/// `n` i.i.d. uniform draws from `[0,1]²`, deterministic under `seed`.
pub fn sample_uv_random(n: usize, seed: u64) -> UvBatch {
    let mut r = rng::stream_rng(seed, Stream::UvSample, 0);
    let points = (0..n)
        .map(|_| [r.random_range(0.0..1.0), r.random_range(0.0..1.0)])
        .collect();
    UvBatch {
        points,
        layout: UvLayout::Random,
    }
}

/// The `g×g` cell-center lattice `((i+0.5)/g, (j+0.5)/g)` in row-major
/// order, where `g = √n`. Cell centers (rather than corners) keep the eight
/// primitives from duplicating boundary points.
pub fn sample_uv_grid(n: usize) -> Result<UvBatch> {
    let g = (n as f64).sqrt().round() as usize;
    if g * g != n || n == 0 {
        return Err(Error::NotPerfectSquare { n });
    }
    let step = 1.0 / g as f64;
    let mut points = Vec::with_capacity(n);
    for i in 0..g {
        for j in 0..g {
            points.push([(i as f64 + 0.5) * step, (j as f64 + 0.5) * step]);
        }
    }
    Ok(UvBatch {
        points,
        layout: UvLayout::RegularGrid,
    })
}

/// How a surface sample was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMethod {
    AreaUniform,
    Lloyd,
}

/// Points sampled from a mesh surface, tagged with the source mesh's
/// fingerprint and the sampling method.
#[derive(Debug, Clone)]
pub struct SurfaceSample {
    points: PointCloud,
    mesh_id: String,
    method: SampleMethod,
}

impl SurfaceSample {
    pub fn points(&self) -> &PointCloud {
        &self.points
    }

    pub fn into_points(self) -> PointCloud {
        self.points
    }

    /// Fingerprint of the mesh the points were drawn from
    /// (see [`TriangleMesh::fingerprint`]).
    pub fn mesh_id(&self) -> &str {
        &self.mesh_id
    }

    pub fn method(&self) -> SampleMethod {
        self.method
    }
}

/// Draws a point uniformly inside a triangle (square-root barycentric
/// trick) given two uniform variates.
fn barycentric_point(a: &Point3, b: &Point3, c: &Point3, r1: f64, r2: f64) -> Point3 {
    let s = r1.sqrt();
    let (wa, wb, wc) = (1.0 - s, s * (1.0 - r2), s * r2);
    Point3::new(
        wa * a.x + wb * b.x + wc * c.x,
        wa * a.y + wb * b.y + wc * c.y,
        wa * a.z + wb * b.z + wc * c.z,
    )
}

/// `n` points drawn with probability proportional to face area, placed
/// uniformly within each face. Deterministic under `seed`.
pub fn sample_surface_uniform(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<SurfaceSample> {
    if n == 0 {
        return Err(Error::Config {
            msg: "surface sample size must be at least 1".to_string(),
        });
    }
    // Cumulative area table for the face draw.
    let mut cum = Vec::with_capacity(mesh.faces().len());
    let mut total = 0.0;
    for f in 0..mesh.faces().len() {
        total += mesh.face_area(f);
        cum.push(total);
    }

    let mut r = rng::stream_rng(seed, Stream::SurfaceSample, 0);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let u = r.random_range(0.0..total);
        let face = cum.partition_point(|&c| c <= u);
        let (a, b, c) = mesh.face_points(face.min(mesh.faces().len() - 1));
        let r1 = r.random_range(0.0..1.0);
        let r2 = r.random_range(0.0..1.0);
        points.push(barycentric_point(&a, &b, &c, r1, r2));
    }
    Ok(SurfaceSample {
        points: PointCloud::new(points)?,
        mesh_id: mesh.fingerprint(),
        method: SampleMethod::AreaUniform,
    })
}

/// Lloyd-style relaxation on a mesh surface.
///
/// Draws `oversample·n` area-uniform points, picks `n` starting centers
/// from them k-means++ style, then runs `iters` rounds of: assign each
/// dense point to its nearest center, move every center to its cluster
/// mean, and project the mean back to the closest point on the surface.
/// `iters = 0` returns the k-means++ picks themselves (already on the
/// surface). Centers whose cluster goes empty stay where they are.
pub fn sample_surface_lloyd(
    mesh: &TriangleMesh,
    n: usize,
    iters: usize,
    oversample: usize,
    seed: u64,
) -> Result<SurfaceSample> {
    if oversample < 4 {
        return Err(Error::Config {
            msg: format!("lloyd oversample factor must be at least 4, got {oversample}"),
        });
    }
    let dense = sample_surface_uniform(mesh, oversample * n, seed)?;
    let dense_pts = dense.points().points();

    // k-means++ initialization from the dense set: each new center is drawn
    // with probability proportional to the squared distance to the centers
    // chosen so far.
    let mut r = rng::stream_rng(seed, Stream::SurfaceSample, 1);
    let mut centers: Vec<Point3> = Vec::with_capacity(n);
    let mut best_d2 = vec![f64::INFINITY; dense_pts.len()];
    centers.push(dense_pts[r.random_range(0..dense_pts.len())]);
    while centers.len() < n {
        let latest = centers[centers.len() - 1];
        let mut total = 0.0;
        for (d2, p) in best_d2.iter_mut().zip(dense_pts) {
            let d = p.sub(&latest);
            *d2 = d2.min(d.dot(&d));
            total += *d2;
        }
        let pick = if total > 0.0 {
            let u = r.random_range(0.0..total);
            let mut acc = 0.0;
            let mut pick = dense_pts.len() - 1;
            for (i, d2) in best_d2.iter().enumerate() {
                acc += d2;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // All dense points already coincide with a center.
            r.random_range(0..dense_pts.len())
        };
        centers.push(dense_pts[pick]);
    }

    for _ in 0..iters {
        let index = NnIndex::from_points(centers.clone());
        let mut sums = vec![Point3::new(0.0, 0.0, 0.0); n];
        let mut counts = vec![0usize; n];
        for p in dense_pts {
            let hit = index.nearest(p);
            sums[hit.index] = sums[hit.index].add(p);
            counts[hit.index] += 1;
        }
        for k in 0..n {
            if counts[k] > 0 {
                let mean = sums[k].scale(1.0 / counts[k] as f64);
                centers[k] = project_to_surface(mesh, &mean);
            }
        }
    }

    Ok(SurfaceSample {
        points: PointCloud::new(centers)?,
        mesh_id: mesh.fingerprint(),
        method: SampleMethod::Lloyd,
    })
}

/// Closest point to `p` on triangle `abc` (vertex / edge / interior case
/// analysis).
pub fn closest_point_on_triangle(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> Point3 {
    let ab = b.sub(a);
    let ac = c.sub(a);
    let ap = p.sub(a);
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }

    let bp = p.sub(b);
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a.add(&ab.scale(v));
    }

    let cp = p.sub(c);
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a.add(&ac.scale(w));
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b.add(&c.sub(b).scale(w));
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a.add(&ab.scale(v)).add(&ac.scale(w))
}

/// Closest point to `p` over all faces of `mesh`; ties go to the lowest
/// face index.
pub fn project_to_surface(mesh: &TriangleMesh, p: &Point3) -> Point3 {
    let mut best = *p;
    let mut best_d2 = f64::INFINITY;
    for f in 0..mesh.faces().len() {
        let (a, b, c) = mesh.face_points(f);
        let q = closest_point_on_triangle(p, &a, &b, &c);
        let d = p.sub(&q);
        let d2 = d.dot(&d);
        if d2 < best_d2 {
            best_d2 = d2;
            best = q;
        }
    }
    best
}

/// Distance from `p` to the surface of `mesh`.
pub fn surface_distance(mesh: &TriangleMesh, p: &Point3) -> f64 {
    p.distance(&project_to_surface(mesh, p))
}
