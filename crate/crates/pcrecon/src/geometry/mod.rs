//! Point clouds, triangle meshes, camera poses and the preprocessing
//! transforms applied to ground-truth shapes before training: rotation into
//! the image's view, normalization, downsampling to a fixed point budget,
//! Gaussian jitter and global scaling.
//!
//! All transforms are per-point maps: they preserve point count and order,
//! and every operation is a pure function of its inputs (randomized ones
//! take an explicit seed).

mod io;

pub use io::{
    load_mesh, load_pointcloud, load_pose, save_pose, write_atomic, write_mesh_obj,
    write_pointcloud, CloudFormat, MeshFormat,
};

use crate::error::{Error, Result};
use crate::rng;
use rand::seq::index::sample as index_sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// A 3D point with finite coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Largest coordinate magnitude.
    pub fn norm_inf(&self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn sub(&self, other: &Point3) -> Point3 {
        Point3::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }

    pub fn add(&self, other: &Point3) -> Point3 {
        Point3::new(self.x + other.x, self.y + other.y, self.z + other.z)
    }

    pub fn scale(&self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn dot(&self, other: &Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Point3) -> Point3 {
        Point3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        self.sub(other).norm()
    }
}

/// An ordered, nonempty sequence of finite 3D points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
}

impl PointCloud {
    /// Builds a cloud, rejecting empty input and non-finite coordinates.
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::NonFinite {
                op: format!("point cloud construction ({:?})", p),
            });
        }
        Ok(PointCloud { points })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Point3 {
        let n = self.points.len() as f64;
        let mut c = Point3::new(0.0, 0.0, 0.0);
        for p in &self.points {
            c = c.add(p);
        }
        c.scale(1.0 / n)
    }

    /// Largest L2 norm over all points.
    pub fn max_norm(&self) -> f64 {
        self.points.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    /// Largest coordinate magnitude over all points.
    pub fn max_norm_inf(&self) -> f64 {
        self.points.iter().map(|p| p.norm_inf()).fold(0.0, f64::max)
    }
}

/// Vertices plus triangular faces (0-based indices).
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh, rejecting out-of-range indices, repeated indices
    /// within a face and zero-area faces.
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        for (i, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= vertices.len() {
                    return Err(Error::DegenerateFace {
                        face: i,
                        msg: format!("vertex index {} out of range ({} vertices)", v, vertices.len()),
                    });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::DegenerateFace {
                    face: i,
                    msg: "repeated vertex index".to_string(),
                });
            }
            let area = triangle_area(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]);
            if area == 0.0 {
                return Err(Error::DegenerateFace {
                    face: i,
                    msg: "zero area".to_string(),
                });
            }
        }
        Ok(TriangleMesh { vertices, faces })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face_points(&self, face: usize) -> (Point3, Point3, Point3) {
        let [a, b, c] = self.faces[face];
        (self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let (a, b, c) = self.face_points(face);
        triangle_area(&a, &b, &c)
    }

    /// Content fingerprint (FNV-1a over vertex bits and face indices),
    /// hex-encoded. Two meshes get the same fingerprint iff they have
    /// identical vertices and faces in identical order.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for v in &self.vertices {
            eat(&v.x.to_le_bytes());
            eat(&v.y.to_le_bytes());
            eat(&v.z.to_le_bytes());
        }
        for f in &self.faces {
            for &i in f {
                eat(&(i as u64).to_le_bytes());
            }
        }
        format!("{h:016x}")
    }
}

pub fn triangle_area(a: &Point3, b: &Point3, c: &Point3) -> f64 {
    b.sub(a).cross(&c.sub(a)).norm() * 0.5
}

/// A rigid transform `p -> R*p + t`.
///
/// The convention is fixed by this crate: `rotation` maps model coordinates
/// into the image's view. No claim is made about matching any external
/// dataset's camera convention.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraPose {
    /// Row-major 3x3 rotation.
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

/// Per-entry tolerance on `R^T R - I` and on `det(R) - 1`.
pub const POSE_ORTHONORMALITY_TOL: f64 = 1e-6;

impl CameraPose {
    pub fn identity() -> Self {
        CameraPose {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0, 0.0, 0.0],
        }
    }

    /// Rotation about `axis` by `angle` radians (Rodrigues), zero translation.
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let (ux, uy, uz) = (axis[0] / n, axis[1] / n, axis[2] / n);
        let (s, c) = angle.sin_cos();
        let ic = 1.0 - c;
        CameraPose {
            rotation: [
                [c + ux * ux * ic, ux * uy * ic - uz * s, ux * uz * ic + uy * s],
                [uy * ux * ic + uz * s, c + uy * uy * ic, uy * uz * ic - ux * s],
                [uz * ux * ic - uy * s, uz * uy * ic + ux * s, c + uz * uz * ic],
            ],
            translation: [0.0, 0.0, 0.0],
        }
    }

    /// Checks `R^T R = I` (within [`POSE_ORTHONORMALITY_TOL`] per entry) and
    /// `det(R) = +1`.
    pub fn validate(&self) -> Result<()> {
        let r = &self.rotation;
        for i in 0..3 {
            for j in 0..3 {
                let mut dot = 0.0;
                for k in 0..3 {
                    dot += r[k][i] * r[k][j];
                }
                let expected = if i == j { 1.0 } else { 0.0 };
                if (dot - expected).abs() > POSE_ORTHONORMALITY_TOL {
                    return Err(Error::InvalidPose {
                        msg: format!(
                            "R^T R entry ({i},{j}) = {dot:.9}, expected {expected}"
                        ),
                    });
                }
            }
        }
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        if (det - 1.0).abs() > POSE_ORTHONORMALITY_TOL {
            return Err(Error::InvalidPose {
                msg: format!("det(R) = {det:.9}, expected +1"),
            });
        }
        for t in &self.translation {
            if !t.is_finite() {
                return Err(Error::InvalidPose {
                    msg: "non-finite translation".to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        let r = &self.rotation;
        let t = &self.translation;
        Point3::new(
            r[0][0] * p.x + r[0][1] * p.y + r[0][2] * p.z + t[0],
            r[1][0] * p.x + r[1][1] * p.y + r[1][2] * p.z + t[1],
            r[2][0] * p.x + r[2][1] * p.y + r[2][2] * p.z + t[2],
        )
    }

    /// The inverse rigid transform `p -> R^T (p - t)`.
    pub fn inverse(&self) -> CameraPose {
        let r = &self.rotation;
        let t = &self.translation;
        let rt = [
            [r[0][0], r[1][0], r[2][0]],
            [r[0][1], r[1][1], r[2][1]],
            [r[0][2], r[1][2], r[2][2]],
        ];
        let tr = [
            -(rt[0][0] * t[0] + rt[0][1] * t[1] + rt[0][2] * t[2]),
            -(rt[1][0] * t[0] + rt[1][1] * t[1] + rt[1][2] * t[2]),
            -(rt[2][0] * t[0] + rt[2][1] * t[1] + rt[2][2] * t[2]),
        ];
        CameraPose {
            rotation: rt,
            translation: tr,
        }
    }
}

/// Normalization variants.
///
/// `UnitBall` divides by the largest L2 norm so the farthest point lands on
/// the unit sphere. `Square` divides by the largest L-infinity norm so the
/// cloud fits in `[-1, 1]^3` while keeping its aspect ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMethod {
    UnitBall,
    Square,
}

/// Optional centering applied before the scale is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterMode {
    None,
    Centroid,
}

/// Normalizes a cloud, returning the transformed cloud plus the applied
/// `scale` and `offset` so the transform can be inverted:
/// `original = normalized * scale + offset`.
pub fn normalize(
    cloud: &PointCloud,
    method: NormalizeMethod,
    center: CenterMode,
) -> Result<(PointCloud, f64, [f64; 3])> {
    let offset = match center {
        CenterMode::None => Point3::new(0.0, 0.0, 0.0),
        CenterMode::Centroid => cloud.centroid(),
    };
    let centered: Vec<Point3> = cloud.points().iter().map(|p| p.sub(&offset)).collect();
    let scale = match method {
        NormalizeMethod::UnitBall => centered.iter().map(|p| p.norm()).fold(0.0, f64::max),
        NormalizeMethod::Square => centered.iter().map(|p| p.norm_inf()).fold(0.0, f64::max),
    };
    if scale <= 0.0 {
        return Err(Error::DegenerateCloud);
    }
    let points = centered.iter().map(|p| p.scale(1.0 / scale)).collect();
    Ok((
        PointCloud::new(points)?,
        scale,
        [offset.x, offset.y, offset.z],
    ))
}

/// Undoes [`normalize`] given its returned scale and offset.
pub fn denormalize(cloud: &PointCloud, scale: f64, offset: [f64; 3]) -> Result<PointCloud> {
    let off = Point3::new(offset[0], offset[1], offset[2]);
    PointCloud::new(
        cloud
            .points()
            .iter()
            .map(|p| p.scale(scale).add(&off))
            .collect(),
    )
}

/// Applies a rigid pose to every point, preserving order.
pub fn apply_pose(cloud: &PointCloud, pose: &CameraPose) -> Result<PointCloud> {
    pose.validate()?;
    PointCloud::new(cloud.points().iter().map(|p| pose.apply(p)).collect())
}

/// Downsamples to exactly `n` points, keeping the selected points in their
/// original relative order.
///
/// When the cloud has at least `n` points this is a uniform sample without
/// replacement, so `n == len` returns the input unchanged. When the cloud is
/// smaller, `n` points are drawn with replacement and a warning is logged.
pub fn downsample(cloud: &PointCloud, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::Config {
            msg: "downsample target must be at least 1".to_string(),
        });
    }
    let mut rng = rng::rng_from(seed);
    let pts = cloud.points();
    let mut indices: Vec<usize> = if pts.len() >= n {
        index_sample(&mut rng, pts.len(), n).into_vec()
    } else {
        log::warn!(
            "downsample: cloud has {} points, fewer than requested {}; sampling with replacement",
            pts.len(),
            n
        );
        (0..n).map(|_| rng.random_range(0..pts.len())).collect()
    };
    indices.sort_unstable();
    PointCloud::new(indices.into_iter().map(|i| pts[i]).collect())
}

/// Perturbs every coordinate by an independent `N(0, sigma^2)` draw.
///
/// Draw order is fixed: per point, x then y then z. `sigma = 0` returns the
/// input unchanged.
pub fn add_noise(cloud: &PointCloud, sigma: f64, seed: u64) -> Result<PointCloud> {
    if sigma < 0.0 {
        return Err(Error::Config {
            msg: format!("noise sigma must be nonnegative, got {sigma}"),
        });
    }
    if sigma == 0.0 {
        return Ok(cloud.clone());
    }
    let mut rng = rng::rng_from(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma checked above");
    PointCloud::new(
        cloud
            .points()
            .iter()
            .map(|p| {
                Point3::new(
                    p.x + normal.sample(&mut rng),
                    p.y + normal.sample(&mut rng),
                    p.z + normal.sample(&mut rng),
                )
            })
            .collect(),
    )
}

/// Multiplies every coordinate by `factor` (> 0).
pub fn scale_cloud(cloud: &PointCloud, factor: f64) -> Result<PointCloud> {
    if !(factor > 0.0) {
        return Err(Error::Config {
            msg: format!("scale factor must be positive, got {factor}"),
        });
    }
    PointCloud::new(cloud.points().iter().map(|p| p.scale(factor)).collect())
}

#[cfg(test)]
mod tests;
