//! Procedural test meshes: cube, UV sphere and torus.
//!
//! These are the synthetic stand-ins the fixture generator and the test
//! suite use in place of a real scanned dataset. All three produce valid
//! [`TriangleMesh`] values (no degenerate faces) with deterministic vertex
//! and face order.

use crate::error::Result;
use crate::geometry::{Point3, TriangleMesh};

/// Axis-aligned cube centered at the origin: 8 vertices at `±half`,
/// 12 triangles.
pub fn cube(half: f64) -> Result<TriangleMesh> {
    let h = half;
    let vertices = vec![
        Point3::new(-h, -h, -h),
        Point3::new(h, -h, -h),
        Point3::new(h, h, -h),
        Point3::new(-h, h, -h),
        Point3::new(-h, -h, h),
        Point3::new(h, -h, h),
        Point3::new(h, h, h),
        Point3::new(-h, h, h),
    ];
    let faces = vec![
        [0, 2, 1],
        [0, 3, 2], // bottom
        [4, 5, 6],
        [4, 6, 7], // top
        [0, 1, 5],
        [0, 5, 4], // front
        [2, 3, 7],
        [2, 7, 6], // back
        [0, 4, 7],
        [0, 7, 3], // left
        [1, 2, 6],
        [1, 6, 5], // right
    ];
    TriangleMesh::new(vertices, faces)
}

/// Latitude/longitude sphere. `stacks >= 2`, `slices >= 3`.
pub fn uv_sphere(radius: f64, stacks: usize, slices: usize) -> Result<TriangleMesh> {
    assert!(stacks >= 2 && slices >= 3, "sphere needs stacks >= 2, slices >= 3");
    let mut vertices = vec![Point3::new(0.0, 0.0, radius)];
    for i in 1..stacks {
        let theta = std::f64::consts::PI * i as f64 / stacks as f64;
        let (st, ct) = theta.sin_cos();
        for j in 0..slices {
            let phi = std::f64::consts::TAU * j as f64 / slices as f64;
            let (sp, cp) = phi.sin_cos();
            vertices.push(Point3::new(radius * st * cp, radius * st * sp, radius * ct));
        }
    }
    vertices.push(Point3::new(0.0, 0.0, -radius));
    let bottom = vertices.len() - 1;

    let ring = |i: usize, j: usize| 1 + (i - 1) * slices + (j % slices);
    let mut faces = Vec::new();
    for j in 0..slices {
        faces.push([0, ring(1, j), ring(1, j + 1)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            let (a, b) = (ring(i, j), ring(i, j + 1));
            let (c, d) = (ring(i + 1, j + 1), ring(i + 1, j));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    for j in 0..slices {
        faces.push([bottom, ring(stacks - 1, j + 1), ring(stacks - 1, j)]);
    }
    TriangleMesh::new(vertices, faces)
}

/// Torus in the xy-plane: tube of radius `minor` swept along a circle of
/// radius `major`. Requires `major > minor > 0` for an embedded surface.
pub fn torus(
    major: f64,
    minor: f64,
    major_segs: usize,
    minor_segs: usize,
) -> Result<TriangleMesh> {
    assert!(major_segs >= 3 && minor_segs >= 3, "torus needs >= 3 segments per circle");
    let mut vertices = Vec::with_capacity(major_segs * minor_segs);
    for i in 0..major_segs {
        let u = std::f64::consts::TAU * i as f64 / major_segs as f64;
        let (su, cu) = u.sin_cos();
        for j in 0..minor_segs {
            let v = std::f64::consts::TAU * j as f64 / minor_segs as f64;
            let (sv, cv) = v.sin_cos();
            let r = major + minor * cv;
            vertices.push(Point3::new(r * cu, r * su, minor * sv));
        }
    }
    let at = |i: usize, j: usize| (i % major_segs) * minor_segs + (j % minor_segs);
    let mut faces = Vec::with_capacity(2 * major_segs * minor_segs);
    for i in 0..major_segs {
        for j in 0..minor_segs {
            let (a, b) = (at(i, j), at(i + 1, j));
            let (c, d) = (at(i + 1, j + 1), at(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriangleMesh::new(vertices, faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_has_eight_vertices_twelve_faces() {
        let m = cube(0.5).unwrap();
        assert_eq!(m.vertices().len(), 8);
        assert_eq!(m.faces().len(), 12);
        // Total surface area of a unit cube is 6.
        let area: f64 = (0..m.faces().len()).map(|f| m.face_area(f)).sum();
        assert!((area - 6.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_vertices_on_radius() {
        let m = uv_sphere(2.0, 6, 8).unwrap();
        for v in m.vertices() {
            assert!((v.norm() - 2.0).abs() < 1e-12);
        }
        assert_eq!(m.vertices().len(), 2 + 5 * 8);
    }

    #[test]
    fn torus_vertices_on_tube() {
        let (major, minor) = (1.0, 0.25);
        let m = torus(major, minor, 12, 8).unwrap();
        for v in m.vertices() {
            let ring = (v.x * v.x + v.y * v.y).sqrt() - major;
            let tube = (ring * ring + v.z * v.z).sqrt();
            assert!((tube - minor).abs() < 1e-12);
        }
    }
}
