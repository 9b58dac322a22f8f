use super::*;
use crate::error::Error;
use proptest::prelude::*;
use std::f64::consts::FRAC_PI_2;
use std::fs;

fn cloud(points: &[(f64, f64, f64)]) -> PointCloud {
    PointCloud::new(points.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect()).unwrap()
}

fn approx(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn cloud_rejects_empty_and_nonfinite() {
    assert!(matches!(PointCloud::new(vec![]), Err(Error::EmptyCloud)));
    let bad = vec![Point3::new(0.0, f64::NAN, 0.0)];
    assert!(matches!(PointCloud::new(bad), Err(Error::NonFinite { .. })));
}

#[test]
fn mesh_rejects_bad_faces() {
    let verts = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
    ];
    assert!(TriangleMesh::new(verts.clone(), vec![[0, 1, 2]]).is_ok());
    // Index out of range.
    assert!(matches!(
        TriangleMesh::new(verts.clone(), vec![[0, 1, 3]]),
        Err(Error::DegenerateFace { face: 0, .. })
    ));
    // Repeated index.
    assert!(matches!(
        TriangleMesh::new(verts.clone(), vec![[0, 1, 1]]),
        Err(Error::DegenerateFace { face: 0, .. })
    ));
    // Zero area: three collinear points.
    let collinear = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(2.0, 0.0, 0.0),
    ];
    assert!(matches!(
        TriangleMesh::new(collinear, vec![[0, 1, 2]]),
        Err(Error::DegenerateFace { face: 0, .. })
    ));
}

// -- normalization -----------------------------------------------------------

#[test]
fn normalize_unit_ball_example() {
    let c = cloud(&[(2.0, 0.0, 0.0), (0.0, 1.0, 0.0)]);
    let (out, scale, offset) = normalize(&c, NormalizeMethod::UnitBall, CenterMode::None).unwrap();
    assert_eq!(out.points()[0], Point3::new(1.0, 0.0, 0.0));
    assert_eq!(out.points()[1], Point3::new(0.0, 0.5, 0.0));
    assert_eq!(scale, 2.0);
    assert_eq!(offset, [0.0, 0.0, 0.0]);
}

#[test]
fn normalize_square_example() {
    let c = cloud(&[(2.0, 0.0, 0.0), (0.0, 1.0, 0.0)]);
    let (out, scale, _) = normalize(&c, NormalizeMethod::Square, CenterMode::None).unwrap();
    assert_eq!(out.points()[0], Point3::new(1.0, 0.0, 0.0));
    assert_eq!(out.points()[1], Point3::new(0.0, 0.5, 0.0));
    assert_eq!(scale, 2.0);
}

#[test]
fn normalize_square_differs_from_unit_ball_off_axis() {
    // (1,1,1): L2 norm sqrt(3), L-inf norm 1 — the two methods disagree.
    let c = cloud(&[(1.0, 1.0, 1.0), (0.1, 0.0, 0.0)]);
    let (_, s_ball, _) = normalize(&c, NormalizeMethod::UnitBall, CenterMode::None).unwrap();
    let (_, s_square, _) = normalize(&c, NormalizeMethod::Square, CenterMode::None).unwrap();
    assert!(approx(s_ball, 3.0f64.sqrt(), 1e-12));
    assert!(approx(s_square, 1.0, 1e-12));
}

#[test]
fn normalize_degenerate_single_point_at_centroid() {
    let c = cloud(&[(1.0, 1.0, 1.0)]);
    assert!(matches!(
        normalize(&c, NormalizeMethod::UnitBall, CenterMode::Centroid),
        Err(Error::DegenerateCloud)
    ));
}

// -- poses -------------------------------------------------------------------

#[test]
fn identity_pose_is_noop() {
    let c = cloud(&[(0.3, -0.2, 0.9), (1.0, 2.0, 3.0)]);
    let out = apply_pose(&c, &CameraPose::identity()).unwrap();
    assert_eq!(out, c);
}

#[test]
fn z_rotation_quarter_turn() {
    let c = cloud(&[(1.0, 0.0, 0.0)]);
    let pose = CameraPose::from_axis_angle([0.0, 0.0, 1.0], FRAC_PI_2);
    let out = apply_pose(&c, &pose).unwrap();
    let p = out.points()[0];
    assert!(approx(p.x, 0.0, 1e-9) && approx(p.y, 1.0, 1e-9) && approx(p.z, 0.0, 1e-9));
}

#[test]
fn pose_inverse_round_trips() {
    let c = cloud(&[(0.3, -0.2, 0.9), (1.0, 2.0, 3.0), (-0.5, 0.5, -0.5)]);
    let mut pose = CameraPose::from_axis_angle([1.0, 2.0, 3.0], 0.7);
    pose.translation = [0.1, -0.2, 0.3];
    let fwd = apply_pose(&c, &pose).unwrap();
    let back = apply_pose(&fwd, &pose.inverse()).unwrap();
    for (a, b) in back.points().iter().zip(c.points()) {
        assert!(a.distance(b) < 1e-9);
    }
}

#[test]
fn pose_rejects_non_orthonormal_rotation() {
    let pose = CameraPose {
        rotation: [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 1.0]],
        translation: [0.0, 0.0, 0.0],
    };
    let c = cloud(&[(1.0, 0.0, 0.0)]);
    assert!(matches!(apply_pose(&c, &pose), Err(Error::InvalidPose { .. })));
}

#[test]
fn pose_rejects_reflection() {
    // Orthonormal but det = -1.
    let pose = CameraPose {
        rotation: [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        translation: [0.0, 0.0, 0.0],
    };
    assert!(matches!(pose.validate(), Err(Error::InvalidPose { .. })));
}

// -- downsampling ------------------------------------------------------------

#[test]
fn downsample_membership_and_count() {
    let pts: Vec<Point3> = (0..4096)
        .map(|i| {
            let t = i as f64;
            Point3::new(t.sin(), (t * 0.7).cos(), t * 1e-4)
        })
        .collect();
    let c = PointCloud::new(pts).unwrap();
    let out = downsample(&c, 2048, 42).unwrap();
    assert_eq!(out.len(), 2048);
    for p in out.points() {
        assert!(
            c.points().iter().any(|q| q == p),
            "downsampled point {p:?} not found in input"
        );
    }
}

#[test]
fn downsample_full_size_is_identity() {
    let c = cloud(&[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (2.0, 0.0, 0.0)]);
    let out = downsample(&c, 3, 7).unwrap();
    assert_eq!(out, c);
}

#[test]
fn downsample_is_seed_deterministic() {
    let pts: Vec<Point3> = (0..100).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
    let c = PointCloud::new(pts).unwrap();
    let a = downsample(&c, 10, 123).unwrap();
    let b = downsample(&c, 10, 123).unwrap();
    assert_eq!(a, b);
    let d = downsample(&c, 10, 124).unwrap();
    assert_ne!(a, d, "different seeds should pick different subsets");
}

#[test]
fn downsample_upsamples_with_replacement_when_short() {
    let c = cloud(&[(0.0, 0.0, 0.0), (1.0, 0.0, 0.0)]);
    let out = downsample(&c, 5, 9).unwrap();
    assert_eq!(out.len(), 5);
    for p in out.points() {
        assert!(c.points().contains(p));
    }
}

// -- noise -------------------------------------------------------------------

#[test]
fn zero_sigma_noise_is_identity() {
    let c = cloud(&[(0.1, 0.2, 0.3), (-1.0, 2.0, -3.0)]);
    let out = add_noise(&c, 0.0, 5).unwrap();
    assert_eq!(out, c);
}

#[test]
fn noise_is_seed_deterministic() {
    let c = cloud(&[(0.1, 0.2, 0.3), (-1.0, 2.0, -3.0)]);
    let a = add_noise(&c, 0.01, 5).unwrap();
    let b = add_noise(&c, 0.01, 5).unwrap();
    assert_eq!(a, b);
}

#[test]
fn noise_stddev_matches_sigma() {
    // 1e5 points -> 3e5 scalar perturbations; the sample stddev of the
    // deltas must land within 5% of sigma.
    let n = 100_000;
    let pts: Vec<Point3> = (0..n).map(|_| Point3::new(0.0, 0.0, 0.0)).collect();
    let c = PointCloud::new(pts).unwrap();
    let sigma = 0.01;
    let noisy = add_noise(&c, sigma, 77).unwrap();
    let mut deltas = Vec::with_capacity(3 * n);
    for (p, q) in c.points().iter().zip(noisy.points()) {
        deltas.extend_from_slice(&[q.x - p.x, q.y - p.y, q.z - p.z]);
    }
    let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
    let var = deltas.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>()
        / (deltas.len() - 1) as f64;
    let sd = var.sqrt();
    assert!(
        (0.0095..=0.0105).contains(&sd),
        "sample stddev {sd} outside [0.0095, 0.0105]"
    );
}

#[test]
fn noise_rejects_negative_sigma() {
    let c = cloud(&[(0.0, 0.0, 0.0)]);
    assert!(add_noise(&c, -0.1, 0).is_err());
}

// -- scaling -----------------------------------------------------------------

#[test]
fn scale_examples() {
    let c = cloud(&[(0.1, 0.0, 0.0)]);
    assert_eq!(scale_cloud(&c, 1.0).unwrap(), c);
    let up = scale_cloud(&c, 50.0).unwrap();
    assert_eq!(up.points()[0], Point3::new(5.0, 0.0, 0.0));
    let down_up = scale_cloud(&scale_cloud(&c, 0.02).unwrap(), 50.0).unwrap();
    for (a, b) in down_up.points().iter().zip(c.points()) {
        assert!(a.distance(b) < 1e-12);
    }
    assert!(scale_cloud(&c, 0.0).is_err());
    assert!(scale_cloud(&c, -1.0).is_err());
}

// -- file I/O ----------------------------------------------------------------

#[test]
fn xyz_reads_points_and_comments() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pts.xyz");
    fs::write(&path, "# a comment\n0 0 0\n\n1 2 3\n").unwrap();
    let c = load_pointcloud(&path, CloudFormat::Xyz).unwrap();
    assert_eq!(c.len(), 2);
    assert_eq!(c.points()[1], Point3::new(1.0, 2.0, 3.0));
}

#[test]
fn xyz_rejects_malformed_lines() {
    let dir = tempfile::tempdir().unwrap();
    for bad in ["0 0\n", "0 0 zebra\n", "0 0 0 0\n"] {
        let path = dir.path().join("bad.xyz");
        fs::write(&path, bad).unwrap();
        assert!(
            matches!(load_pointcloud(&path, CloudFormat::Xyz), Err(Error::Parse { .. })),
            "input {bad:?} should fail to parse"
        );
    }
}

#[test]
fn xyz_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rt.xyz");
    let c = cloud(&[(0.123456789, -0.5, 0.25), (1.0, 2.0, -3.0)]);
    write_pointcloud(&path, &c, CloudFormat::Xyz).unwrap();
    let back = load_pointcloud(&path, CloudFormat::Xyz).unwrap();
    assert_eq!(back.len(), c.len());
    for (a, b) in back.points().iter().zip(c.points()) {
        assert!(approx(a.x, b.x, 1e-6) && approx(a.y, b.y, 1e-6) && approx(a.z, b.z, 1e-6));
    }
}

#[test]
fn ply_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rt.ply");
    let c = cloud(&[(0.123456789, -0.5, 0.25), (1.0, 2.0, -3.0)]);
    write_pointcloud(&path, &c, CloudFormat::PlyAscii).unwrap();
    let back = load_pointcloud(&path, CloudFormat::PlyAscii).unwrap();
    for (a, b) in back.points().iter().zip(c.points()) {
        assert!(approx(a.x, b.x, 1e-6) && approx(a.y, b.y, 1e-6) && approx(a.z, b.z, 1e-6));
    }
}

#[test]
fn ply_skips_extra_elements_and_properties() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("extra.ply");
    fs::write(
        &path,
        "ply\nformat ascii 1.0\ncomment made by hand\n\
         element vertex 2\nproperty float nx\nproperty float x\nproperty float y\nproperty float z\n\
         element face 1\nproperty list uchar int vertex_indices\nend_header\n\
         9 0 0 0\n9 1 2 3\n3 0 1 0\n",
    )
    .unwrap();
    let c = load_pointcloud(&path, CloudFormat::PlyAscii).unwrap();
    assert_eq!(c.len(), 2);
    assert_eq!(c.points()[0], Point3::new(0.0, 0.0, 0.0));
    assert_eq!(c.points()[1], Point3::new(1.0, 2.0, 3.0));
}

#[test]
fn ply_missing_end_header_is_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.ply");
    fs::write(&path, "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n").unwrap();
    assert!(matches!(
        load_pointcloud(&path, CloudFormat::PlyAscii),
        Err(Error::Parse { .. })
    ));
}

#[test]
fn obj_unit_cube_loads() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cube.obj");
    fs::write(
        &path,
        "v -0.5 -0.5 -0.5\nv 0.5 -0.5 -0.5\nv 0.5 0.5 -0.5\nv -0.5 0.5 -0.5\n\
         v -0.5 -0.5 0.5\nv 0.5 -0.5 0.5\nv 0.5 0.5 0.5\nv -0.5 0.5 0.5\n\
         f 1 2 3\nf 1 3 4\nf 5 7 6\nf 5 8 7\nf 1 5 6\nf 1 6 2\n\
         f 2 6 7\nf 2 7 3\nf 3 7 8\nf 3 8 4\nf 4 8 5\nf 4 5 1\n",
    )
    .unwrap();
    let m = load_mesh(&path, MeshFormat::Obj).unwrap();
    assert_eq!(m.vertices().len(), 8);
    assert_eq!(m.faces().len(), 12);
}

#[test]
fn obj_quad_is_fan_triangulated() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("quad.obj");
    fs::write(
        &path,
        "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n",
    )
    .unwrap();
    let m = load_mesh(&path, MeshFormat::Obj).unwrap();
    assert_eq!(m.faces(), &[[0, 1, 2], [0, 2, 3]]);
}

#[test]
fn obj_strips_texture_and_normal_refs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tex.obj");
    fs::write(
        &path,
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\nf 1/1/1 2/1/1 3/1/1\n",
    )
    .unwrap();
    let m = load_mesh(&path, MeshFormat::Obj).unwrap();
    assert_eq!(m.faces(), &[[0, 1, 2]]);
}

#[test]
fn obj_out_of_range_face_is_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("oob.obj");
    fs::write(&path, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n").unwrap();
    assert!(matches!(load_mesh(&path, MeshFormat::Obj), Err(Error::Parse { .. })));
}

#[test]
fn obj_write_read_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rt.obj");
    let verts = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
        Point3::new(0.0, 0.0, 1.0),
    ];
    let faces = vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    let m = TriangleMesh::new(verts, faces).unwrap();
    write_mesh_obj(&path, &m).unwrap();
    let back = load_mesh(&path, MeshFormat::Obj).unwrap();
    assert_eq!(back.faces(), m.faces());
    for (a, b) in back.vertices().iter().zip(m.vertices()) {
        assert!(a.distance(b) < 1e-9);
    }
}

#[test]
fn pose_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pose.txt");
    let mut pose = CameraPose::from_axis_angle([0.0, 1.0, 0.0], 0.3);
    pose.translation = [0.5, -0.25, 0.125];
    save_pose(&path, &pose).unwrap();
    let back = load_pose(&path).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert!(approx(back.rotation[i][j], pose.rotation[i][j], 1e-12));
        }
        assert!(approx(back.translation[i], pose.translation[i], 1e-12));
    }
}

#[test]
fn pose_file_wrong_count_is_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.txt");
    fs::write(&path, "1 0 0 0 0 1 0 0 0 0 1\n").unwrap();
    assert!(matches!(load_pose(&path), Err(Error::Parse { .. })));
}

// -- property tests ----------------------------------------------------------

fn arb_point() -> impl Strategy<Value = Point3> {
    (-100.0f64..100.0, -100.0f64..100.0, -100.0f64..100.0)
        .prop_map(|(x, y, z)| Point3::new(x, y, z))
}

fn arb_cloud(max_len: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(arb_point(), 1..=max_len)
        .prop_map(|pts| PointCloud::new(pts).unwrap())
}

proptest! {
    #[test]
    fn transforms_preserve_count_and_order(c in arb_cloud(64), seed in any::<u64>()) {
        // Tag each point by its position along x so order changes are visible.
        let tagged = PointCloud::new(
            c.points().iter().enumerate()
                .map(|(i, p)| Point3::new(p.x, p.y, i as f64))
                .collect(),
        ).unwrap();
        let noisy = add_noise(&tagged, 0.001, seed).unwrap();
        prop_assert_eq!(noisy.len(), tagged.len());
        for (i, p) in noisy.points().iter().enumerate() {
            prop_assert!((p.z - i as f64).abs() < 0.01);
        }
        let scaled = scale_cloud(&tagged, 2.0).unwrap();
        for (i, p) in scaled.points().iter().enumerate() {
            prop_assert_eq!(p.z, 2.0 * i as f64);
        }
    }

    #[test]
    fn normalize_unit_ball_bounds_and_inverse(c in arb_cloud(32)) {
        prop_assume!(c.max_norm() > 1e-6);
        let (out, scale, offset) = normalize(&c, NormalizeMethod::UnitBall, CenterMode::None).unwrap();
        prop_assert!((out.max_norm() - 1.0).abs() <= 1e-9);
        let back = denormalize(&out, scale, offset).unwrap();
        for (a, b) in back.points().iter().zip(c.points()) {
            prop_assert!(a.distance(b) < 1e-9 * scale.max(1.0));
        }
    }

    #[test]
    fn normalize_square_bounds_and_inverse(c in arb_cloud(32)) {
        // Centering first: the extent around the centroid is what must be
        // nonzero for the square method to apply.
        let centroid = c.centroid();
        let extent = c.points().iter()
            .map(|p| p.sub(&centroid).norm_inf())
            .fold(0.0, f64::max);
        prop_assume!(extent > 1e-6);
        let (out, scale, offset) = normalize(&c, NormalizeMethod::Square, CenterMode::Centroid).unwrap();
        prop_assert!((out.max_norm_inf() - 1.0).abs() <= 1e-9);
        let back = denormalize(&out, scale, offset).unwrap();
        for (a, b) in back.points().iter().zip(c.points()) {
            prop_assert!(a.distance(b) < 1e-9 * scale.max(1.0));
        }
    }

    #[test]
    fn poses_preserve_pairwise_distances(
        c in arb_cloud(16),
        axis in (0.1f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
        angle in -3.0f64..3.0,
        t in (-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0),
    ) {
        let mut pose = CameraPose::from_axis_angle([axis.0, axis.1, axis.2], angle);
        pose.translation = [t.0, t.1, t.2];
        let out = apply_pose(&c, &pose).unwrap();
        let pts = c.points();
        let outs = out.points();
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let before = pts[i].distance(&pts[j]);
                let after = outs[i].distance(&outs[j]);
                prop_assert!((before - after).abs() < 1e-9 * (1.0 + before));
            }
        }
    }

    #[test]
    fn xyz_file_round_trip_any_cloud(c in arb_cloud(24)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("prop.xyz");
        write_pointcloud(&path, &c, CloudFormat::Xyz).unwrap();
        let back = load_pointcloud(&path, CloudFormat::Xyz).unwrap();
        prop_assert_eq!(back.len(), c.len());
        for (a, b) in back.points().iter().zip(c.points()) {
            prop_assert!((a.x - b.x).abs() <= 1e-6);
            prop_assert!((a.y - b.y).abs() <= 1e-6);
            prop_assert!((a.z - b.z).abs() <= 1e-6);
        }
    }

    #[test]
    fn downsample_output_is_subset(c in arb_cloud(64), n in 1usize..32, seed in any::<u64>()) {
        let out = downsample(&c, n, seed).unwrap();
        prop_assert_eq!(out.len(), n);
        for p in out.points() {
            prop_assert!(c.points().iter().any(|q| q == p));
        }
    }
}
