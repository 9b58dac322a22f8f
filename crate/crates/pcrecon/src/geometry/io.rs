//! File formats.
//!
//! - XYZ: one point per line, three whitespace-separated decimal reals;
//!   `#` starts a comment line; blank lines are skipped.
//! - PLY: ascii 1.0 only. On read, the vertex element's `x`, `y`, `z`
//!   properties are extracted and every other element is skipped; on write,
//!   a minimal `element vertex` with float32 properties is emitted.
//! - OBJ: only `v` and `f` records. Face indices are 1-based and may carry
//!   `/vt/vn` suffixes, which are stripped. Polygons with more than three
//!   vertices are fan-triangulated around the first vertex.
//! - Pose: 12 whitespace-separated reals, row-major `[R|t]`.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use super::{CameraPose, Point3, PointCloud, TriangleMesh};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Xyz,
    PlyAscii,
}

impl CloudFormat {
    /// Picks a format from a file extension (`.xyz` or `.ply`).
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("xyz") | Some("txt") => Ok(CloudFormat::Xyz),
            Some("ply") => Ok(CloudFormat::PlyAscii),
            other => Err(Error::Config {
                msg: format!("cannot infer cloud format from extension {:?}", other),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
}

fn parse_real(path: &Path, line_no: usize, token: &str) -> Result<f64> {
    token
        .parse::<f64>()
        .map_err(|_| Error::parse(path, line_no, format!("expected a real number, got {token:?}")))
}

/// Loads a point cloud in the declared format.
pub fn load_pointcloud(path: &Path, format: CloudFormat) -> Result<PointCloud> {
    let text = fs::read_to_string(path)?;
    match format {
        CloudFormat::Xyz => parse_xyz(path, &text),
        CloudFormat::PlyAscii => parse_ply(path, &text),
    }
}

fn parse_xyz(path: &Path, text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let mut coord = [0.0f64; 3];
        for c in &mut coord {
            let tok = it
                .next()
                .ok_or_else(|| Error::parse(path, i + 1, "expected three coordinates"))?;
            *c = parse_real(path, i + 1, tok)?;
        }
        if it.next().is_some() {
            return Err(Error::parse(path, i + 1, "trailing tokens after z coordinate"));
        }
        points.push(Point3::new(coord[0], coord[1], coord[2]));
    }
    PointCloud::new(points)
}

fn parse_ply(path: &Path, text: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate();

    let (_, magic) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty file"))?;
    if magic.trim() != "ply" {
        return Err(Error::parse(path, 1, "missing 'ply' magic line"));
    }

    // Header: collect (element name, count) in declaration order plus the
    // property column layout of the vertex element.
    let mut elements: Vec<(String, usize)> = Vec::new();
    let mut vertex_props: Vec<String> = Vec::new();
    let mut format_seen = false;
    let mut header_done = false;
    let mut header_end_line = 0;
    for (i, raw) in lines.by_ref() {
        let line = raw.trim();
        let line_no = i + 1;
        if line == "end_header" {
            header_done = true;
            header_end_line = line_no;
            break;
        }
        let mut it = line.split_whitespace();
        match it.next() {
            Some("format") => {
                let kind = it.next().unwrap_or("");
                if kind != "ascii" {
                    return Err(Error::parse(
                        path,
                        line_no,
                        format!("unsupported ply format {kind:?}; only ascii 1.0 is handled"),
                    ));
                }
                format_seen = true;
            }
            Some("comment") | Some("obj_info") => {}
            Some("element") => {
                let name = it
                    .next()
                    .ok_or_else(|| Error::parse(path, line_no, "element without a name"))?;
                let count: usize = it
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| Error::parse(path, line_no, "element without a count"))?;
                elements.push((name.to_string(), count));
            }
            Some("property") => {
                if let Some((name, _)) = elements.last() {
                    if name == "vertex" {
                        // property <type> <name> (list properties never
                        // appear on vertex elements we accept)
                        let mut toks: Vec<&str> = it.collect();
                        let pname = toks
                            .pop()
                            .ok_or_else(|| Error::parse(path, line_no, "property without a name"))?;
                        vertex_props.push(pname.to_string());
                    }
                }
            }
            Some(other) => {
                return Err(Error::parse(path, line_no, format!("unexpected header record {other:?}")));
            }
            None => {}
        }
    }
    if !header_done {
        return Err(Error::parse(path, 1, "missing end_header"));
    }
    if !format_seen {
        return Err(Error::parse(path, 1, "missing format line"));
    }

    let col = |want: &str| -> Result<usize> {
        vertex_props
            .iter()
            .position(|p| p == want)
            .ok_or_else(|| Error::parse(path, header_end_line, format!("vertex element lacks property {want}")))
    };
    let (cx, cy, cz) = (col("x")?, col("y")?, col("z")?);

    let mut points = Vec::new();
    for (name, count) in &elements {
        for _ in 0..*count {
            let (i, raw) = lines
                .next()
                .ok_or_else(|| Error::parse(path, header_end_line, format!("truncated data for element {name}")))?;
            if name != "vertex" {
                continue;
            }
            let line_no = i + 1;
            let toks: Vec<&str> = raw.split_whitespace().collect();
            if toks.len() < vertex_props.len() {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("expected {} vertex properties, got {}", vertex_props.len(), toks.len()),
                ));
            }
            points.push(Point3::new(
                parse_real(path, line_no, toks[cx])?,
                parse_real(path, line_no, toks[cy])?,
                parse_real(path, line_no, toks[cz])?,
            ));
        }
    }
    PointCloud::new(points)
}

/// Writes a point cloud in the declared format.
///
/// XYZ coordinates are printed with 9 fractional digits; PLY coordinates are
/// rounded through f32, matching the format's float32 semantics. Both
/// round-trip within 1e-6 per coordinate for unit-scale data.
pub fn write_pointcloud(path: &Path, cloud: &PointCloud, format: CloudFormat) -> Result<()> {
    let mut out = String::new();
    match format {
        CloudFormat::Xyz => {
            for p in cloud.points() {
                out.push_str(&format!("{:.9} {:.9} {:.9}\n", p.x, p.y, p.z));
            }
        }
        CloudFormat::PlyAscii => {
            out.push_str("ply\nformat ascii 1.0\n");
            out.push_str(&format!("element vertex {}\n", cloud.len()));
            out.push_str("property float x\nproperty float y\nproperty float z\nend_header\n");
            for p in cloud.points() {
                out.push_str(&format!("{} {} {}\n", p.x as f32, p.y as f32, p.z as f32));
            }
        }
    }
    write_atomic(path, out.as_bytes())
}

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out")
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Loads a triangle mesh (OBJ subset: `v` and `f` records).
pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<TriangleMesh> {
    let MeshFormat::Obj = format;
    let text = fs::read_to_string(path)?;
    parse_obj(path, &text)
}

fn parse_obj(path: &Path, text: &str) -> Result<TriangleMesh> {
    let mut vertices: Vec<Point3> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let mut coord = [0.0f64; 3];
                for c in &mut coord {
                    let tok = it
                        .next()
                        .ok_or_else(|| Error::parse(path, line_no, "vertex needs three coordinates"))?;
                    *c = parse_real(path, line_no, tok)?;
                }
                vertices.push(Point3::new(coord[0], coord[1], coord[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in it {
                    // "7/1/3" -> "7": texture/normal references are dropped.
                    let first = tok.split('/').next().unwrap_or("");
                    let v: i64 = first.parse().map_err(|_| {
                        Error::parse(path, line_no, format!("bad face index {tok:?}"))
                    })?;
                    if v < 1 {
                        return Err(Error::parse(
                            path,
                            line_no,
                            format!("face index {v} out of range (1-based positive indices only)"),
                        ));
                    }
                    let v = (v - 1) as usize;
                    if v >= vertices.len() {
                        return Err(Error::parse(
                            path,
                            line_no,
                            format!("face references vertex {} but only {} are defined", v + 1, vertices.len()),
                        ));
                    }
                    idx.push(v);
                }
                if idx.len() < 3 {
                    return Err(Error::parse(path, line_no, "face needs at least three vertices"));
                }
                for k in 1..idx.len() - 1 {
                    faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            // Ignore the rest of the OBJ vocabulary (vn, vt, o, g, s, mtllib, usemtl, ...).
            Some(_) => {}
            None => {}
        }
    }
    TriangleMesh::new(vertices, faces)
}

/// Writes a mesh as OBJ (`v` and `f` records only).
pub fn write_mesh_obj(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    let mut out = String::new();
    for v in mesh.vertices() {
        out.push_str(&format!("v {:.9} {:.9} {:.9}\n", v.x, v.y, v.z));
    }
    for f in mesh.faces() {
        out.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
    }
    write_atomic(path, out.as_bytes())
}

/// Loads a pose file: 12 whitespace-separated reals, row-major `[R|t]`.
pub fn load_pose(path: &Path) -> Result<CameraPose> {
    let text = fs::read_to_string(path)?;
    let vals: Vec<f64> = text
        .split_whitespace()
        .map(|t| parse_real(path, 1, t))
        .collect::<Result<_>>()?;
    if vals.len() != 12 {
        return Err(Error::parse(
            path,
            1,
            format!("pose file must hold exactly 12 reals, got {}", vals.len()),
        ));
    }
    let pose = CameraPose {
        rotation: [
            [vals[0], vals[1], vals[2]],
            [vals[4], vals[5], vals[6]],
            [vals[8], vals[9], vals[10]],
        ],
        translation: [vals[3], vals[7], vals[11]],
    };
    pose.validate()?;
    Ok(pose)
}

/// Writes a pose as 12 reals, row-major `[R|t]`, one matrix row per line.
pub fn save_pose(path: &Path, pose: &CameraPose) -> Result<()> {
    let r = &pose.rotation;
    let t = &pose.translation;
    let mut out = String::new();
    for i in 0..3 {
        out.push_str(&format!(
            "{:.17} {:.17} {:.17} {:.17}\n",
            r[i][0], r[i][1], r[i][2], t[i]
        ));
    }
    write_atomic(path, out.as_bytes())
}
