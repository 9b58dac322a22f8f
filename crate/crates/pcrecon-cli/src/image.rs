//! Encoder input handling: grayscale PGM images, plain-text feature
//! vectors, and the orthographic silhouette renderer the fixture generator
//! uses.
//!
//! Images load as `side² × channels` matrices with one row per pixel
//! (row-major) and intensities scaled to `[0, 1]`. Feature files (`.feat`)
//! load as a single `1 × D` row and feed the identity encoder directly.

use std::path::Path;

use pcrecon::diffcore::Matrix;
use pcrecon::geometry::{write_atomic, CameraPose, TriangleMesh};
use pcrecon::{Error, Result};

/// Loads an encoder input, dispatching on the file extension: `.pgm` for
/// grayscale images, `.feat` for precomputed feature rows.
pub fn load_input(path: &Path) -> Result<Matrix> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => load_pgm(path),
        Some("feat") => load_feat(path),
        other => Err(Error::Config {
            msg: format!(
                "unsupported encoder input {:?} (expected .pgm or .feat), got extension {:?}",
                path.display(),
                other.unwrap_or("")
            ),
        }),
    }
}

/// Parses an ASCII (`P2`) PGM file into a `w·h × 1` matrix in `[0, 1]`.
pub fn load_pgm(path: &Path) -> Result<Matrix> {
    let text = std::fs::read_to_string(path)?;
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    let parse_err = |msg: &str| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg: msg.to_string(),
    };
    if tokens.next() != Some("P2") {
        return Err(parse_err("not an ASCII PGM (missing P2 magic)"));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err("bad header (width height maxval)"))?;
    }
    let [w, h, maxval] = dims;
    if maxval == 0 {
        return Err(parse_err("maxval must be positive"));
    }
    let mut data = Vec::with_capacity(w * h);
    for t in tokens {
        let v: f64 = t
            .parse()
            .map_err(|_| parse_err(&format!("bad pixel value {t:?}")))?;
        data.push(v / maxval as f64);
    }
    if data.len() != w * h {
        return Err(parse_err(&format!(
            "expected {} pixels, got {}",
            w * h,
            data.len()
        )));
    }
    Matrix::from_vec(w * h, 1, data)
}

/// Writes a grayscale image (row-major `[0, 1]` intensities) as ASCII PGM.
pub fn save_pgm(path: &Path, side: usize, pixels: &[f64]) -> Result<()> {
    assert_eq!(pixels.len(), side * side, "pixel count must match the side");
    let mut out = format!("P2\n{side} {side}\n255\n");
    for row in pixels.chunks(side) {
        let line: Vec<String> = row
            .iter()
            .map(|&v| ((v.clamp(0.0, 1.0) * 255.0).round() as u32).to_string())
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Loads a whitespace-separated feature row as a `1 × D` matrix.
pub fn load_feat(path: &Path) -> Result<Matrix> {
    let text = std::fs::read_to_string(path)?;
    let mut data = Vec::new();
    for t in text.split_whitespace() {
        data.push(t.parse::<f64>().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: format!("bad feature value {t:?}"),
        })?);
    }
    if data.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: "feature file holds no values".into(),
        });
    }
    let d = data.len();
    Matrix::from_vec(1, d, data)
}

/// Renders a binary orthographic silhouette of the posed mesh.
///
/// The camera looks down +z after the pose rotation; x and y map from the
/// fixed window `[-1.25, 1.25]` onto the pixel grid, which comfortably
/// frames every normalized fixture shape. Returns row-major intensities
/// (1.0 inside the silhouette).
pub fn render_silhouette(mesh: &TriangleMesh, pose: &CameraPose, side: usize) -> Vec<f64> {
    const WINDOW: f64 = 1.25;
    let verts: Vec<[f64; 2]> = mesh
        .vertices()
        .iter()
        .map(|v| {
            let p = pose.apply(v);
            [p.x, p.y]
        })
        .collect();
    let mut pixels = vec![0.0; side * side];
    for (row, chunk) in pixels.chunks_mut(side).enumerate() {
        // Image rows go top-down; +y points up.
        let y = WINDOW - 2.0 * WINDOW * (row as f64 + 0.5) / side as f64;
        for (col, px) in chunk.iter_mut().enumerate() {
            let x = -WINDOW + 2.0 * WINDOW * (col as f64 + 0.5) / side as f64;
            if mesh
                .faces()
                .iter()
                .any(|f| in_triangle([x, y], verts[f[0]], verts[f[1]], verts[f[2]]))
            {
                *px = 1.0;
            }
        }
    }
    pixels
}

fn in_triangle(p: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> bool {
    let edge = |u: [f64; 2], v: [f64; 2]| (v[0] - u[0]) * (p[1] - u[1]) - (v[1] - u[1]) * (p[0] - u[0]);
    let (e0, e1, e2) = (edge(a, b), edge(b, c), edge(c, a));
    // Accept either winding; boundary counts as inside.
    (e0 >= 0.0 && e1 >= 0.0 && e2 >= 0.0) || (e0 <= 0.0 && e1 <= 0.0 && e2 <= 0.0)
}
