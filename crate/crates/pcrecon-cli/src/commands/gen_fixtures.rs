//! `gen-fixtures`: a deterministic synthetic dataset — three analytic
//! shapes, two orthographic silhouette views each — for exercising the full
//! pipeline without any external data.

use std::f64::consts::TAU;

use pcrecon::geometry::{save_pose, write_mesh_obj, CameraPose};
use pcrecon::rng::{self, Stream};
use pcrecon::shapes;
use pcrecon::Result;
use rand::Rng;

use crate::config::ConfigFlags;
use crate::image;
use crate::manifest::{self, ManifestEntry, Split};

use super::ensure_dir;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Seed for the rotated views (also becomes the config seed).
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub flags: ConfigFlags,
}

pub fn run(args: Args) -> Result<()> {
    let mut cfg = args.flags.resolve()?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
        cfg.model.seed = seed;
    }
    cfg.echo();
    let out = cfg.out_dir.clone();
    ensure_dir(&out)?;

    let meshes = [
        ("cube", shapes::cube(0.5)?),
        ("sphere", shapes::uv_sphere(0.5, 12, 16)?),
        ("torus", shapes::torus(0.35, 0.15, 18, 10)?),
    ];
    let mut entries = Vec::new();
    for (idx, (name, mesh)) in meshes.iter().enumerate() {
        let mesh_path = out.join(format!("{name}.obj"));
        write_mesh_obj(&mesh_path, mesh)?;
        let mut r = rng::stream_rng(cfg.seed, Stream::Fixture, idx as u64);
        for view in 0..2usize {
            let id = format!("{name}_v{view}");
            // View 0 is the canonical orientation; view 1 is a seeded
            // rotation about the vertical axis, kept away from 0 and 2π so
            // the two silhouettes genuinely differ.
            let pose = if view == 0 {
                CameraPose::identity()
            } else {
                CameraPose::from_axis_angle([0.0, 1.0, 0.0], r.random_range(0.5..TAU - 0.5))
            };
            let pixels = image::render_silhouette(mesh, &pose, cfg.model.image_side);
            let image_path = out.join(format!("{id}.pgm"));
            image::save_pgm(&image_path, cfg.model.image_side, &pixels)?;
            let pose_path = out.join(format!("{id}.pose"));
            save_pose(&pose_path, &pose)?;
            let split = match (*name, view) {
                (_, 0) | ("cube", _) => Split::Train,
                ("sphere", _) => Split::Val,
                _ => Split::Test,
            };
            entries.push(ManifestEntry {
                id,
                image: image_path,
                geom: mesh_path.clone(),
                pose: Some(pose_path),
                split,
            });
        }
    }
    manifest::write(&out.join("manifest.tsv"), &entries)?;
    println!(
        "wrote {} samples ({} shapes, 2 views each) to {}",
        entries.len(),
        meshes.len(),
        out.display()
    );
    Ok(())
}
