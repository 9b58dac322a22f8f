//! `sample-mesh`: draw surface points from a mesh into a cloud file,
//! either area-weighted uniform or Lloyd-relaxed.

use std::path::PathBuf;

use pcrecon::geometry::{load_mesh, write_pointcloud, CloudFormat, MeshFormat};
use pcrecon::sampling::{sample_surface_lloyd, sample_surface_uniform, SampleMethod};
use pcrecon::{Error, Result};

use super::{variant_name, LLOYD_OVERSAMPLE};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Sampling method: uniform | lloyd.
    #[arg(long, value_name = "METHOD", default_value = "uniform")]
    pub method: String,
    /// Number of points to draw.
    #[arg(long, value_name = "N")]
    pub n: usize,
    /// Lloyd relaxation rounds (ignored for uniform sampling).
    #[arg(long, value_name = "ITERS", default_value_t = 8)]
    pub iters: usize,
    /// Sampling seed.
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    pub seed: u64,
    /// Input mesh (.obj).
    #[arg(value_name = "IN.OBJ")]
    pub input: PathBuf,
    /// Output cloud (.ply or .xyz).
    #[arg(value_name = "OUT.PLY")]
    pub output: PathBuf,
}

pub fn run(args: Args) -> Result<()> {
    let method = match args.method.as_str() {
        "uniform" | "area_uniform" => SampleMethod::AreaUniform,
        "lloyd" => SampleMethod::Lloyd,
        other => {
            return Err(Error::Config {
                msg: format!("--method {other:?} (uniform|lloyd)"),
            })
        }
    };
    if args.n == 0 {
        return Err(Error::Config {
            msg: "--n must be at least 1".into(),
        });
    }
    println!("seed: {}", args.seed);
    println!(
        "config: {{\"method\": \"{}\", \"n\": {}, \"iters\": {}}}",
        variant_name(&method),
        args.n,
        args.iters
    );
    let mesh = load_mesh(&args.input, MeshFormat::Obj)?;
    let sample = match method {
        SampleMethod::AreaUniform => sample_surface_uniform(&mesh, args.n, args.seed)?,
        SampleMethod::Lloyd => {
            sample_surface_lloyd(&mesh, args.n, args.iters, LLOYD_OVERSAMPLE, args.seed)?
        }
    };
    write_pointcloud(
        &args.output,
        sample.points(),
        CloudFormat::from_path(&args.output)?,
    )?;
    println!(
        "sampled {} points from {} into {}",
        args.n,
        args.input.display(),
        args.output.display()
    );
    Ok(())
}
