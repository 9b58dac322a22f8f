//! `preprocess`: rotate each cloud into its image's view, normalize, scale,
//! downsample to the model's point count, and perturb — one `{id}.xyz` per
//! sample plus a provenance table.

use std::path::PathBuf;

use pcrecon::Result;

use crate::config::ConfigFlags;
use crate::manifest;

use super::process_dataset;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Dataset manifest (tab-separated).
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Root seed for the per-sample randomness streams.
    #[arg(long, value_name = "SEED")]
    pub seed: u64,
    #[command(flatten)]
    pub flags: ConfigFlags,
}

pub fn run(args: Args) -> Result<()> {
    let mut cfg = args.flags.resolve()?;
    cfg.seed = args.seed;
    cfg.model.seed = args.seed;
    cfg.echo();
    let entries = manifest::load(&args.manifest)?;
    let out = cfg.out_dir.clone();
    let processed = process_dataset(&cfg, &entries, &out, true)?;
    println!("processed {} samples into {}", processed.len(), out.display());
    Ok(())
}
