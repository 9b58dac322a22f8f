//! `infer`: reconstruct point clouds for dataset images with a trained
//! run's checkpoint, using the deterministic regular-grid UV batch.

use std::path::PathBuf;

use pcrecon::model::latest_checkpoint;
use pcrecon::{Error, Result};

use crate::config::RunConfig;
use crate::manifest::{self, Split};

use super::infer_run;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Run directory holding config.json and checkpoints/.
    #[arg(long, value_name = "DIR")]
    pub run: PathBuf,
    /// Specific checkpoint file (defaults to the run's latest).
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Dataset directory (holding manifest.tsv).
    #[arg(long, value_name = "DIR")]
    pub dataset: PathBuf,
    /// Restrict to one split: train | val | test (default: all samples).
    #[arg(long, value_name = "SPLIT")]
    pub split: Option<String>,
    /// Output directory (default: `<run>/pred`).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<()> {
    let cfg = RunConfig::load_dir(&args.run)?;
    cfg.echo();
    let split = args
        .split
        .as_deref()
        .map(|s| {
            Split::parse(s).ok_or_else(|| Error::Config {
                msg: format!("unknown split {s:?} (train|val|test)"),
            })
        })
        .transpose()?;
    let checkpoint = match args.checkpoint {
        Some(path) => path,
        None => {
            let dir = args.run.join("checkpoints");
            latest_checkpoint(&dir)?.ok_or_else(|| Error::Config {
                msg: format!("no checkpoint under {}", dir.display()),
            })?
        }
    };
    let entries = manifest::load(&args.dataset.join("manifest.tsv"))?;
    let out = args.out.unwrap_or_else(|| args.run.join("pred"));
    let written = infer_run(&cfg, &checkpoint, &entries, split, &out)?;
    println!("wrote {written} clouds to {}", out.display());
    Ok(())
}
