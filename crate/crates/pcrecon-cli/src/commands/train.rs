//! `train`: fit a model on a preprocessed dataset's train split. Resumes
//! from the latest checkpoint in the output directory, continuing toward
//! the configured absolute step target.

use std::path::PathBuf;

use pcrecon::Result;

use crate::config::ConfigFlags;

use super::train_run;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Preprocessed dataset directory (holding manifest.tsv).
    #[arg(long, value_name = "DIR")]
    pub dataset: PathBuf,
    /// Seed for initialization and per-step UV draws.
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
    let run_dir = cfg.out_dir.clone();
    let (step, loss) = train_run(&cfg, &args.dataset, &run_dir)?;
    match loss {
        Some(l) => println!(
            "trained to step {step}, final loss {l:.6e}; artifacts in {}",
            run_dir.display()
        ),
        None => println!(
            "already at step {step}; checkpoint refreshed in {}",
            run_dir.display()
        ),
    }
    Ok(())
}
