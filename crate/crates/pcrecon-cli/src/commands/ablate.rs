//! `ablate`: run one full preprocess → train → infer → eval pipeline per
//! value along a configuration axis and summarize the results in a
//! comparison table (method, distance ×10², F-score, track score).
//!
//! The `scale` axis scores every row in canonical units — predictions and
//! targets are divided by the row's factor before evaluation — so rows with
//! different training scales stay comparable.

use std::path::{Path, PathBuf};

use pcrecon::geometry::write_atomic;
use pcrecon::metrics::Track;
use pcrecon::model::latest_checkpoint;
use pcrecon::{Error, Result};

use crate::config::{self, ConfigFlags, RunConfig};
use crate::manifest::{self, ManifestEntry};

use super::{ensure_dir, eval_dirs, infer_run, process_dataset, train_run};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    Normalization,
    Scale,
    Sampling,
    Projection,
}

impl Axis {
    fn parse(s: &str) -> Result<Axis> {
        match s {
            "normalization" => Ok(Axis::Normalization),
            "scale" => Ok(Axis::Scale),
            "sampling" => Ok(Axis::Sampling),
            "projection" => Ok(Axis::Projection),
            other => Err(Error::Config {
                msg: format!(
                    "unknown axis {other:?} (normalization|scale|sampling|projection)"
                ),
            }),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Axis::Normalization => "normalization",
            Axis::Scale => "scale",
            Axis::Sampling => "sampling",
            Axis::Projection => "projection",
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Raw dataset manifest every pipeline starts from.
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Configuration axis: normalization | scale | sampling | projection.
    #[arg(long, value_name = "AXIS")]
    pub axis: String,
    /// Comma-separated axis values (e.g. "1,50" or "unit_ball,square").
    #[arg(long, value_name = "V1,V2,...", value_delimiter = ',')]
    pub values: Vec<String>,
    /// Score track for the table: a | b.
    #[arg(long, value_name = "TRACK", default_value = "a")]
    pub track: String,
    /// Root seed shared by every pipeline.
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub flags: ConfigFlags,
}

pub fn run(args: Args) -> Result<()> {
    let axis = Axis::parse(&args.axis)?;
    if args.values.iter().all(|v| v.trim().is_empty()) {
        return Err(Error::Config {
            msg: "ablate needs at least one --values entry".into(),
        });
    }
    let track: Track = config::variant("track", &args.track)?;
    let mut cfg = args.flags.resolve()?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
        cfg.model.seed = seed;
    }
    cfg.echo();
    let root = cfg.out_dir.clone();
    ensure_dir(&root)?;
    let entries = manifest::load(&args.manifest)?;

    let mut rows = Vec::new();
    let mut first_err: Option<Error> = None;
    for value in &args.values {
        match run_value(&cfg, axis, value, &entries, &root, track) {
            Ok(row) => rows.push((value.clone(), Some(row))),
            Err(e) => {
                log::error!("{}={value}: {e}", axis.name());
                if first_err.is_none() {
                    first_err = Some(e);
                }
                rows.push((value.clone(), None));
            }
        }
    }

    let mut text = String::new();
    if first_err.is_some() {
        text.push_str("# partial: some rows failed; see the log\n");
    }
    text.push_str("method\tcd_x100\tfscore\tscore\n");
    for (value, row) in &rows {
        match row {
            Some((cd, fscore, score)) => text.push_str(&format!(
                "{}={}\t{:.4}\t{:.2}\t{:.2}\n",
                axis.name(),
                value,
                cd * 100.0,
                fscore,
                score
            )),
            None => text.push_str(&format!(
                "{}={}\tfailed\tfailed\tfailed\n",
                axis.name(),
                value
            )),
        }
    }
    print!("{text}");
    write_atomic(&root.join("ablate.tsv"), text.as_bytes())?;
    println!("table written to {}", root.join("ablate.tsv").display());
    match first_err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// One pipeline: preprocess into `<root>/<axis>=<value>/data`, train in the
/// row directory, reconstruct every sample, and evaluate against the
/// processed targets. Returns (mean distance, mean F-score, track score).
fn run_value(
    base: &RunConfig,
    axis: Axis,
    value: &str,
    entries: &[ManifestEntry],
    root: &Path,
    track: Track,
) -> Result<(f64, f64, f64)> {
    let mut cfg = base.clone();
    let mut keep_pose = true;
    match axis {
        Axis::Normalization => cfg.normalization = config::variant("values", value)?,
        Axis::Scale => {
            cfg.scale = value.trim().parse().map_err(|_| Error::Config {
                msg: format!("scale value {value:?} is not a number"),
            })?
        }
        Axis::Sampling => cfg.sampling = config::variant("values", value)?,
        Axis::Projection => {
            keep_pose = match value {
                "view" => true,
                "none" => false,
                other => {
                    return Err(Error::Config {
                        msg: format!("projection value {other:?} (none|view)"),
                    })
                }
            }
        }
    }
    cfg.validate()?;
    let dir = root.join(format!("{}={}", axis.name(), value));
    cfg.out_dir = dir.clone();
    let data = dir.join("data");
    let processed = process_dataset(&cfg, entries, &data, keep_pose)?;
    train_run(&cfg, &data, &dir)?;
    let ckpt_dir = dir.join("checkpoints");
    let checkpoint = latest_checkpoint(&ckpt_dir)?.ok_or_else(|| Error::Config {
        msg: format!("no checkpoint under {}", ckpt_dir.display()),
    })?;
    let pred = dir.join("pred");
    infer_run(&cfg, &checkpoint, &processed, None, &pred)?;
    let outcome = eval_dirs(&pred, &data, cfg.tau, cfg.scale)?;
    let agg = outcome.aggregate;
    let score = match track {
        Track::A => agg.score_track_a,
        Track::B => agg.score_track_b,
    };
    Ok((agg.cd, agg.fscore, score))
}
