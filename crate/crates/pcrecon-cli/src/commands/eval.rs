//! `eval`: score predicted clouds against ground truth, pairing files by
//! stem across the two directories. Prints per-sample rows plus the
//! aggregate — mean distance, mean F-score, and the track score of those
//! means — with the distance column scaled ×10² as tables conventionally
//! report it. `--out` writes the same rows at full precision.

use std::path::PathBuf;

use pcrecon::geometry::write_atomic;
use pcrecon::metrics::{MetricsReport, Track, REPORT_FIELDS};
use pcrecon::{Error, Result};

use crate::config::{self, ConfigFlags};

use super::eval_dirs;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Directory of predicted clouds (.xyz/.ply, one per sample id).
    #[arg(long, value_name = "DIR")]
    pub pred: PathBuf,
    /// Directory of ground-truth clouds.
    #[arg(long, value_name = "DIR")]
    pub gt: PathBuf,
    /// F-score distance threshold. There is no canonical value, so it is
    /// always explicit and stamped on every report.
    #[arg(long, value_name = "TAU")]
    pub tau: f64,
    /// Score track: a (50/50 weighting) | b (30/70).
    #[arg(long, value_name = "TRACK", default_value = "a")]
    pub track: String,
    /// Write the full-precision per-sample table here (TSV).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<()> {
    let track: Track = config::variant("track", &args.track)?;
    if !(args.tau > 0.0) {
        return Err(Error::NonPositiveTau { tau: args.tau });
    }
    let mut cfg = ConfigFlags::default().resolve()?;
    cfg.tau = args.tau;
    cfg.echo();

    let outcome = eval_dirs(&args.pred, &args.gt, args.tau, 1.0)?;
    let score_of = |r: &MetricsReport| match track {
        Track::A => r.score_track_a,
        Track::B => r.score_track_b,
    };
    println!("{:<24} {:>10} {:>10} {:>10}", "id", "cd_x100", "fscore", "score");
    for (id, r) in &outcome.rows {
        println!(
            "{:<24} {:>10.4} {:>10.2} {:>10.2}",
            id,
            r.cd * 100.0,
            r.fscore,
            score_of(r)
        );
    }
    let agg = &outcome.aggregate;
    println!(
        "{:<24} {:>10.4} {:>10.2} {:>10.2}",
        "aggregate",
        agg.cd * 100.0,
        agg.fscore,
        score_of(agg)
    );
    if let Some(path) = &args.out {
        let mut text = format!("id\t{}\n", REPORT_FIELDS.join("\t"));
        for (id, r) in &outcome.rows {
            text.push_str(&format!("{id}\t{}\n", r.to_record()));
        }
        text.push_str(&format!("aggregate\t{}\n", agg.to_record()));
        write_atomic(path, text.as_bytes())?;
        println!("report written to {}", path.display());
    }
    Ok(())
}
