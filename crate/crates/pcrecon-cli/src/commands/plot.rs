//! `plot`: convert run logs and ablation tables into CSV plus
//! gnuplot-ready whitespace-separated data files (`plot "loss.dat" using
//! 1:2 with lines` works as-is).

use std::path::{Path, PathBuf};

use pcrecon::geometry::write_atomic;
use pcrecon::{Error, Result};

use super::ensure_dir;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Run directory containing log.txt.
    #[arg(long, value_name = "DIR")]
    pub run: Option<PathBuf>,
    /// Ablation table (ablate.tsv) to convert.
    #[arg(long, value_name = "FILE")]
    pub table: Option<PathBuf>,
    /// Output directory (defaults beside the input).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<()> {
    if args.run.is_none() && args.table.is_none() {
        return Err(Error::Config {
            msg: "plot needs --run and/or --table".into(),
        });
    }
    if let Some(run_dir) = &args.run {
        let out = args.out.clone().unwrap_or_else(|| run_dir.clone());
        ensure_dir(&out)?;
        convert_log(&run_dir.join("log.txt"), &out)?;
    }
    if let Some(table) = &args.table {
        let out = args.out.clone().unwrap_or_else(|| {
            table
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or_else(|| Path::new("."))
                .to_path_buf()
        });
        ensure_dir(&out)?;
        convert_table(table, &out)?;
    }
    Ok(())
}

/// `log.txt` (`step loss wallclock_ms` lines) → `loss.csv` + `loss.dat`.
fn convert_log(log_path: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(log_path)?;
    let mut csv = String::from("step,loss,wallclock_ms\n");
    let mut dat = String::from("# step loss wallclock_ms\n");
    let mut rows = 0usize;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                path: log_path.to_path_buf(),
                line: idx + 1,
                msg: format!("expected `step loss wallclock_ms`, got {line:?}"),
            });
        }
        csv.push_str(&fields.join(","));
        csv.push('\n');
        dat.push_str(&fields.join(" "));
        dat.push('\n');
        rows += 1;
    }
    let csv_path = out.join("loss.csv");
    let dat_path = out.join("loss.dat");
    write_atomic(&csv_path, csv.as_bytes())?;
    write_atomic(&dat_path, dat.as_bytes())?;
    println!(
        "loss curve ({rows} steps) -> {} and {}",
        csv_path.display(),
        dat_path.display()
    );
    Ok(())
}

/// Tab-separated table → `{stem}.csv` + `{stem}.dat`; the header row turns
/// into a gnuplot comment and existing comments are carried over.
fn convert_table(table: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(table)?;
    let stem = table
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("table");
    let mut csv = String::new();
    let mut dat = String::new();
    let mut header_done = false;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            dat.push_str(&format!("#{comment}\n"));
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        csv.push_str(&fields.join(","));
        csv.push('\n');
        if header_done {
            dat.push_str(&fields.join(" "));
        } else {
            dat.push_str(&format!("# {}", fields.join(" ")));
            header_done = true;
        }
        dat.push('\n');
    }
    let csv_path = out.join(format!("{stem}.csv"));
    let dat_path = out.join(format!("{stem}.dat"));
    write_atomic(&csv_path, csv.as_bytes())?;
    write_atomic(&dat_path, dat.as_bytes())?;
    println!("table -> {} and {}", csv_path.display(), dat_path.display());
    Ok(())
}
