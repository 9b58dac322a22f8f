//! Subcommand implementations.
//!
//! The dataset-shaped commands are thin flag parsers over the shared
//! pipeline functions below, so `ablate` replays exactly the code paths of
//! `preprocess`, `train`, `infer` and `eval` instead of a parallel
//! reimplementation.

pub mod ablate;
pub mod eval;
pub mod gen_fixtures;
pub mod grad_check;
pub mod infer;
pub mod plot;
pub mod preprocess;
pub mod sample_mesh;
pub mod train;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pcrecon::geometry::{
    apply_pose, load_mesh, load_pointcloud, load_pose, normalize, scale_cloud, write_atomic,
    write_pointcloud, CloudFormat, MeshFormat,
};
use pcrecon::metrics::{evaluate, track_score, MetricsReport, Track};
use pcrecon::model::{latest_checkpoint, ReconModel, TrainLog, TrainOptions, TrainSample};
use pcrecon::rng::{self, Stream};
use pcrecon::sampling::{sample_surface_lloyd, sample_surface_uniform, SampleMethod};
use pcrecon::{Error, PointCloud, Result};

use crate::config::RunConfig;
use crate::image;
use crate::manifest::{self, ManifestEntry, Split};

/// Dense-oversampling factor behind Lloyd surface sampling.
const LLOYD_OVERSAMPLE: usize = 8;

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(Error::from)
}

/// Copies `src` into `dir` under its own file name, atomically.
fn copy_into(src: &Path, dir: &Path) -> Result<PathBuf> {
    let name = src.file_name().ok_or_else(|| Error::Config {
        msg: format!("{} has no file name", src.display()),
    })?;
    let dest = dir.join(name);
    let bytes = std::fs::read(src)?;
    write_atomic(&dest, &bytes)?;
    Ok(dest)
}

/// Serde name of a unit enum variant (`unit_ball`, `area_uniform`, ...).
fn variant_name<T: serde::Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => "?".into(),
    }
}

/// Maps file stem to path for every `.xyz`/`.ply` file directly in `dir`.
fn cloud_stems(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut map = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let ext = path.extension().and_then(|e| e.to_str());
        if matches!(ext, Some("xyz") | Some("ply")) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                map.insert(stem.to_string(), path.clone());
            }
        }
    }
    Ok(map)
}

struct Processed {
    entry: ManifestEntry,
    provenance: String,
}

/// Loads a sample's geometry as a point cloud: meshes are surface-sampled
/// with the configured method, cloud files are read as-is.
fn load_geometry(cfg: &RunConfig, path: &Path, idx: u64) -> Result<(PointCloud, &'static str)> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("obj") => {
            let mesh = load_mesh(path, MeshFormat::Obj)?;
            let seed = rng::sub_seed(cfg.seed, Stream::SurfaceSample, idx);
            let sample = match cfg.sampling {
                SampleMethod::AreaUniform => {
                    sample_surface_uniform(&mesh, cfg.surface_points, seed)?
                }
                SampleMethod::Lloyd => sample_surface_lloyd(
                    &mesh,
                    cfg.surface_points,
                    cfg.lloyd_iters,
                    LLOYD_OVERSAMPLE,
                    seed,
                )?,
            };
            Ok((sample.into_points(), "mesh"))
        }
        _ => Ok((load_pointcloud(path, CloudFormat::from_path(path)?)?, "cloud")),
    }
}

/// Chain applied to one sample: rotate into the image's view, normalize,
/// scale, downsample to the model's point count, perturb. Every random step
/// draws from a stream keyed by the sample id, so the result is independent
/// of manifest order.
fn process_entry(
    cfg: &RunConfig,
    entry: &ManifestEntry,
    out: &Path,
    keep_pose: bool,
) -> Result<Processed> {
    let idx = rng::id_index(&entry.id);
    let (cloud, source) = load_geometry(cfg, &entry.geom, idx)?;
    let cloud = match (&entry.pose, keep_pose) {
        (Some(path), true) => apply_pose(&cloud, &load_pose(path)?)?,
        _ => cloud,
    };
    let (cloud, _, _) = normalize(&cloud, cfg.normalization, cfg.center)?;
    let cloud = scale_cloud(&cloud, cfg.scale)?;
    let cloud = pcrecon::geometry::downsample(
        &cloud,
        cfg.model.n_points,
        rng::sub_seed(cfg.seed, Stream::Downsample, idx),
    )?;
    let cloud = pcrecon::geometry::add_noise(
        &cloud,
        cfg.noise_sigma,
        rng::sub_seed(cfg.seed, Stream::Noise, idx),
    )?;
    let geom = out.join(format!("{}.xyz", entry.id));
    write_pointcloud(&geom, &cloud, CloudFormat::Xyz)?;
    let image = copy_into(&entry.image, out)?;
    let provenance = format!(
        "{}\t{source}\t{}\t{}\t{}\t{}\n",
        entry.id,
        variant_name(&cfg.normalization),
        cfg.scale,
        cfg.noise_sigma,
        cfg.seed,
    );
    Ok(Processed {
        entry: ManifestEntry {
            id: entry.id.clone(),
            image,
            geom,
            pose: None,
            split: entry.split,
        },
        provenance,
    })
}

/// Preprocesses every sample into `out`, alongside the images, a provenance
/// table, the resolved configuration and a fresh manifest. Poses are
/// consumed by the rotation step (or dropped when `keep_pose` is false), so
/// the written manifest carries `-` placeholders.
///
/// Every failing sample is logged before the first error is returned, so a
/// broken dataset reports all of its bad files in one pass.
pub fn process_dataset(
    cfg: &RunConfig,
    entries: &[ManifestEntry],
    out: &Path,
    keep_pose: bool,
) -> Result<Vec<ManifestEntry>> {
    ensure_dir(out)?;
    let mut processed = Vec::new();
    let mut provenance = String::from("id\tsource\tnormalization\tscale\tnoise_sigma\tseed\n");
    let mut first_err: Option<Error> = None;
    let mut failures = 0usize;
    for entry in entries {
        match process_entry(cfg, entry, out, keep_pose) {
            Ok(p) => {
                provenance.push_str(&p.provenance);
                processed.push(p.entry);
            }
            Err(e) => {
                log::error!("sample {}: {e}", entry.id);
                failures += 1;
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    if let Some(e) = first_err {
        log::error!("{failures} of {} samples failed", entries.len());
        return Err(e);
    }
    write_atomic(&out.join("provenance.tsv"), provenance.as_bytes())?;
    cfg.store(out)?;
    manifest::write(&out.join("manifest.tsv"), &processed)?;
    Ok(processed)
}

/// Builds training pairs from a dataset's train split. Geometry must
/// already be processed clouds; a mesh here means `preprocess` was skipped.
fn training_samples(entries: &[ManifestEntry]) -> Result<Vec<TrainSample>> {
    let mut samples = Vec::new();
    for e in entries.iter().filter(|e| e.split == Split::Train) {
        if e.geom.extension().and_then(|x| x.to_str()) == Some("obj") {
            return Err(Error::Config {
                msg: format!(
                    "sample {}: training expects processed clouds, not meshes — run preprocess first",
                    e.id
                ),
            });
        }
        samples.push(TrainSample {
            id: e.id.clone(),
            image: image::load_input(&e.image)?,
            gt: load_pointcloud(&e.geom, CloudFormat::from_path(&e.geom)?)?,
        });
    }
    if samples.is_empty() {
        return Err(Error::Config {
            msg: "dataset has no train-split samples".into(),
        });
    }
    Ok(samples)
}

/// Appends this call's entries to the run's log file (atomic rewrite of the
/// whole file), so a resumed run keeps one continuous step history.
fn append_log(path: &Path, log: &TrainLog) -> Result<()> {
    let mut text = std::fs::read_to_string(path).unwrap_or_default();
    text.push_str(&log.to_text());
    write_atomic(path, text.as_bytes())
}

/// Trains (or resumes) toward `cfg.steps` on the train split of `dataset`,
/// writing checkpoints, the accumulated log and the configuration into
/// `run_dir`. Returns the final optimizer step and the last logged loss
/// (`None` when the checkpoint was already at the target).
pub fn train_run(cfg: &RunConfig, dataset: &Path, run_dir: &Path) -> Result<(u64, Option<f64>)> {
    ensure_dir(run_dir)?;
    cfg.store(run_dir)?;
    let entries = manifest::load(&dataset.join("manifest.tsv"))?;
    let samples = training_samples(&entries)?;
    let ckpt_dir = run_dir.join("checkpoints");
    ensure_dir(&ckpt_dir)?;
    let mut model = match latest_checkpoint(&ckpt_dir)? {
        Some(path) => {
            log::info!("resuming from {}", path.display());
            ReconModel::load(&path, cfg.model.clone())?
        }
        None => ReconModel::new(cfg.model.clone())?,
    };
    let opts = TrainOptions {
        steps: cfg.steps,
        batch_size: cfg.batch_size,
        checkpoint_every: cfg.checkpoint_every,
        checkpoint_dir: Some(ckpt_dir),
    };
    let log = model.train(&samples, &opts)?;
    append_log(&run_dir.join("log.txt"), &log)?;
    Ok((model.step(), log.entries.last().map(|e| e.loss)))
}

/// Reconstructs every sample matching `split` (all samples when `None`),
/// writing one `{id}.xyz` per sample into `out`. Returns the count written.
pub fn infer_run(
    cfg: &RunConfig,
    checkpoint: &Path,
    entries: &[ManifestEntry],
    split: Option<Split>,
    out: &Path,
) -> Result<usize> {
    let model = ReconModel::load(checkpoint, cfg.model.clone())?;
    ensure_dir(out)?;
    let mut written = 0;
    for e in entries {
        if split.is_some_and(|s| e.split != s) {
            continue;
        }
        let image = image::load_input(&e.image)?;
        let pred = model.infer(&image)?;
        write_pointcloud(&out.join(format!("{}.xyz", e.id)), &pred, CloudFormat::Xyz)?;
        written += 1;
    }
    if written == 0 {
        return Err(Error::Config {
            msg: "no samples matched the requested split".into(),
        });
    }
    Ok(written)
}

/// Per-sample reports plus the aggregate (mean distance, mean F-score, and
/// the track scores computed from those means).
pub struct EvalOutcome {
    pub rows: Vec<(String, MetricsReport)>,
    pub aggregate: MetricsReport,
}

/// Scores every id present in both directories; an id present in only one
/// is an error. `descale` divides both clouds before comparison — the scale
/// ablation uses it to score every row in canonical units — and 1.0 is a
/// no-op.
pub fn eval_dirs(pred: &Path, gt: &Path, tau: f64, descale: f64) -> Result<EvalOutcome> {
    let preds = cloud_stems(pred)?;
    let gts = cloud_stems(gt)?;
    for id in preds.keys().chain(gts.keys()) {
        if !(preds.contains_key(id) && gts.contains_key(id)) {
            return Err(Error::MissingPair { id: id.clone() });
        }
    }
    if preds.is_empty() {
        return Err(Error::Config {
            msg: format!("no cloud files found under {}", pred.display()),
        });
    }
    let load = |path: &Path| -> Result<PointCloud> {
        let cloud = load_pointcloud(path, CloudFormat::from_path(path)?)?;
        if descale != 1.0 {
            scale_cloud(&cloud, 1.0 / descale)
        } else {
            Ok(cloud)
        }
    };
    let mut rows = Vec::new();
    let (mut cd, mut precision, mut recall, mut fscore) = (0.0, 0.0, 0.0, 0.0);
    for (id, pred_path) in &preds {
        let report = evaluate(&load(pred_path)?, &load(&gts[id])?, tau)?;
        cd += report.cd;
        precision += report.precision;
        recall += report.recall;
        fscore += report.fscore;
        rows.push((id.clone(), report));
    }
    let n = rows.len() as f64;
    let (cd, precision, recall, fscore) = (cd / n, precision / n, recall / n, fscore / n);
    let aggregate = MetricsReport {
        cd,
        precision,
        recall,
        fscore,
        tau,
        score_track_a: track_score(cd, fscore, Track::A),
        score_track_b: track_score(cd, fscore, Track::B),
    };
    Ok(EvalOutcome { rows, aggregate })
}
