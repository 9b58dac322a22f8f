//! End-to-end tests of the `pcrecon` binary: the full dataset pipeline,
//! reproducibility of reruns, checkpoint resume, and the exit-code
//! contract.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pcrecon::diffcore::save_checkpoint;
use pcrecon::geometry::{load_pointcloud, CloudFormat};
use pcrecon::model::{ModelConfig, ReconModel};

fn pcrecon(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcrecon"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = pcrecon(args);
    assert!(
        out.status.success(),
        "command {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

fn exit_code(args: &[&str]) -> i32 {
    pcrecon(args).status.code().expect("exit code")
}

/// Flags for a desk-scale model every pipeline test shares: 32 points over
/// 8 primitives (so the inference grid is 2×2 per primitive) and a narrow
/// decoder, which keeps a full train/infer/eval round under a second.
const SMALL: &[&str] = &[
    "--latent-dim",
    "16",
    "--n-points",
    "32",
    "--hidden",
    "16,8",
    "--image-side",
    "16",
    "--surface-points",
    "256",
];

fn gen_fixtures(dir: &Path, seed: &str) -> PathBuf {
    let raw = dir.join("raw");
    let mut args = vec!["gen-fixtures", "--seed", seed, "--out", raw.to_str().unwrap()];
    args.extend_from_slice(SMALL);
    run_ok(&args);
    raw
}

fn preprocess(dir: &Path, manifest: &Path, seed: &str, extra: &[&str]) -> PathBuf {
    let data = dir.join("data");
    let mut args = vec![
        "preprocess",
        "--manifest",
        manifest.to_str().unwrap(),
        "--seed",
        seed,
        "--out",
        data.to_str().unwrap(),
    ];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    run_ok(&args);
    data
}

fn train(dir: &Path, data: &Path, seed: &str, steps: &str, extra: &[&str]) -> PathBuf {
    let run = dir.join("run");
    let mut args = vec![
        "train",
        "--dataset",
        data.to_str().unwrap(),
        "--seed",
        seed,
        "--steps",
        steps,
        "--out",
        run.to_str().unwrap(),
    ];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    run_ok(&args);
    run
}

/// `step loss` column pairs of a run's log, with wallclock stripped.
fn log_losses(run: &Path) -> Vec<(String, String)> {
    fs::read_to_string(run.join("log.txt"))
        .expect("log exists")
        .lines()
        .map(|l| {
            let mut f = l.split_whitespace();
            (
                f.next().expect("step").to_string(),
                f.next().expect("loss").to_string(),
            )
        })
        .collect()
}

#[test]
fn full_pipeline_produces_scored_reconstructions() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = gen_fixtures(tmp.path(), "11");
    let data = preprocess(tmp.path(), &raw.join("manifest.tsv"), "11", &[]);

    // Every processed cloud has exactly the configured point count, and the
    // rewritten manifest carries `-` pose placeholders (rotation consumed).
    for id in ["cube_v0", "sphere_v0", "torus_v1"] {
        let cloud =
            load_pointcloud(&data.join(format!("{id}.xyz")), CloudFormat::Xyz).unwrap();
        assert_eq!(cloud.len(), 32);
    }
    let manifest = fs::read_to_string(data.join("manifest.tsv")).unwrap();
    assert_eq!(manifest.lines().count(), 6);
    for line in manifest.lines() {
        assert_eq!(line.split('\t').nth(3), Some("-"));
    }

    let run = train(tmp.path(), &data, "11", "20", &["--checkpoint-every", "10"]);
    let pred = run.join("pred");
    run_ok(&[
        "infer",
        "--run",
        run.to_str().unwrap(),
        "--dataset",
        data.to_str().unwrap(),
    ]);
    assert_eq!(fs::read_dir(&pred).unwrap().count(), 6);

    let report = run.join("report.tsv");
    run_ok(&[
        "eval",
        "--pred",
        pred.to_str().unwrap(),
        "--gt",
        data.to_str().unwrap(),
        "--tau",
        "0.1",
        "--out",
        report.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(&report).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("id\tcd\t"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 7, "6 samples + aggregate");

    // The aggregate row is the arithmetic mean of the per-sample rows.
    let field = |row: &str, k: usize| -> f64 {
        row.split('\t').nth(k).unwrap().parse().unwrap()
    };
    let aggregate = rows.last().unwrap();
    assert!(aggregate.starts_with("aggregate\t"));
    for k in [1, 4] {
        let mean = rows[..6].iter().map(|r| field(r, k)).sum::<f64>() / 6.0;
        assert!(
            (field(aggregate, k) - mean).abs() <= 1e-12,
            "aggregate field {k} is not the row mean"
        );
    }

    run_ok(&["plot", "--run", run.to_str().unwrap()]);
    let csv = fs::read_to_string(run.join("loss.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21, "header + one row per step");
    assert!(csv.starts_with("step,loss,wallclock_ms\n"));
    let dat = fs::read_to_string(run.join("loss.dat")).unwrap();
    assert!(dat.starts_with("# step loss wallclock_ms\n"));
}

/// Rerunning generation + preprocessing with the same seed reproduces every
/// artifact byte for byte (config.json differs only by the output path).
#[test]
fn rerun_with_same_seed_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut datasets = Vec::new();
    for side in ["a", "b"] {
        let dir = tmp.path().join(side);
        fs::create_dir_all(&dir).unwrap();
        let raw = gen_fixtures(&dir, "21");
        datasets.push(preprocess(&dir, &raw.join("manifest.tsv"), "21", &[]));
    }
    let names = |dir: &Path| -> Vec<String> {
        let mut v: Vec<String> = fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        v.sort();
        v
    };
    let (a, b) = (&datasets[0], &datasets[1]);
    assert_eq!(names(a), names(b));
    for name in names(a) {
        if name == "config.json" {
            continue;
        }
        assert_eq!(
            fs::read(a.join(&name)).unwrap(),
            fs::read(b.join(&name)).unwrap(),
            "{name} differs between identically seeded runs"
        );
    }
}

#[test]
fn preprocessing_depends_on_the_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = gen_fixtures(tmp.path(), "31");
    let a = preprocess(&tmp.path().join("a"), &raw.join("manifest.tsv"), "31", &[]);
    let b = preprocess(&tmp.path().join("b"), &raw.join("manifest.tsv"), "32", &[]);
    assert_ne!(
        fs::read(a.join("cube_v0.xyz")).unwrap(),
        fs::read(b.join("cube_v0.xyz")).unwrap(),
        "different seeds must draw different downsample/noise streams"
    );
}

/// Identical seeds give identical step/loss columns; wallclock may differ.
#[test]
fn training_logs_reproduce_under_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = gen_fixtures(tmp.path(), "41");
    let data = preprocess(tmp.path(), &raw.join("manifest.tsv"), "41", &[]);
    let a = train(&tmp.path().join("a"), &data, "41", "15", &[]);
    let b = train(&tmp.path().join("b"), &data, "41", "15", &[]);
    assert_eq!(log_losses(&a), log_losses(&b));
    assert_ne!(
        log_losses(&a),
        log_losses(&train(&tmp.path().join("c"), &data, "42", "15", &[]))
    );
}

/// A run killed after its checkpoint and resumed continues with exactly the
/// losses of an uninterrupted run sharing the checkpoint cadence, and both
/// end in byte-identical checkpoints.
#[test]
fn train_resumes_identically_after_interruption() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = gen_fixtures(tmp.path(), "51");
    let data = preprocess(tmp.path(), &raw.join("manifest.tsv"), "51", &[]);
    let cadence: &[&str] = &["--checkpoint-every", "10"];

    let full = train(&tmp.path().join("full"), &data, "51", "20", cadence);
    let resumed_dir = tmp.path().join("resumed");
    let first = train(&resumed_dir, &data, "51", "10", cadence);
    assert!(first.join("checkpoints/step_00000010.ckpt").is_file());
    let second = train(&resumed_dir, &data, "51", "20", cadence);

    assert_eq!(log_losses(&full), log_losses(&second));
    assert_eq!(
        fs::read(full.join("checkpoints/step_00000020.ckpt")).unwrap(),
        fs::read(second.join("checkpoints/step_00000020.ckpt")).unwrap()
    );
}

/// `--steps 0` still writes a checkpoint, and it holds exactly the f32
/// rounding of the seeded initialization.
#[test]
fn zero_step_training_checkpoints_the_initialization() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = gen_fixtures(tmp.path(), "61");
    let data = preprocess(tmp.path(), &raw.join("manifest.tsv"), "61", &[]);
    let run = train(tmp.path(), &data, "61", "0", &[]);
    let written = fs::read(run.join("checkpoints/step_00000000.ckpt")).unwrap();

    let config = ModelConfig {
        latent_dim: 16,
        n_points: 32,
        hidden: [16, 8],
        image_side: 16,
        seed: 61,
        ..ModelConfig::default()
    };
    let fresh = ReconModel::new(config).unwrap();
    let expected = tmp.path().join("expected.ckpt");
    save_checkpoint(&expected, fresh.params()).unwrap();
    assert_eq!(written, fs::read(&expected).unwrap());
}

/// The JSON block a command echoes is a loadable config file: rerunning
/// from it reproduces the run exactly.
#[test]
fn echoed_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = gen_fixtures(tmp.path(), "71");
    let data = preprocess(tmp.path(), &raw.join("manifest.tsv"), "71", &[]);

    let run_a = tmp.path().join("a");
    let mut args = vec![
        "train",
        "--dataset",
        data.to_str().unwrap(),
        "--seed",
        "71",
        "--steps",
        "12",
        "--out",
        run_a.to_str().unwrap(),
    ];
    args.extend_from_slice(SMALL);
    let stdout = run_ok(&args);
    let json_start = stdout.find("config: ").expect("echo present") + "config: ".len();
    let json_end = stdout[json_start..].find("\n}").expect("json block") + json_start + 2;
    let echoed = &stdout[json_start..json_end];
    serde_json::from_str::<serde_json::Value>(echoed).expect("echoed config parses");

    let cfg_path = tmp.path().join("echoed.json");
    fs::write(&cfg_path, echoed).unwrap();
    let run_b = tmp.path().join("b");
    run_ok(&[
        "train",
        "--config",
        cfg_path.to_str().unwrap(),
        "--dataset",
        data.to_str().unwrap(),
        "--seed",
        "71",
        "--out",
        run_b.to_str().unwrap(),
    ]);
    assert_eq!(log_losses(&run_a), log_losses(&run_b));
}

#[test]
fn exit_codes_follow_the_contract() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap().to_string();

    // 1: usage errors — unknown flags, missing required flags, bad values.
    assert_eq!(exit_code(&["train", "--dataset", &dir]), 1, "missing --seed");
    assert_eq!(
        exit_code(&["ablate", "--manifest", &dir, "--axis", "bogus", "--values", "x"]),
        1
    );
    assert_eq!(
        exit_code(&["eval", "--pred", &dir, "--gt", &dir, "--tau", "0"]),
        1,
        "tau must be positive"
    );
    assert_eq!(exit_code(&["--definitely-not-a-flag"]), 1);

    // 0: help.
    assert_eq!(exit_code(&["--help"]), 0);

    // 2: data errors — missing files and directories.
    let missing = tmp.path().join("nope").to_str().unwrap().to_string();
    assert_eq!(
        exit_code(&["eval", "--pred", &missing, "--gt", &missing, "--tau", "0.1"]),
        2
    );
    assert_eq!(
        exit_code(&["preprocess", "--manifest", &missing, "--seed", "1"]),
        2
    );
}

#[test]
fn eval_rejects_unpaired_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let pred = tmp.path().join("pred");
    let gt = tmp.path().join("gt");
    fs::create_dir_all(&pred).unwrap();
    fs::create_dir_all(&gt).unwrap();
    for dir in [&pred, &gt] {
        fs::write(dir.join("shared.xyz"), "0 0 0\n1 1 1\n").unwrap();
    }
    fs::write(pred.join("extra.xyz"), "0 0 0\n").unwrap();
    let out = pcrecon(&[
        "eval",
        "--pred",
        pred.to_str().unwrap(),
        "--gt",
        gt.to_str().unwrap(),
        "--tau",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("extra"), "names the unpaired id: {stderr}");
}

/// A failing axis value yields a labeled partial table and a nonzero exit,
/// while the passing rows still complete.
#[test]
fn ablate_reports_partial_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = gen_fixtures(tmp.path(), "81");
    let manifest = raw.join("manifest.tsv");
    let out_dir = tmp.path().join("abl");
    let mut args = vec![
        "ablate",
        "--manifest",
        manifest.to_str().unwrap(),
        "--axis",
        "normalization",
        "--values",
        "unit_ball,bogus",
        "--seed",
        "81",
        "--steps",
        "5",
        "--out",
        out_dir.to_str().unwrap(),
    ];
    args.extend_from_slice(SMALL);
    let out = pcrecon(&args);
    assert_eq!(out.status.code(), Some(1), "bad value is a usage error");
    let table = fs::read_to_string(out_dir.join("ablate.tsv")).unwrap();
    assert!(table.starts_with("# partial"), "table: {table}");
    assert!(table.contains("normalization=unit_ball\t"));
    assert!(table.contains("normalization=bogus\tfailed"));

    // The good row carries real numbers.
    let row = table
        .lines()
        .find(|l| l.starts_with("normalization=unit_ball"))
        .unwrap();
    let cd: f64 = row.split('\t').nth(1).unwrap().parse().unwrap();
    assert!(cd.is_finite() && cd >= 0.0);
}

#[test]
fn ablate_requires_values() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = gen_fixtures(tmp.path(), "91");
    let manifest = raw.join("manifest.tsv");
    assert_eq!(
        exit_code(&[
            "ablate",
            "--manifest",
            manifest.to_str().unwrap(),
            "--axis",
            "scale",
            "--values",
            "",
        ]),
        1
    );
}

#[test]
fn sample_mesh_draws_the_requested_count() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = gen_fixtures(tmp.path(), "95");
    let out = tmp.path().join("cube64.ply");
    run_ok(&[
        "sample-mesh",
        "--method",
        "lloyd",
        "--n",
        "64",
        "--iters",
        "2",
        "--seed",
        "3",
        raw.join("cube.obj").to_str().unwrap(),
        out.to_str().unwrap(),
    ]);
    let cloud = load_pointcloud(&out, CloudFormat::PlyAscii).unwrap();
    assert_eq!(cloud.len(), 64);
    for p in cloud.points() {
        assert!(p.norm_inf() <= 0.5 + 1e-9, "point off the cube surface: {p:?}");
    }
}

#[test]
fn grad_check_command_passes_on_the_miniature_model() {
    let out = pcrecon(&["grad-check"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("gradient check passed"), "{stdout}");
}
