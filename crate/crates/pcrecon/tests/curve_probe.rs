// Temporary: dump 50-step window means for the pinned fixture.
use pcrecon::diffcore::{AdamParams, Matrix};
use pcrecon::geometry::{Point3, PointCloud};
use pcrecon::metrics::{chamfer, Aggregation, ChamferMode};
use pcrecon::model::{EncoderKind, ModelConfig, ReconModel, TrainOptions, TrainSample};
use pcrecon::rng;
use rand::Rng;

#[test]
fn curve() {
    let config = ModelConfig {
        latent_dim: 16,
        n_points: 128,
        n_primitives: 8,
        hidden: [32, 16],
        encoder: EncoderKind::Identity,
        adam: AdamParams { lr: 6e-3, ..AdamParams::default() },
        seed: 3,
        ..ModelConfig::default()
    };
    let mut r = rng::rng_from(41);
    let image = Matrix::from_fn(1, 16, |_, _| r.random_range(-1.0..1.0));
    let mut pts = Vec::new();
    for &x in &[-0.5, 0.5] { for &y in &[-0.5, 0.5] { for &z in &[-0.5, 0.5] {
        pts.push(Point3::new(x, y, z));
    }}}
    let corners = PointCloud::new(pts).unwrap();
    let sample = TrainSample { id: "cube".into(), image: image.clone(), gt: corners.clone() };
    let mut model = ReconModel::new(config).unwrap();
    let log = model.train(&[sample], &TrainOptions::for_steps(5000)).unwrap();
    let losses: Vec<f64> = log.entries.iter().map(|e| e.loss).collect();
    let mean = |w: &[f64]| w.iter().sum::<f64>() / w.len() as f64;
    for start in (0..5000 - 50).step_by(50) {
        println!("w{:4}: {:.4e}", start, mean(&losses[start..start + 50]));
    }
    let pred = model.infer(&image).unwrap();
    let cd = chamfer(&pred, &corners, ChamferMode::L2, Aggregation::Mean);
    println!("final={:.3e} cd={:.3e}", losses.last().unwrap(), cd);
}
