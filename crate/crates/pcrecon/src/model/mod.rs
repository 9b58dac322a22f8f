//! The reconstruction network: image → latent code → folded point cloud.
//!
//! An encoder maps the input image to a latent vector of width `latent_dim`.
//! Each of `n_primitives` independent folding decoders receives that latent
//! code tiled next to a block of 2D UV samples and folds the block into 3D;
//! a refinement decoder shared across primitives then maps latent ⊕ xyz to
//! the final coordinates. The pieces are plain 3-layer MLPs with leaky-ReLU
//! activations and a configurable output squashing.
//!
//! Training minimizes the symmetric Chamfer distance between the decoded
//! cloud and the ground truth, one [`TrainSample`] (or a summed mini-batch)
//! per Adam step. All stochastic choices — parameter initialization and the
//! per-step UV draws — derive from `ModelConfig::seed`, so a run is fully
//! reproducible and an interrupted run resumed from its latest checkpoint
//! continues with bit-identical losses.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;

use crate::diffcore::{
    load_checkpoint, save_checkpoint, AdamParams, Matrix, NodeId, ParamStore, Tape,
};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::metrics::{Aggregation, ChamferMode};
use crate::rng::{self, Stream};
use crate::sampling::{sample_uv_grid, sample_uv_random, UvBatch};
use serde::{Deserialize, Serialize};

#[cfg(test)]
mod tests;

/// How the image is turned into a latent vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKind {
    /// Four stride-2 3×3 convolutions (8, 16, 32, 64 channels) with global
    /// average pooling and a linear projection to the latent width.
    TinyConv,
    /// Two fully connected layers over the flattened image.
    Mlp,
    /// The "image" already is the latent vector (1 × `latent_dim`); used for
    /// precomputed features and fixtures.
    Identity,
}

/// Squashing applied to each decoder's output coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    /// `tanh`, keeping coordinates strictly inside (-1, 1).
    Tanh,
    /// No squashing; coordinates are unbounded.
    None,
}

/// Architecture and training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Latent code width produced by the encoder.
    pub latent_dim: usize,
    /// Points produced per decoded cloud; must divide evenly over primitives.
    pub n_points: usize,
    /// Number of independent folding decoders.
    pub n_primitives: usize,
    /// Widths of the two hidden layers in every decoder MLP.
    pub hidden: [usize; 2],
    /// Negative-side slope of the leaky-ReLU activations.
    pub leaky_alpha: f64,
    pub output_activation: OutputActivation,
    pub encoder: EncoderKind,
    /// Image side length in pixels (images are square).
    pub image_side: usize,
    /// Image channel count.
    pub image_channels: usize,
    /// Distance flavor of the training loss.
    pub chamfer_mode: ChamferMode,
    /// Aggregation of the per-point distances in the training loss.
    pub chamfer_agg: Aggregation,
    /// One refinement decoder shared by all primitives (the default), or an
    /// independent refinement decoder per primitive.
    pub shared_refinement: bool,
    pub adam: AdamParams,
    /// Root seed for initialization and per-step UV draws.
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            latent_dim: 512,
            n_points: 2048,
            n_primitives: 8,
            hidden: [512, 256],
            leaky_alpha: 0.01,
            output_activation: OutputActivation::Tanh,
            encoder: EncoderKind::TinyConv,
            image_side: 32,
            image_channels: 1,
            chamfer_mode: ChamferMode::L2,
            chamfer_agg: Aggregation::Mean,
            shared_refinement: true,
            adam: AdamParams::default(),
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Points produced by each primitive.
    pub fn points_per_primitive(&self) -> usize {
        self.n_points / self.n_primitives
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config { msg });
        if self.latent_dim == 0 {
            return fail("latent_dim must be at least 1".into());
        }
        if self.n_points == 0 || self.n_primitives == 0 {
            return fail("n_points and n_primitives must be at least 1".into());
        }
        if self.n_points % self.n_primitives != 0 {
            return fail(format!(
                "n_points ({}) must be divisible by n_primitives ({})",
                self.n_points, self.n_primitives
            ));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return fail("hidden layer widths must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.leaky_alpha) {
            return fail(format!("leaky_alpha must be in [0, 1), got {}", self.leaky_alpha));
        }
        if self.encoder != EncoderKind::Identity
            && (self.image_side == 0 || self.image_channels == 0)
        {
            return fail("image_side and image_channels must be at least 1".into());
        }
        Ok(())
    }
}

/// One training pair: an input image (or precomputed feature row for the
/// identity encoder) and its ground-truth cloud.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub id: String,
    /// `(side·side) × channels` pixels in [0, 1], or `1 × latent_dim` for the
    /// identity encoder.
    pub image: Matrix,
    pub gt: PointCloud,
}

/// Knobs for a [`ReconModel::train`] call.
#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Absolute target step count: training runs until the optimizer step
    /// counter reaches this value, so resuming a run reuses the same number.
    pub steps: u64,
    /// Samples folded into each step; their losses are summed.
    pub batch_size: usize,
    /// Write a checkpoint whenever the step counter hits a multiple of this.
    pub checkpoint_every: Option<u64>,
    /// Directory receiving `step_NNNNNNNN.ckpt` files; a final checkpoint is
    /// always written here when set.
    pub checkpoint_dir: Option<PathBuf>,
}

impl TrainOptions {
    pub fn for_steps(steps: u64) -> Self {
        Self {
            steps,
            batch_size: 1,
            checkpoint_every: None,
            checkpoint_dir: None,
        }
    }
}

/// One training-log line.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEntry {
    /// Optimizer step count after the update (1-based).
    pub step: u64,
    pub loss: f64,
    /// Milliseconds since the `train` call began.
    pub wallclock_ms: u64,
}

/// Per-step training record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub entries: Vec<LogEntry>,
}

impl TrainLog {
    /// `step loss wallclock_ms` lines. The loss is printed with the shortest
    /// decimal that round-trips the exact f64 bits, so two logs agree
    /// byte-for-byte on the first two columns exactly when the runs computed
    /// identical losses.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&format!("{} {} {}\n", e.step, e.loss, e.wallclock_ms));
        }
        out
    }
}

/// The encoder/decoder network plus its optimizer state.
#[derive(Debug, Clone)]
pub struct ReconModel {
    config: ModelConfig,
    params: ParamStore,
}

impl ReconModel {
    /// Fresh model with Kaiming-style fan-in initialization drawn from
    /// `config.seed`; biases start at zero.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let params = init_params(&config);
        Ok(Self { config, params })
    }

    /// Wraps an existing parameter store (typically a loaded checkpoint),
    /// verifying that its names and shapes match `config` exactly.
    pub fn from_parts(config: ModelConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let specs = param_specs(&config);
        if specs.len() != params.len() {
            return Err(Error::Config {
                msg: format!(
                    "parameter store holds {} arrays, architecture needs {}",
                    params.len(),
                    specs.len()
                ),
            });
        }
        for spec in &specs {
            let m = params.get(&spec.name).ok_or_else(|| Error::Config {
                msg: format!("parameter store is missing {:?}", spec.name),
            })?;
            if m.shape() != (spec.rows, spec.cols) {
                return Err(Error::shape(
                    "from_parts",
                    format!("{}x{} for {}", spec.rows, spec.cols, spec.name),
                    format!("{}x{}", m.rows(), m.cols()),
                ));
            }
        }
        Ok(Self { config, params })
    }

    /// Loads a checkpoint written by [`ReconModel::save`] or during training.
    pub fn load(path: &Path, config: ModelConfig) -> Result<Self> {
        Self::from_parts(config, load_checkpoint(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_checkpoint(path, &self.params)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    /// Total number of trainable scalars.
    pub fn scalar_count(&self) -> usize {
        self.params.scalar_count()
    }

    /// Optimizer steps taken so far.
    pub fn step(&self) -> u64 {
        self.params.step()
    }

    /// Latent vector for one image (`1 × latent_dim`).
    pub fn encode(&self, image: &Matrix) -> Result<Matrix> {
        let mut tape = Tape::new();
        let mut b = Builder::new(&mut tape, &self.params, &self.config);
        let latent = b.encoder(image)?;
        Ok(tape.value(latent).clone())
    }

    /// Decodes one latent vector against a UV batch laid out as
    /// `n_primitives` consecutive equal blocks (see [`UvBatch::tile`]); one
    /// output point per UV sample, in batch order.
    pub fn decode(&self, latent: &Matrix, uv: &UvBatch) -> Result<PointCloud> {
        if latent.shape() != (1, self.config.latent_dim) {
            return Err(Error::shape(
                "decode",
                format!("1x{}", self.config.latent_dim),
                format!("{}x{}", latent.rows(), latent.cols()),
            ));
        }
        let mut tape = Tape::new();
        let node = tape.input(latent.clone())?;
        let mut b = Builder::new(&mut tape, &self.params, &self.config);
        let pts = b.decoder(node, uv)?;
        PointCloud::new(tape.value(pts).to_points()?)
    }

    /// Full inference pass: encode, then decode on the deterministic
    /// cell-center UV grid (`points_per_primitive` must be a perfect square).
    pub fn infer(&self, image: &Matrix) -> Result<PointCloud> {
        let uv = sample_uv_grid(self.config.points_per_primitive())?
            .tile(self.config.n_primitives);
        let mut tape = Tape::new();
        let mut b = Builder::new(&mut tape, &self.params, &self.config);
        let latent = b.encoder(image)?;
        let pts = b.decoder(latent, &uv)?;
        PointCloud::new(tape.value(pts).to_points()?)
    }

    /// Builds the full training loss for one sample on `tape`, reading
    /// parameters from `store` instead of the model's own. This exists so
    /// finite-difference checkers can probe shifted parameter copies through
    /// the exact graph that training uses.
    pub fn loss_with_params(
        &self,
        store: &ParamStore,
        tape: &mut Tape,
        image: &Matrix,
        uv: &UvBatch,
        gt: &PointCloud,
    ) -> Result<NodeId> {
        let mut b = Builder::new(tape, store, &self.config);
        let latent = b.encoder(image)?;
        let pts = b.decoder(latent, uv)?;
        b.tape
            .chamfer_loss(pts, gt, self.config.chamfer_mode, self.config.chamfer_agg)
    }

    /// Runs Adam steps until the optimizer counter reaches `opts.steps`.
    ///
    /// Step `k` (0-based) trains on samples `(k·B + slot) % len` for each
    /// batch slot, with the UV batch for that slot drawn from a subseed of
    /// `(config.seed, k·B + slot)` — so the data and randomness schedule
    /// depend only on the step index, and a resumed run replays exactly the
    /// steps an uninterrupted run would have taken.
    pub fn train(&mut self, data: &[TrainSample], opts: &TrainOptions) -> Result<TrainLog> {
        if data.is_empty() {
            return Err(Error::Config {
                msg: "training requires at least one sample".into(),
            });
        }
        if opts.batch_size == 0 {
            return Err(Error::Config {
                msg: "batch_size must be at least 1".into(),
            });
        }
        let started = Instant::now();
        let mut log = TrainLog::default();
        while self.params.step() < opts.steps {
            let step_index = self.params.step();
            let mut tape = Tape::new();
            let mut root: Option<NodeId> = None;
            for slot in 0..opts.batch_size {
                let cursor = step_index * opts.batch_size as u64 + slot as u64;
                let sample = &data[(cursor % data.len() as u64) as usize];
                let uv_seed = rng::sub_seed(self.config.seed, Stream::UvSample, cursor);
                let uv = sample_uv_random(self.config.n_points, uv_seed);
                let loss = self
                    .loss_with_params(&self.params, &mut tape, &sample.image, &uv, &sample.gt)
                    .map_err(|e| as_diverged(step_index, e))?;
                root = Some(match root {
                    Some(acc) => tape.add(acc, loss).map_err(|e| as_diverged(step_index, e))?,
                    None => loss,
                });
            }
            let root = root.expect("batch_size >= 1");
            let loss = tape.value(root).get(0, 0);
            if !loss.is_finite() {
                return Err(Error::DivergedLoss {
                    step: step_index,
                    msg: format!("loss became {loss}"),
                });
            }
            let grads = tape.backward(root).map_err(|e| as_diverged(step_index, e))?;
            self.params.adam_step(&tape.param_grads(&grads), self.config.adam)?;
            log.entries.push(LogEntry {
                step: self.params.step(),
                loss,
                wallclock_ms: started.elapsed().as_millis() as u64,
            });
            if let (Some(every), Some(dir)) = (opts.checkpoint_every, opts.checkpoint_dir.as_ref())
            {
                if every > 0 && self.params.step() % every == 0 {
                    self.write_checkpoint(dir)?;
                }
            }
        }
        if let Some(dir) = opts.checkpoint_dir.as_ref() {
            self.write_checkpoint(dir)?;
        }
        Ok(log)
    }

    /// Saves `step_NNNNNNNN.ckpt` into `dir`, then rounds the live state
    /// through f32 so that continuing this run and restarting from the file
    /// follow bit-identical trajectories.
    fn write_checkpoint(&mut self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("step_{:08}.ckpt", self.params.step()));
        save_checkpoint(&path, &self.params)?;
        self.params.quantize_f32();
        Ok(())
    }
}

/// Non-finite values surfacing inside a training step mean the optimization
/// blew up; report them as divergence with the offending step attached.
fn as_diverged(step: u64, e: Error) -> Error {
    match e {
        Error::NonFinite { op } => Error::DivergedLoss {
            step,
            msg: format!("non-finite value in {op}"),
        },
        other => other,
    }
}

/// Highest-numbered `step_NNNNNNNN.ckpt` in `dir`, if any.
pub fn latest_checkpoint(dir: &Path) -> Result<Option<PathBuf>> {
    let mut best: Option<(u64, PathBuf)> = None;
    if !dir.exists() {
        return Ok(None);
    }
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(stem) = name.strip_prefix("step_").and_then(|s| s.strip_suffix(".ckpt")) else {
            continue;
        };
        let Ok(step) = stem.parse::<u64>() else { continue };
        if best.as_ref().map_or(true, |(b, _)| step > *b) {
            best = Some((step, entry.path()));
        }
    }
    Ok(best.map(|(_, p)| p))
}

struct ParamSpec {
    name: String,
    rows: usize,
    cols: usize,
    /// Weights get random fan-in initialization; biases start at zero.
    is_weight: bool,
}

fn push_mlp_specs(out: &mut Vec<ParamSpec>, prefix: &str, dims: &[usize]) {
    for (l, pair) in dims.windows(2).enumerate() {
        out.push(ParamSpec {
            name: format!("{prefix}.{}.W", l + 1),
            rows: pair[0],
            cols: pair[1],
            is_weight: true,
        });
        out.push(ParamSpec {
            name: format!("{prefix}.{}.b", l + 1),
            rows: 1,
            cols: pair[1],
            is_weight: false,
        });
    }
}

/// Convolution channel progression of the tiny image encoder.
const CONV_CHANNELS: [usize; 4] = [8, 16, 32, 64];

fn param_specs(c: &ModelConfig) -> Vec<ParamSpec> {
    let mut specs = Vec::new();
    match c.encoder {
        EncoderKind::Identity => {}
        EncoderKind::Mlp => {
            let flat = c.image_side * c.image_side * c.image_channels;
            push_mlp_specs(&mut specs, "enc", &[flat, 256, c.latent_dim]);
        }
        EncoderKind::TinyConv => {
            let mut c_in = c.image_channels;
            for (l, &c_out) in CONV_CHANNELS.iter().enumerate() {
                specs.push(ParamSpec {
                    name: format!("enc.conv{}.W", l + 1),
                    rows: 9 * c_in,
                    cols: c_out,
                    is_weight: true,
                });
                specs.push(ParamSpec {
                    name: format!("enc.conv{}.b", l + 1),
                    rows: 1,
                    cols: c_out,
                    is_weight: false,
                });
                c_in = c_out;
            }
            specs.push(ParamSpec {
                name: "enc.fc.W".into(),
                rows: CONV_CHANNELS[3],
                cols: c.latent_dim,
                is_weight: true,
            });
            specs.push(ParamSpec {
                name: "enc.fc.b".into(),
                rows: 1,
                cols: c.latent_dim,
                is_weight: false,
            });
        }
    }
    let [h0, h1] = c.hidden;
    for p in 0..c.n_primitives {
        push_mlp_specs(
            &mut specs,
            &format!("dec2d3d.{p}"),
            &[c.latent_dim + 2, h0, h1, 3],
        );
    }
    let refine_dims = [c.latent_dim + 3, h0, h1, 3];
    if c.shared_refinement {
        push_mlp_specs(&mut specs, "dec3d3d", &refine_dims);
    } else {
        for p in 0..c.n_primitives {
            push_mlp_specs(&mut specs, &format!("dec3d3d.{p}"), &refine_dims);
        }
    }
    specs
}

/// Weights are drawn uniformly with fan-in scaling matched to the leaky-ReLU
/// gain; arrays are filled in sorted name order from one dedicated stream, so
/// the full initialization is a pure function of the seed.
fn init_params(c: &ModelConfig) -> ParamStore {
    let mut specs = param_specs(c);
    specs.sort_by(|a, b| a.name.cmp(&b.name));
    let gain = (2.0 / (1.0 + c.leaky_alpha * c.leaky_alpha)).sqrt();
    let mut r = rng::stream_rng(c.seed, Stream::ParamInit, 0);
    let mut store = ParamStore::new();
    for spec in specs {
        let m = if spec.is_weight {
            let bound = gain * (3.0 / spec.rows as f64).sqrt();
            Matrix::from_fn(spec.rows, spec.cols, |_, _| r.random_range(-bound..bound))
        } else {
            Matrix::zeros(spec.rows, spec.cols)
        };
        store.insert(spec.name, m);
    }
    store
}

/// Pushes the network graph onto a tape, keeping one node per named
/// parameter so gradients of shared pieces (the refinement decoder)
/// accumulate on a single node.
struct Builder<'a> {
    tape: &'a mut Tape,
    store: &'a ParamStore,
    config: &'a ModelConfig,
    nodes: BTreeMap<String, NodeId>,
}

impl<'a> Builder<'a> {
    fn new(tape: &'a mut Tape, store: &'a ParamStore, config: &'a ModelConfig) -> Self {
        Self {
            tape,
            store,
            config,
            nodes: BTreeMap::new(),
        }
    }

    fn param(&mut self, name: &str) -> Result<NodeId> {
        if let Some(&id) = self.nodes.get(name) {
            return Ok(id);
        }
        let value = self
            .store
            .get(name)
            .ok_or_else(|| Error::Config {
                msg: format!("missing parameter {name:?}"),
            })?
            .clone();
        let id = self.tape.param_input(name, value)?;
        self.nodes.insert(name.to_string(), id);
        Ok(id)
    }

    /// Three linear layers with leaky-ReLU between them and the configured
    /// squashing on the output.
    fn mlp3(&mut self, prefix: &str, x: NodeId) -> Result<NodeId> {
        let mut h = x;
        for l in 1..=3 {
            let w = self.param(&format!("{prefix}.{l}.W"))?;
            let b = self.param(&format!("{prefix}.{l}.b"))?;
            h = self.tape.linear(h, w, b)?;
            if l < 3 {
                h = self.tape.leaky_relu(h, self.config.leaky_alpha)?;
            }
        }
        match self.config.output_activation {
            OutputActivation::Tanh => self.tape.tanh(h),
            OutputActivation::None => Ok(h),
        }
    }

    fn encoder(&mut self, image: &Matrix) -> Result<NodeId> {
        let c = self.config;
        match c.encoder {
            EncoderKind::Identity => {
                if image.shape() != (1, c.latent_dim) {
                    return Err(Error::shape(
                        "encode",
                        format!("1x{}", c.latent_dim),
                        format!("{}x{}", image.rows(), image.cols()),
                    ));
                }
                self.tape.input(image.clone())
            }
            EncoderKind::Mlp => {
                let (side, ch) = (c.image_side, c.image_channels);
                if image.shape() != (side * side, ch) {
                    return Err(Error::shape(
                        "encode",
                        format!("{}x{ch}", side * side),
                        format!("{}x{}", image.rows(), image.cols()),
                    ));
                }
                let flat = Matrix::from_vec(1, side * side * ch, image.data().to_vec())?;
                let x = self.tape.input(flat)?;
                let w1 = self.param("enc.1.W")?;
                let b1 = self.param("enc.1.b")?;
                let h = self.tape.linear(x, w1, b1)?;
                let h = self.tape.leaky_relu(h, c.leaky_alpha)?;
                let w2 = self.param("enc.2.W")?;
                let b2 = self.param("enc.2.b")?;
                self.tape.linear(h, w2, b2)
            }
            EncoderKind::TinyConv => {
                let (side, ch) = (c.image_side, c.image_channels);
                if image.shape() != (side * side, ch) {
                    return Err(Error::shape(
                        "encode",
                        format!("{}x{ch}", side * side),
                        format!("{}x{}", image.rows(), image.cols()),
                    ));
                }
                let mut x = self.tape.input(image.clone())?;
                let (mut h, mut w) = (side, side);
                for l in 0..CONV_CHANNELS.len() {
                    let c_in = if l == 0 { ch } else { CONV_CHANNELS[l - 1] };
                    let patches = self.tape.im2col(x, h, w, c_in, 3, 2, 1)?;
                    let wk = self.param(&format!("enc.conv{}.W", l + 1))?;
                    let bk = self.param(&format!("enc.conv{}.b", l + 1))?;
                    let z = self.tape.linear(patches, wk, bk)?;
                    x = self.tape.leaky_relu(z, c.leaky_alpha)?;
                    h = conv_half(h);
                    w = conv_half(w);
                }
                let pooled = self.tape.mean_rows(x)?;
                let wf = self.param("enc.fc.W")?;
                let bf = self.param("enc.fc.b")?;
                self.tape.linear(pooled, wf, bf)
            }
        }
    }

    /// Folds each primitive's UV block, refines through the shared decoder,
    /// and stacks the per-primitive outputs in primitive order.
    fn decoder(&mut self, latent: NodeId, uv: &UvBatch) -> Result<NodeId> {
        let c = self.config;
        if uv.is_empty() || uv.len() % c.n_primitives != 0 {
            return Err(Error::shape(
                "decode",
                format!("UV count divisible by {} primitives", c.n_primitives),
                format!("{} samples", uv.len()),
            ));
        }
        let per = uv.len() / c.n_primitives;
        let tiled = self.tape.tile_rows(latent, per)?;
        let mut parts = Vec::with_capacity(c.n_primitives);
        for p in 0..c.n_primitives {
            let block = Matrix::from_fn(per, 2, |i, j| uv.points()[p * per + i][j]);
            let uv_node = self.tape.input(block)?;
            let fold_in = self.tape.concat_cols(tiled, uv_node)?;
            let folded = self.mlp3(&format!("dec2d3d.{p}"), fold_in)?;
            let refine_in = self.tape.concat_cols(tiled, folded)?;
            let refine_prefix = if c.shared_refinement {
                "dec3d3d".to_string()
            } else {
                format!("dec3d3d.{p}")
            };
            parts.push(self.mlp3(&refine_prefix, refine_in)?);
        }
        self.tape.concat_rows(&parts)
    }
}

/// Spatial extent after one stride-2 3×3 convolution with unit padding.
fn conv_half(n: usize) -> usize {
    (n + 2 - 3) / 2 + 1
}
