//! Run configuration: one serializable struct holding every knob a run
//! depends on, resolved from defaults → JSON config file → command flags.

use std::path::{Path, PathBuf};

use pcrecon::geometry::{write_atomic, CenterMode, NormalizeMethod};
use pcrecon::metrics::ChamferMode;
use pcrecon::model::{EncoderKind, ModelConfig, OutputActivation};
use pcrecon::sampling::SampleMethod;
use pcrecon::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Everything a run needs: the model configuration plus the preprocessing,
/// evaluation and output settings. Serialized verbatim into each run
/// directory so results stay reproducible from their own artifacts.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Architecture and optimizer settings.
    pub model: ModelConfig,
    /// F-score distance threshold. There is no canonical value; reports
    /// always state the tau they were computed at.
    pub tau: f64,
    /// Cloud normalization applied during preprocessing.
    pub normalization: NormalizeMethod,
    /// Optional centering before the normalization scale is measured.
    pub center: CenterMode,
    /// Uniform scale factor applied after normalization.
    pub scale: f64,
    /// Standard deviation of the Gaussian perturbation added to processed
    /// clouds; 0 disables the noise step.
    pub noise_sigma: f64,
    /// Mesh surface sampling method used when a sample's geometry is a mesh.
    pub sampling: SampleMethod,
    /// Points drawn from a mesh surface before downsampling.
    pub surface_points: usize,
    /// Relaxation rounds when `sampling` is `lloyd`.
    pub lloyd_iters: usize,
    /// Optimizer step count trained up to (absolute, so resumed runs
    /// continue toward the same target).
    pub steps: u64,
    /// Samples per optimizer step; their losses are summed.
    pub batch_size: usize,
    /// Checkpoint cadence in steps; `None` writes only the final state.
    pub checkpoint_every: Option<u64>,
    /// Directory run artifacts are written into.
    pub out_dir: PathBuf,
    /// Root seed; all randomness (init, UV draws, preprocessing) derives
    /// from it through named substreams.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            tau: 0.05,
            normalization: NormalizeMethod::Square,
            center: CenterMode::None,
            scale: 1.0,
            noise_sigma: 0.01,
            sampling: SampleMethod::AreaUniform,
            surface_points: 4096,
            lloyd_iters: 8,
            steps: 200,
            batch_size: 1,
            checkpoint_every: Some(100),
            out_dir: PathBuf::from("runs/default"),
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Validates every range the commands rely on.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(self.tau > 0.0) {
            return Err(Error::NonPositiveTau { tau: self.tau });
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Config {
                msg: format!("scale must be positive and finite, got {}", self.scale),
            });
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config {
                msg: format!("noise_sigma must be >= 0, got {}", self.noise_sigma),
            });
        }
        if self.surface_points < self.model.n_points {
            return Err(Error::Config {
                msg: format!(
                    "surface_points ({}) must cover the downsample target ({})",
                    self.surface_points, self.model.n_points
                ),
            });
        }
        if self.batch_size == 0 {
            return Err(Error::Config {
                msg: "batch_size must be at least 1".into(),
            });
        }
        if self.checkpoint_every == Some(0) {
            return Err(Error::Config {
                msg: "checkpoint_every must be positive; omit it to checkpoint only at the end"
                    .into(),
            });
        }
        Ok(())
    }

    /// Pretty JSON used both for echoing and for the stored copy.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Prints the resolved configuration; every command calls this before
    /// doing work.
    pub fn echo(&self) {
        println!("seed: {}", self.seed);
        println!("config: {}", self.to_json().trim_end());
    }

    /// Writes the configuration into `dir` as `config.json`.
    pub fn store(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join("config.json"), self.to_json().as_bytes())
    }

    /// Loads a stored configuration from `dir`.
    pub fn load_dir(dir: &Path) -> Result<RunConfig> {
        let path = dir.join("config.json");
        let text = std::fs::read_to_string(&path)?;
        parse_json(&path, &text)
    }
}

fn parse_json(path: &Path, text: &str) -> Result<RunConfig> {
    serde_json::from_str(text)
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            msg: e.to_string(),
        })
        .and_then(|cfg: RunConfig| {
            cfg.validate()?;
            Ok(cfg)
        })
}

/// Parses one enum flag value through its serde name (`unit_ball`,
/// `squared_l2`, ...), so flag vocabulary and config-file vocabulary are
/// identical by construction.
pub(crate) fn variant<T: DeserializeOwned>(flag: &str, value: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string())).map_err(|e| {
        Error::Config {
            msg: format!("--{flag}: {e}"),
        }
    })
}

/// Configuration-shaping flags shared by the commands. Every field
/// overrides the matching [`RunConfig`] entry when present.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct ConfigFlags {
    /// JSON run-configuration file; flags override its fields.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Latent code width.
    #[arg(long, value_name = "D")]
    pub latent_dim: Option<usize>,
    /// Points per decoded cloud (also the downsample target).
    #[arg(long, value_name = "N")]
    pub n_points: Option<usize>,
    /// Number of decoder primitives.
    #[arg(long, value_name = "P")]
    pub n_primitives: Option<usize>,
    /// Decoder hidden widths, e.g. "512,256".
    #[arg(long, value_name = "W1,W2")]
    pub hidden: Option<String>,
    /// Negative slope of the leaky-relu activations.
    #[arg(long, value_name = "ALPHA")]
    pub leaky_alpha: Option<f64>,
    /// Decoder output squashing: tanh | none.
    #[arg(long, value_name = "KIND")]
    pub output_activation: Option<String>,
    /// Encoder kind: tiny_conv | mlp | identity.
    #[arg(long, value_name = "KIND")]
    pub encoder: Option<String>,
    /// Input image side length in pixels.
    #[arg(long, value_name = "PX")]
    pub image_side: Option<usize>,
    /// Input image channel count.
    #[arg(long, value_name = "C")]
    pub image_channels: Option<usize>,
    /// Chamfer distance flavor: l2 | squared_l2.
    #[arg(long, value_name = "MODE")]
    pub chamfer_mode: Option<String>,
    /// Chamfer aggregation: mean | max.
    #[arg(long, value_name = "AGG")]
    pub chamfer_agg: Option<String>,
    /// Share the refinement decoder across primitives: true | false.
    #[arg(long, value_name = "BOOL")]
    pub shared_refinement: Option<bool>,
    /// Adam learning rate.
    #[arg(long, value_name = "LR")]
    pub lr: Option<f64>,
    /// Adam first-moment decay.
    #[arg(long, value_name = "B1")]
    pub beta1: Option<f64>,
    /// Adam second-moment decay.
    #[arg(long, value_name = "B2")]
    pub beta2: Option<f64>,
    /// Adam denominator epsilon.
    #[arg(long, value_name = "EPS")]
    pub epsilon: Option<f64>,
    /// F-score distance threshold.
    #[arg(long, value_name = "TAU")]
    pub tau: Option<f64>,
    /// Normalization method: unit_ball | square.
    #[arg(long, value_name = "METHOD")]
    pub normalization: Option<String>,
    /// Centering before normalization: none | centroid.
    #[arg(long, value_name = "MODE")]
    pub center: Option<String>,
    /// Scale factor applied after normalization.
    #[arg(long, value_name = "FACTOR")]
    pub scale: Option<f64>,
    /// Gaussian noise sigma (0 disables).
    #[arg(long, value_name = "SIGMA")]
    pub noise_sigma: Option<f64>,
    /// Mesh surface sampling: area_uniform | lloyd.
    #[arg(long, value_name = "METHOD")]
    pub sampling: Option<String>,
    /// Surface points drawn from meshes before downsampling.
    #[arg(long, value_name = "N")]
    pub surface_points: Option<usize>,
    /// Lloyd relaxation rounds.
    #[arg(long, value_name = "ITERS")]
    pub lloyd_iters: Option<usize>,
    /// Optimizer step target (absolute; resumed runs continue toward it).
    #[arg(long, value_name = "STEPS")]
    pub steps: Option<u64>,
    /// Samples per optimizer step.
    #[arg(long, value_name = "B")]
    pub batch_size: Option<usize>,
    /// Checkpoint cadence in steps (0 = only the final checkpoint).
    #[arg(long, value_name = "STEPS")]
    pub checkpoint_every: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

impl ConfigFlags {
    /// Resolves the full configuration: defaults, then the config file,
    /// then these flags. The result is validated.
    pub fn resolve(&self) -> Result<RunConfig> {
        let base = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                parse_json(path, &text)?
            }
            None => RunConfig::default(),
        };
        self.apply(base)
    }

    /// Applies these flags on top of an already-loaded configuration.
    pub fn apply(&self, mut cfg: RunConfig) -> Result<RunConfig> {
        let m = &mut cfg.model;
        if let Some(v) = self.latent_dim {
            m.latent_dim = v;
        }
        if let Some(v) = self.n_points {
            m.n_points = v;
        }
        if let Some(v) = self.n_primitives {
            m.n_primitives = v;
        }
        if let Some(s) = &self.hidden {
            m.hidden = parse_hidden(s)?;
        }
        if let Some(v) = self.leaky_alpha {
            m.leaky_alpha = v;
        }
        if let Some(s) = &self.output_activation {
            m.output_activation = variant::<OutputActivation>("output-activation", s)?;
        }
        if let Some(s) = &self.encoder {
            m.encoder = variant::<EncoderKind>("encoder", s)?;
        }
        if let Some(v) = self.image_side {
            m.image_side = v;
        }
        if let Some(v) = self.image_channels {
            m.image_channels = v;
        }
        if let Some(s) = &self.chamfer_mode {
            m.chamfer_mode = variant::<ChamferMode>("chamfer-mode", s)?;
        }
        if let Some(s) = &self.chamfer_agg {
            m.chamfer_agg = variant("chamfer-agg", s)?;
        }
        if let Some(v) = self.shared_refinement {
            m.shared_refinement = v;
        }
        let a = &mut m.adam;
        if let Some(v) = self.lr {
            a.lr = v;
        }
        if let Some(v) = self.beta1 {
            a.beta1 = v;
        }
        if let Some(v) = self.beta2 {
            a.beta2 = v;
        }
        if let Some(v) = self.epsilon {
            a.eps = v;
        }
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        if let Some(s) = &self.normalization {
            cfg.normalization = variant::<NormalizeMethod>("normalization", s)?;
        }
        if let Some(s) = &self.center {
            cfg.center = variant::<CenterMode>("center", s)?;
        }
        if let Some(v) = self.scale {
            cfg.scale = v;
        }
        if let Some(v) = self.noise_sigma {
            cfg.noise_sigma = v;
        }
        if let Some(s) = &self.sampling {
            cfg.sampling = variant::<SampleMethod>("sampling", s)?;
        }
        if let Some(v) = self.surface_points {
            cfg.surface_points = v;
        }
        if let Some(v) = self.lloyd_iters {
            cfg.lloyd_iters = v;
        }
        if let Some(v) = self.steps {
            cfg.steps = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.checkpoint_every {
            cfg.checkpoint_every = if v == 0 { None } else { Some(v) };
        }
        if let Some(p) = &self.out {
            cfg.out_dir = p.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_hidden(s: &str) -> Result<[usize; 2]> {
    let parts: Vec<_> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(Error::Config {
            msg: format!("--hidden expects two comma-separated widths, got {s:?}"),
        });
    }
    let mut out = [0usize; 2];
    for (slot, part) in out.iter_mut().zip(&parts) {
        *slot = part.parse().map_err(|_| Error::Config {
            msg: format!("--hidden: {part:?} is not a width"),
        })?;
    }
    Ok(out)
}
