use crate::models::{AutoencoderSpec, RnnSpec};
use crate::physics::{BodyConfig, ExcitationParams, SimParams};
use crate::pipeline::{SplitSpec, TrainHyper};
use crate::sensing::default_sensor_pairs;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Full run configuration. Every default matches the reference experiment:
/// 57-node arm (m = 0.01 kg, k = 1000 N/m, b = 0.9 N·s/m), excitation
/// frequencies 2.11/3.73/4.33 Hz, 100 s at 0.01 s recording step, 84×52
/// binary frames, 8500/1000/500 split, lookback 6.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// Parent directory for run directories.
    pub out: PathBuf,
    pub physics: PhysicsSection,
    pub sensors: SensorSection,
    pub raster: RasterSection,
    pub model: ModelSection,
    pub train: TrainSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            out: PathBuf::from("runs"),
            physics: PhysicsSection::default(),
            sensors: SensorSection::default(),
            raster: RasterSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicsSection {
    pub nodes: usize,
    pub rows: usize,
    pub cols: usize,
    pub spacing: f64,
    pub mass: f64,
    pub stiffness: f64,
    pub damping: f64,
    pub gravity: f64,
    pub amplitude: f64,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub duration: f64,
    pub record_dt: f64,
    pub substeps: usize,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        PhysicsSection {
            nodes: 57,
            rows: 19,
            cols: 3,
            spacing: 0.1,
            mass: 0.01,
            stiffness: 1000.0,
            damping: 0.9,
            gravity: 0.0,
            amplitude: 0.03,
            f1: 2.11,
            f2: 3.73,
            f3: 4.33,
            duration: 100.0,
            record_dt: 0.01,
            substeps: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SensorSection {
    /// Node-index pairs; empty means the default placement along one lateral
    /// edge of the grid.
    pub pairs: Vec<[usize; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RasterSection {
    pub margin: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for RasterSection {
    fn default() -> Self {
        RasterSection {
            margin: 0.05,
            width: 84,
            height: 52,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    pub latent: usize,
    pub conv_channels: Vec<usize>,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub rnn_hidden: usize,
    pub lookback: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            latent: 32,
            conv_channels: vec![8, 16, 32, 32],
            kernel: 3,
            stride: 2,
            pad: 1,
            rnn_hidden: 64,
            lookback: 6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub batch: usize,
    pub lr: f64,
    pub epochs_ae: usize,
    pub epochs_rnn: usize,
    pub patience: usize,
    pub mask_threshold: f64,
    pub train_frames: usize,
    pub test_frames: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            batch: 64,
            lr: 1e-3,
            epochs_ae: 150,
            epochs_rnn: 300,
            patience: 20,
            mask_threshold: 1e-3,
            train_frames: 8500,
            test_frames: 1000,
        }
    }
}

/// Science sections only; seed and output directory do not change the hash.
#[derive(Serialize)]
struct HashedSections<'a> {
    physics: &'a PhysicsSection,
    sensors: &'a SensorSection,
    raster: &'a RasterSection,
    model: &'a ModelSection,
    train: &'a TrainSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("bad config file: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Hash of the scientific configuration (all sections except seed/out).
    pub fn config_hash(&self) -> String {
        let sections = HashedSections {
            physics: &self.physics,
            sensors: &self.sensors,
            raster: &self.raster,
            model: &self.model,
            train: &self.train,
        };
        let text = toml::to_string(&sections).expect("config serializes");
        hex_digest(text.as_bytes())
    }

    /// Hash of the physics section alone; stored in trajectory containers.
    pub fn physics_hash(&self) -> [u8; 32] {
        let text = toml::to_string(&self.physics).expect("config serializes");
        Sha256::digest(text.as_bytes()).into()
    }

    /// Run directory: `<out>/run-<hash8>-s<seed>`.
    pub fn run_dir(&self) -> PathBuf {
        let hash = self.config_hash();
        self.out.join(format!("run-{}-s{}", &hash[..8], self.seed))
    }

    pub fn body_config(&self) -> BodyConfig {
        BodyConfig {
            nodes: self.physics.nodes,
            rows: self.physics.rows,
            cols: self.physics.cols,
            spacing: self.physics.spacing,
            mass: self.physics.mass,
            stiffness: self.physics.stiffness,
            damping: self.physics.damping,
            gravity: self.physics.gravity,
        }
    }

    pub fn excitation(&self) -> ExcitationParams {
        ExcitationParams {
            amplitude: self.physics.amplitude,
            f1: self.physics.f1,
            f2: self.physics.f2,
            f3: self.physics.f3,
        }
    }

    pub fn sim_params(&self) -> SimParams {
        SimParams {
            duration: self.physics.duration,
            record_dt: self.physics.record_dt,
            substeps: self.physics.substeps,
        }
    }

    pub fn sensor_pairs(&self) -> Vec<(usize, usize)> {
        if self.sensors.pairs.is_empty() {
            default_sensor_pairs(self.physics.rows, self.physics.cols)
        } else {
            self.sensors.pairs.iter().map(|p| (p[0], p[1])).collect()
        }
    }

    pub fn autoencoder_spec(&self) -> AutoencoderSpec {
        AutoencoderSpec {
            height: self.raster.height,
            width: self.raster.width,
            conv_channels: self.model.conv_channels.clone(),
            kernel: self.model.kernel,
            stride: self.model.stride,
            pad: self.model.pad,
            latent: self.model.latent,
        }
    }

    pub fn rnn_spec(&self, active_features: usize) -> RnnSpec {
        RnnSpec {
            input_size: self.sensor_pairs().len(),
            hidden_size: self.model.rnn_hidden,
            lookback: self.model.lookback,
            output_size: active_features,
        }
    }

    /// Number of timesteps used downstream (the trailing endpoint state of the
    /// simulation is dropped).
    pub fn dataset_steps(&self) -> usize {
        (self.physics.duration / self.physics.record_dt).round() as usize
    }

    pub fn split_spec(&self) -> Result<SplitSpec> {
        let total = self.dataset_steps();
        let used = self.train.train_frames + self.train.test_frames;
        if used >= total {
            return Err(Error::Config(format!(
                "train+test frames ({used}) leave no evaluation split of {total} timesteps"
            )));
        }
        let eval = total - used;
        if eval <= self.model.lookback {
            return Err(Error::Config(format!(
                "evaluation split of {eval} steps is shorter than lookback {}",
                self.model.lookback
            )));
        }
        Ok(SplitSpec {
            train: self.train.train_frames,
            test: self.train.test_frames,
            eval,
        })
    }

    pub fn ae_hyper(&self) -> TrainHyper {
        TrainHyper {
            batch: self.train.batch,
            lr: self.train.lr,
            epochs: self.train.epochs_ae,
            patience: self.train.patience,
            seed: derive_seed(self.seed, "autoencoder"),
        }
    }

    pub fn rnn_hyper(&self) -> TrainHyper {
        TrainHyper {
            batch: self.train.batch,
            lr: self.train.lr,
            epochs: self.train.epochs_rnn,
            patience: self.train.patience,
            seed: derive_seed(self.seed, "rnn"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.physics.amplitude < 0.0 {
            return Err(Error::Config("amplitude must be >= 0".into()));
        }
        if self.train.batch == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.raster.width == 0 || self.raster.height == 0 {
            return Err(Error::Config("image dimensions must be positive".into()));
        }
        self.split_spec()?;
        Ok(())
    }
}

/// Stage-specific RNG stream derived from the master seed.
pub(crate) fn derive_seed(master: u64, tag: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(tag.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Command-line overrides applied on top of a loaded config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub amplitude: Option<f64>,
    pub duration: Option<f64>,
    pub substeps: Option<usize>,
    pub latent: Option<usize>,
    pub rnn_hidden: Option<usize>,
    pub epochs_ae: Option<usize>,
    pub epochs_rnn: Option<usize>,
    pub batch: Option<usize>,
    pub lr: Option<f64>,
    pub patience: Option<usize>,
    pub mask_threshold: Option<f64>,
    pub margin: Option<f64>,
    pub train_frames: Option<usize>,
    pub test_frames: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = self.amplitude {
            cfg.physics.amplitude = v;
        }
        if let Some(v) = self.duration {
            cfg.physics.duration = v;
        }
        if let Some(v) = self.substeps {
            cfg.physics.substeps = v;
        }
        if let Some(v) = self.latent {
            cfg.model.latent = v;
        }
        if let Some(v) = self.rnn_hidden {
            cfg.model.rnn_hidden = v;
        }
        if let Some(v) = self.epochs_ae {
            cfg.train.epochs_ae = v;
        }
        if let Some(v) = self.epochs_rnn {
            cfg.train.epochs_rnn = v;
        }
        if let Some(v) = self.batch {
            cfg.train.batch = v;
        }
        if let Some(v) = self.lr {
            cfg.train.lr = v;
        }
        if let Some(v) = self.patience {
            cfg.train.patience = v;
        }
        if let Some(v) = self.mask_threshold {
            cfg.train.mask_threshold = v;
        }
        if let Some(v) = self.margin {
            cfg.raster.margin = v;
        }
        if let Some(v) = self.train_frames {
            cfg.train.train_frames = v;
        }
        if let Some(v) = self.test_frames {
            cfg.train.test_frames = v;
        }
    }
}
