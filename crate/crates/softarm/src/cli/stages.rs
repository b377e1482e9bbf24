use super::config::RunConfig;
use super::manifest::{sha256_file, Manifest};
use crate::models::{imagine, load_autoencoder, load_rnn, save_autoencoder, save_rnn};
use crate::physics::{build_body, simulate, Trajectory};
use crate::pipeline::{assemble_rnn_dataset, encode_frames, evaluate, frame_metrics_csv,
    frames_to_matrix, latent_trace_csv, train_autoencoder, train_rnn, Matrix};
use crate::raster::{compute_viewport, render_sequence, BinaryImage, FrameSequence};
use crate::sensing::{attach_sensors, sample_sensors, write_sensor_csv, SensorTrace};
use crate::{Error, Result};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const TRAJECTORY_FILE: &str = "trajectory.sstj";
pub const SENSORS_FILE: &str = "sensors.csv";
pub const FRAMES_FILE: &str = "frames.ssim";
pub const AE_CKPT_FILE: &str = "ae.ssck";
pub const AE_LOSS_FILE: &str = "ae_loss.csv";
pub const RNN_CKPT_FILE: &str = "rnn.ssck";
pub const RNN_LOSS_FILE: &str = "rnn_loss.csv";
pub const METRICS_FILE: &str = "metrics.txt";
pub const LATENT_TRACES_FILE: &str = "latent_traces.csv";
pub const FRAME_METRICS_FILE: &str = "frame_metrics.csv";
pub const IMAGINE_DIR: &str = "imagine";
pub const MANIFEST_FILE: &str = "manifest.toml";

/// Paths inside one run directory.
#[derive(Clone, Debug)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn of(cfg: &RunConfig) -> RunDir {
        RunDir { root: cfg.run_dir() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.path(MANIFEST_FILE)
    }
}

struct Stage {
    dir: RunDir,
    manifest: Manifest,
    started: Instant,
}

impl Stage {
    fn open(cfg: &RunConfig) -> Result<Stage> {
        cfg.validate()?;
        let dir = RunDir::of(cfg);
        std::fs::create_dir_all(&dir.root)?;
        let manifest = Manifest::open_or_init(&dir.manifest_path(), &cfg.config_hash(), cfg.seed)?;
        Ok(Stage {
            dir,
            manifest,
            started: Instant::now(),
        })
    }

    fn need(&self, stage: &str, file: &str) -> Result<()> {
        self.manifest.verify_dependency(stage, &self.dir.root, file)
    }

    /// Hash the produced files, record the stage and persist the manifest.
    fn finish(mut self, name: &str, files: &[String]) -> Result<()> {
        let mut outputs = Vec::with_capacity(files.len());
        for f in files {
            outputs.push((f.clone(), sha256_file(&self.dir.path(f))?));
        }
        let wall = self.started.elapsed().as_secs_f64();
        self.manifest.record_stage(name, wall, outputs);
        self.manifest.save(&self.dir.manifest_path())?;
        println!("[{name}] done in {wall:.1}s -> {}", self.dir.root.display());
        Ok(())
    }
}

/// Load the trajectory and verify it was produced by the active physics
/// configuration.
fn load_trajectory_checked(cfg: &RunConfig, dir: &RunDir) -> Result<Trajectory> {
    let (trajectory, _, body_hash) = Trajectory::load(&dir.path(TRAJECTORY_FILE))?;
    if body_hash != cfg.physics_hash() {
        return Err(Error::HashMismatch(
            "trajectory was simulated under a different physics configuration".into(),
        ));
    }
    if (trajectory.record_dt - cfg.physics.record_dt).abs() > 1e-12 {
        return Err(Error::HashMismatch(format!(
            "trajectory recorded at dt = {}, config wants {}",
            trajectory.record_dt, cfg.physics.record_dt
        )));
    }
    Ok(trajectory)
}

/// Sensor trace over the first `dataset_steps` recorded states.
fn dataset_sensor_trace(cfg: &RunConfig, trajectory: &Trajectory) -> Result<SensorTrace> {
    let model = build_body(&cfg.body_config())?;
    let sensors = attach_sensors(&model, &cfg.sensor_pairs())?;
    sample_sensors(&trajectory.truncated(cfg.dataset_steps()), &sensors)
}

/// Simulate the arm and export the trajectory container plus the sensor CSV.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let stage = Stage::open(cfg)?;
    let model = build_body(&cfg.body_config())?;
    let trajectory = simulate(&model, &cfg.excitation(), &cfg.sim_params())?;
    trajectory.save(
        &stage.dir.path(TRAJECTORY_FILE),
        &cfg.excitation(),
        &cfg.physics_hash(),
    )?;

    let sensors = attach_sensors(&model, &cfg.sensor_pairs())?;
    let trace = sample_sensors(&trajectory, &sensors)?;
    write_sensor_csv(&trace, &stage.dir.path(SENSORS_FILE))?;

    println!(
        "[simulate] {} states recorded over {} s ({} used downstream)",
        trajectory.len(),
        cfg.physics.duration,
        cfg.dataset_steps()
    );
    stage.finish("simulate", &[TRAJECTORY_FILE.into(), SENSORS_FILE.into()])
}

/// Render the dataset frames from the stored trajectory.
pub fn cmd_render(cfg: &RunConfig) -> Result<()> {
    let stage = Stage::open(cfg)?;
    stage.need("simulate", TRAJECTORY_FILE)?;
    let trajectory = load_trajectory_checked(cfg, &stage.dir)?;
    let model = build_body(&cfg.body_config())?;
    let viewport = compute_viewport(&trajectory, cfg.raster.margin, cfg.raster.width, cfg.raster.height)?;
    let frames = render_sequence(&trajectory.truncated(cfg.dataset_steps()), &model, &viewport)?;
    frames.save(&stage.dir.path(FRAMES_FILE))?;
    println!(
        "[render] {} frames of {}x{} px",
        frames.len(),
        cfg.raster.width,
        cfg.raster.height
    );
    stage.finish("render", &[FRAMES_FILE.into()])
}

fn split_frame_matrix(cfg: &RunConfig, frames: &FrameSequence) -> Result<(Matrix, Matrix, Matrix)> {
    let split = cfg.split_spec()?;
    let all = frames_to_matrix(frames);
    if all.rows != split.total() {
        return Err(Error::Config(format!(
            "frame container has {} frames, split needs {}",
            all.rows,
            split.total()
        )));
    }
    Ok((
        all.slice_rows(split.train_range()),
        all.slice_rows(split.test_range()),
        all.slice_rows(split.eval_range()),
    ))
}

/// Train the autoencoder on the train split, early-stopping on the test split.
pub fn cmd_train_ae(cfg: &RunConfig) -> Result<()> {
    let stage = Stage::open(cfg)?;
    stage.need("render", FRAMES_FILE)?;
    let frames = FrameSequence::load(&stage.dir.path(FRAMES_FILE))?;
    let (train, test, _) = split_frame_matrix(cfg, &frames)?;

    let spec = cfg.autoencoder_spec();
    let hyper = cfg.ae_hyper();
    let trained = train_autoencoder(&train, &test, &spec, &hyper)?;
    trained.curve.write_csv(&stage.dir.path(AE_LOSS_FILE))?;
    save_autoencoder(
        &stage.dir.path(AE_CKPT_FILE),
        &trained.encoder,
        &trained.decoder,
        &frames.viewport,
        &[
            ("config_hash", cfg.config_hash()),
            ("seed", cfg.seed.to_string()),
            ("train_seed", hyper.seed.to_string()),
            ("best_test_bce", format!("{:.9e}", trained.best_test_bce)),
            ("epochs_ran", trained.epochs_ran.to_string()),
        ],
    )?;
    println!(
        "[train-ae] best test BCE {:.4} after {} epochs",
        trained.best_test_bce, trained.epochs_ran
    );
    stage.finish("train-ae", &[AE_CKPT_FILE.into(), AE_LOSS_FILE.into()])
}

/// Train the sensor-to-latent LSTM against the trained encoder's codes.
pub fn cmd_train_rnn(cfg: &RunConfig) -> Result<()> {
    let stage = Stage::open(cfg)?;
    stage.need("simulate", TRAJECTORY_FILE)?;
    stage.need("render", FRAMES_FILE)?;
    stage.need("train-ae", AE_CKPT_FILE)?;

    let trajectory = load_trajectory_checked(cfg, &stage.dir)?;
    let trace = dataset_sensor_trace(cfg, &trajectory)?;
    let frames = FrameSequence::load(&stage.dir.path(FRAMES_FILE))?;
    let ae = load_autoencoder(&stage.dir.path(AE_CKPT_FILE))?;

    let all_frames = frames_to_matrix(&frames);
    let latents = encode_frames(&ae.encoder, &all_frames)?;
    let split = cfg.split_spec()?;
    let datasets = assemble_rnn_dataset(
        &trace,
        &latents,
        &split,
        cfg.model.lookback,
        cfg.train.mask_threshold,
    )?;

    let spec = cfg.rnn_spec(datasets.mask.active_count());
    let hyper = cfg.rnn_hyper();
    let trained = train_rnn(&datasets.train, &datasets.test, &spec, &hyper)?;
    trained.curve.write_csv(&stage.dir.path(RNN_LOSS_FILE))?;
    save_rnn(
        &stage.dir.path(RNN_CKPT_FILE),
        &trained.rnn,
        &datasets.sensor_norm,
        &datasets.latent_norm,
        &datasets.mask,
        &[
            ("config_hash", cfg.config_hash()),
            ("seed", cfg.seed.to_string()),
            ("train_seed", hyper.seed.to_string()),
            ("best_test_bce", format!("{:.9e}", trained.best_test_bce)),
            ("epochs_ran", trained.epochs_ran.to_string()),
            ("ae_checkpoint", sha256_file(&stage.dir.path(AE_CKPT_FILE))?),
        ],
    )?;
    println!(
        "[train-rnn] best test BCE {:.4} after {} epochs ({} active features, clip rate {:.2e})",
        trained.best_test_bce,
        trained.epochs_ran,
        datasets.mask.active_count(),
        datasets.test.clip_rate,
    );
    stage.finish("train-rnn", &[RNN_CKPT_FILE.into(), RNN_LOSS_FILE.into()])
}

/// Decode imagined frames for the evaluation segment and write them next to
/// the ground truth as PGM files.
pub fn cmd_imagine(cfg: &RunConfig) -> Result<()> {
    let stage = Stage::open(cfg)?;
    stage.need("simulate", TRAJECTORY_FILE)?;
    stage.need("render", FRAMES_FILE)?;
    stage.need("train-ae", AE_CKPT_FILE)?;
    stage.need("train-rnn", RNN_CKPT_FILE)?;

    let trajectory = load_trajectory_checked(cfg, &stage.dir)?;
    let trace = dataset_sensor_trace(cfg, &trajectory)?;
    let frames = FrameSequence::load(&stage.dir.path(FRAMES_FILE))?;
    let ae = load_autoencoder(&stage.dir.path(AE_CKPT_FILE))?;
    let rnn = load_rnn(&stage.dir.path(RNN_CKPT_FILE))?;

    let split = cfg.split_spec()?;
    let eval_range = split.eval_range();
    let segment = trace.slice(eval_range.start, eval_range.end);
    let imagined = imagine(
        &segment,
        &rnn.rnn,
        &ae.decoder,
        &rnn.sensor_norm,
        &rnn.latent_norm,
        &rnn.mask,
    )?;

    let out_dir = stage.dir.path(IMAGINE_DIR);
    std::fs::create_dir_all(&out_dir)?;
    let mut files = Vec::with_capacity(2 * imagined.len());
    for (k, prob) in imagined.iter().enumerate() {
        let t = eval_range.start + cfg.model.lookback + k;
        let imagined_img =
            BinaryImage::from_probabilities(cfg.raster.width, cfg.raster.height, prob.data());
        let name = format!("{IMAGINE_DIR}/imagined_{k:04}.pgm");
        imagined_img.write_pgm(&stage.dir.path(&name))?;
        files.push(name);

        let truth = &frames.frames[t];
        let name = format!("{IMAGINE_DIR}/truth_{k:04}.pgm");
        truth.write_pgm(&stage.dir.path(&name))?;
        files.push(name);
    }
    println!(
        "[imagine] {} imagined frames (+{} ground truth) in {}",
        imagined.len(),
        imagined.len(),
        out_dir.display()
    );
    stage.finish("imagine", &files)
}

/// Compute the metrics report and the CSV artifacts on the eval split.
pub fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    let stage = Stage::open(cfg)?;
    stage.need("simulate", TRAJECTORY_FILE)?;
    stage.need("render", FRAMES_FILE)?;
    stage.need("train-ae", AE_CKPT_FILE)?;
    stage.need("train-rnn", RNN_CKPT_FILE)?;

    let trajectory = load_trajectory_checked(cfg, &stage.dir)?;
    let trace = dataset_sensor_trace(cfg, &trajectory)?;
    let frames = FrameSequence::load(&stage.dir.path(FRAMES_FILE))?;
    let ae = load_autoencoder(&stage.dir.path(AE_CKPT_FILE))?;
    let rnn = load_rnn(&stage.dir.path(RNN_CKPT_FILE))?;

    let all_frames = frames_to_matrix(&frames);
    let latents = encode_frames(&ae.encoder, &all_frames)?;
    let split = cfg.split_spec()?;
    let datasets = assemble_rnn_dataset(
        &trace,
        &latents,
        &split,
        cfg.model.lookback,
        cfg.train.mask_threshold,
    )?;
    // The rebuilt statistics must agree with the ones stored at training time;
    // anything else means the artifacts are stale.
    if datasets.mask != rnn.mask
        || datasets.sensor_norm != rnn.sensor_norm
        || datasets.latent_norm != rnn.latent_norm
    {
        return Err(Error::HashMismatch(
            "normalizer/mask statistics no longer match the rnn checkpoint; rerun train-rnn".into(),
        ));
    }

    let artifacts = evaluate(
        &all_frames,
        &trace,
        &ae.encoder,
        &ae.decoder,
        &rnn.rnn,
        &datasets,
        &split,
        cfg.physics.record_dt,
    )?;
    let expected_predictions = split.eval - cfg.model.lookback;
    if artifacts.metrics.predictions != expected_predictions {
        return Err(Error::Config(format!(
            "evaluation produced {} predictions, expected {expected_predictions}",
            artifacts.metrics.predictions
        )));
    }

    std::fs::write(stage.dir.path(METRICS_FILE), artifacts.metrics.to_kv())?;
    std::fs::write(
        stage.dir.path(LATENT_TRACES_FILE),
        latent_trace_csv(&artifacts.latent_trace_rows),
    )?;
    std::fs::write(
        stage.dir.path(FRAME_METRICS_FILE),
        frame_metrics_csv(&artifacts.frame_rows),
    )?;
    println!("[eval] {}", artifacts.metrics.to_kv().trim_end().replace('\n', "\n[eval] "));
    stage.finish(
        "eval",
        &[
            METRICS_FILE.into(),
            LATENT_TRACES_FILE.into(),
            FRAME_METRICS_FILE.into(),
        ],
    )
}

/// Run all six stages in order.
pub fn cmd_run_all(cfg: &RunConfig) -> Result<()> {
    cmd_simulate(cfg)?;
    cmd_render(cfg)?;
    cmd_train_ae(cfg)?;
    cmd_train_rnn(cfg)?;
    cmd_imagine(cfg)?;
    cmd_eval(cfg)?;
    let dir = RunDir::of(cfg);
    let manifest = Manifest::load(&dir.manifest_path())?.unwrap_or_default();
    println!(
        "[run-all] complete: {} stages recorded in {}",
        manifest.stages.len(),
        dir.manifest_path().display()
    );
    Ok(())
}

/// Read a metrics report back as key/value pairs.
pub fn read_metrics(dir: &Path) -> Result<Vec<(String, f64)>> {
    let text = std::fs::read_to_string(dir.join(METRICS_FILE))?;
    Ok(crate::pipeline::EvalMetrics::parse_kv(&text))
}
