//! Staged pipeline driver with a run manifest.
//!
//! Each stage reads its inputs from the run directory, verifies that the
//! recorded configuration hash and dependency digests still match, writes its
//! artifacts and updates the manifest. Stages are idempotent: rerunning with
//! unchanged inputs reproduces identical artifacts on the same platform.

mod config;
mod manifest;
mod stages;

pub use config::{Overrides, RunConfig};
pub use manifest::{sha256_file, Manifest, StageRecord};
pub use stages::{cmd_eval, cmd_imagine, cmd_render, cmd_run_all, cmd_simulate, cmd_train_ae,
    cmd_train_rnn, read_metrics, RunDir, AE_CKPT_FILE, AE_LOSS_FILE, FRAMES_FILE, FRAME_METRICS_FILE,
    IMAGINE_DIR, LATENT_TRACES_FILE, MANIFEST_FILE, METRICS_FILE, RNN_CKPT_FILE, RNN_LOSS_FILE,
    SENSORS_FILE, TRAJECTORY_FILE};

/// Initialize the global worker pool from the `SOFTARM_THREADS` environment
/// variable. Without it, the default pool (one worker per core) is used.
pub fn init_threads() {
    if let Ok(val) = std::env::var("SOFTARM_THREADS") {
        if let Ok(n) = val.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
}
