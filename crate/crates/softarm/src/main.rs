use clap::{Parser, Subcommand};
use softarm::cli::{self, Overrides, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

/// Soft octopus-arm simulation and proprioceptive-imagination pipeline.
#[derive(Parser)]
#[command(name = "softarm", version, about)]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// Key-value (TOML) configuration file; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// RNG seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Parent directory for run directories.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Excitation amplitude in metres.
    #[arg(long, global = true)]
    amplitude: Option<f64>,

    /// Simulation duration in seconds.
    #[arg(long, global = true)]
    duration: Option<f64>,

    /// Internal integration substeps per recording step.
    #[arg(long, global = true)]
    substeps: Option<usize>,

    /// Latent code size.
    #[arg(long, global = true)]
    latent: Option<usize>,

    /// LSTM hidden size.
    #[arg(long, global = true)]
    rnn_hidden: Option<usize>,

    /// Maximum autoencoder training epochs.
    #[arg(long, global = true)]
    epochs_ae: Option<usize>,

    /// Maximum RNN training epochs.
    #[arg(long, global = true)]
    epochs_rnn: Option<usize>,

    /// Mini-batch size.
    #[arg(long, global = true)]
    batch: Option<usize>,

    /// Adam learning rate.
    #[arg(long, global = true)]
    lr: Option<f64>,

    /// Early-stopping patience in epochs.
    #[arg(long, global = true)]
    patience: Option<usize>,

    /// Latent feature mask threshold (standard deviation).
    #[arg(long, global = true)]
    mask_threshold: Option<f64>,

    /// Viewport margin fraction per side.
    #[arg(long, global = true)]
    margin: Option<f64>,

    /// Training frames (from the start of the dataset).
    #[arg(long, global = true)]
    train_frames: Option<usize>,

    /// Test frames (after the training frames).
    #[arg(long, global = true)]
    test_frames: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the arm; writes the trajectory container and sensor CSV.
    Simulate,
    /// Render binary frames from the stored trajectory.
    Render,
    /// Train the convolutional autoencoder on the frames.
    TrainAe,
    /// Train the sensor-to-latent LSTM.
    TrainRnn,
    /// Decode imagined frames for the evaluation segment.
    Imagine,
    /// Compute the metrics report on the evaluation split.
    Eval,
    /// Run all six stages in order.
    RunAll,
}

fn run(args: &Args) -> softarm::Result<()> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let overrides = Overrides {
        seed: args.seed,
        out: args.out.clone(),
        amplitude: args.amplitude,
        duration: args.duration,
        substeps: args.substeps,
        latent: args.latent,
        rnn_hidden: args.rnn_hidden,
        epochs_ae: args.epochs_ae,
        epochs_rnn: args.epochs_rnn,
        batch: args.batch,
        lr: args.lr,
        patience: args.patience,
        mask_threshold: args.mask_threshold,
        margin: args.margin,
        train_frames: args.train_frames,
        test_frames: args.test_frames,
    };
    overrides.apply(&mut cfg);
    cli::init_threads();
    match args.command {
        Command::Simulate => cli::cmd_simulate(&cfg),
        Command::Render => cli::cmd_render(&cfg),
        Command::TrainAe => cli::cmd_train_ae(&cfg),
        Command::TrainRnn => cli::cmd_train_rnn(&cfg),
        Command::Imagine => cli::cmd_imagine(&cfg),
        Command::Eval => cli::cmd_eval(&cfg),
        Command::RunAll => cli::cmd_run_all(&cfg),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
