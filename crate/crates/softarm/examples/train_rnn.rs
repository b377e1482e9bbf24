//! Train the sensor-to-latent LSTM against a freshly trained autoencoder,
//! at reduced scale.
//!
//!     cargo run --release --example train_rnn

use softarm::models::{AutoencoderSpec, RnnSpec};
use softarm::physics::{build_body, simulate, BodyConfig, ExcitationParams, SimParams};
use softarm::pipeline::{assemble_rnn_dataset, encode_frames, frames_to_matrix, train_autoencoder,
    train_rnn, SplitSpec, TrainHyper};
use softarm::raster::{compute_viewport, render_sequence};
use softarm::sensing::{attach_sensors, default_sensor_pairs, sample_sensors};

fn main() -> softarm::Result<()> {
    let cfg = BodyConfig::default();
    let model = build_body(&cfg)?;
    let sim = SimParams {
        duration: 15.0,
        record_dt: 0.01,
        substeps: 100,
    };
    let steps = 1500;
    println!("simulating {} s ...", sim.duration);
    let trajectory = simulate(&model, &ExcitationParams::default(), &sim)?;
    let viewport = compute_viewport(&trajectory, 0.05, 84, 52)?;
    let frames = render_sequence(&trajectory.truncated(steps), &model, &viewport)?;
    let all = frames_to_matrix(&frames);

    let split = SplitSpec {
        train: 1200,
        test: 200,
        eval: 100,
    };
    let ae_spec = AutoencoderSpec::default();
    println!("training autoencoder ({} frames) ...", split.train);
    let ae = train_autoencoder(
        &all.slice_rows(split.train_range()),
        &all.slice_rows(split.test_range()),
        &ae_spec,
        &TrainHyper {
            epochs: 10,
            patience: 10,
            ..TrainHyper::default()
        },
    )?;
    println!("  autoencoder test BCE {:.4}", ae.best_test_bce);

    let sensors = attach_sensors(&model, &default_sensor_pairs(cfg.rows, cfg.cols))?;
    let trace = sample_sensors(&trajectory.truncated(steps), &sensors)?;
    let latents = encode_frames(&ae.encoder, &all)?;
    let datasets = assemble_rnn_dataset(&trace, &latents, &split, 6, 1e-3)?;
    println!(
        "latent features: {} active of {}",
        datasets.mask.active_count(),
        datasets.mask.total()
    );

    let rnn_spec = RnnSpec {
        input_size: trace.n_sensors,
        hidden_size: 64,
        lookback: 6,
        output_size: datasets.mask.active_count(),
    };
    println!(
        "training LSTM on {} windows ...",
        datasets.train.windows.rows
    );
    let trained = train_rnn(
        &datasets.train,
        &datasets.test,
        &rnn_spec,
        &TrainHyper {
            epochs: 30,
            patience: 30,
            seed: 2,
            ..TrainHyper::default()
        },
    )?;
    for (epoch, tr, te) in trained.curve.rows.iter().step_by(5) {
        println!("  epoch {epoch:>3}: train BCE {tr:.4}  test BCE {te:.4}");
    }
    println!(
        "best latent test BCE {:.4} after {} epochs",
        trained.best_test_bce, trained.epochs_ran
    );
    Ok(())
}
