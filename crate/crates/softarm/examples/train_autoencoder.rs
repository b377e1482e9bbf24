//! Train the convolutional autoencoder on a short simulation (reduced scale
//! so it finishes in about a minute).
//!
//!     cargo run --release --example train_autoencoder

use softarm::models::AutoencoderSpec;
use softarm::physics::{build_body, simulate, BodyConfig, ExcitationParams, SimParams};
use softarm::pipeline::{frames_to_matrix, train_autoencoder, SplitSpec, TrainHyper};
use softarm::raster::{compute_viewport, render_sequence};

fn main() -> softarm::Result<()> {
    let model = build_body(&BodyConfig::default())?;
    let sim = SimParams {
        duration: 12.0,
        record_dt: 0.01,
        substeps: 100,
    };
    println!("simulating {} s ...", sim.duration);
    let trajectory = simulate(&model, &ExcitationParams::default(), &sim)?;
    let viewport = compute_viewport(&trajectory, 0.05, 84, 52)?;
    let frames = render_sequence(&trajectory.truncated(1200), &model, &viewport)?;
    let all = frames_to_matrix(&frames);

    let split = SplitSpec {
        train: 1000,
        test: 150,
        eval: 50,
    };
    let train = all.slice_rows(split.train_range());
    let test = all.slice_rows(split.test_range());

    let spec = AutoencoderSpec::default();
    let hyper = TrainHyper {
        batch: 64,
        lr: 1e-3,
        epochs: 12,
        patience: 12,
        seed: 1,
    };
    println!(
        "training {} frames / testing {} frames, latent size {} ...",
        train.rows, test.rows, spec.latent
    );
    let trained = train_autoencoder(&train, &test, &spec, &hyper)?;
    for (epoch, tr, te) in &trained.curve.rows {
        println!("  epoch {epoch:>3}: train BCE {tr:.4}  test BCE {te:.4}");
    }
    println!(
        "best test BCE {:.4} after {} epochs",
        trained.best_test_bce, trained.epochs_ran
    );
    Ok(())
}
