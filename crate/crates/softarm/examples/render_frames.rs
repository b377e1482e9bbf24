//! Render binary camera frames from a short simulation and export a few PGMs.
//!
//!     cargo run --release --example render_frames

use softarm::physics::{build_body, simulate, BodyConfig, ExcitationParams, SimParams};
use softarm::raster::{compute_viewport, render_sequence};

fn main() -> softarm::Result<()> {
    let model = build_body(&BodyConfig::default())?;
    let sim = SimParams {
        duration: 5.0,
        record_dt: 0.01,
        substeps: 100,
    };
    let trajectory = simulate(&model, &ExcitationParams::default(), &sim)?;
    let viewport = compute_viewport(&trajectory, 0.05, 84, 52)?;
    println!(
        "viewport: origin ({:.3}, {:.3}), {:.3} x {:.3} m onto {}x{} px",
        viewport.min_x,
        viewport.min_y,
        viewport.world_width,
        viewport.world_height,
        viewport.width,
        viewport.height
    );

    let frames = render_sequence(&trajectory, &model, &viewport)?;
    println!("rendered {} frames, {} px each", frames.len(), frames.frames[0].pixels.len());

    let out = std::env::temp_dir().join("softarm_frames");
    std::fs::create_dir_all(&out)?;
    for (k, idx) in [0usize, 125, 250, 375, 500].iter().enumerate() {
        let frame = &frames.frames[*idx];
        let path = out.join(format!("frame_{k}.pgm"));
        frame.write_pgm(&path)?;
        println!(
            "  t = {:.2} s: {} body pixels -> {}",
            *idx as f64 * sim.record_dt,
            frame.body_pixel_count(),
            path.display()
        );
    }
    let container = out.join("frames.ssim");
    frames.save(&container)?;
    println!("frame container -> {}", container.display());
    Ok(())
}
