//! Finite-difference gradient checks for every layer kernel.
//!
//!     cargo run --release --example gradient_check [seeds]

use softarm::nn::gradcheck::{check_all_layers, DEFAULT_EPS};

fn main() -> softarm::Result<()> {
    let seeds: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(5);
    println!("central differences at eps = {DEFAULT_EPS}, {seeds} seeds per layer\n");
    println!("{:<22} {:>12} {:>10}", "layer", "max rel err", "entries");

    let mut worst_by_layer: std::collections::BTreeMap<String, f64> = Default::default();
    let mut entries: std::collections::BTreeMap<String, usize> = Default::default();
    for seed in 0..seeds {
        for report in check_all_layers(seed, DEFAULT_EPS)? {
            let w = worst_by_layer.entry(report.name.clone()).or_insert(0.0);
            *w = w.max(report.max_rel_err);
            *entries.entry(report.name).or_insert(0) += report.entries;
        }
    }
    let mut all_ok = true;
    for (name, worst) in &worst_by_layer {
        let ok = *worst < 1e-5;
        all_ok &= ok;
        println!(
            "{:<22} {:>12.3e} {:>10}   {}",
            name,
            worst,
            entries[name],
            if ok { "ok" } else { "FAIL" }
        );
    }
    println!("\noverall: {}", if all_ok { "all gradients exact to 1e-5" } else { "FAILURES" });
    std::process::exit(if all_ok { 0 } else { 1 });
}
