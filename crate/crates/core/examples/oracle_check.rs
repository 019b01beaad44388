//! Exhaustive single-slot search on the one-UAV, three-SD fixture: the best
//! action, bitwise parity with direct environment steps, and invariance of
//! the argmax under rescaled reward weights.
//!
//! ```text
//! cargo run --release --example oracle_check
//! ```

use std::path::Path;

use uavmec::experiment::{run_oracle_check, ExperimentConfig};

fn main() -> uavmec::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/oracle.toml");
    let cfg = ExperimentConfig::load(path)?;
    let report = run_oracle_check(&cfg, None)?;
    println!(
        "best: heading {:.3} rad, distance {:.1} m, allocation {:?}",
        report.best.theta, report.best.distance_m, report.best.alloc
    );
    println!("reward {:.3} over {} candidate actions", report.reward, report.evaluated);
    println!("parity mismatches: {}", report.parity_mismatches);
    for c in &report.invariance {
        println!("weights x{:<5} argmax unchanged: {}", c.scale, c.argmax_unchanged);
    }
    println!("passed: {}", report.passed);
    Ok(())
}
