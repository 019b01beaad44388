//! Exports the trajectory trace of the greedy controller for one episode and
//! checks that every UAV stays inside its own cell.
//!
//! ```text
//! cargo run --release --example trajectory_trace > trace.jsonl
//! ```

use std::io::Write;
use std::sync::Arc;

use uavmec::baselines::{evaluate, Controller};
use uavmec::env::EnvConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let env = Arc::new(EnvConfig::default());
    let report = evaluate(&Controller::Greedy, &env, None, 0..1, 9)?;
    let mut out = std::io::stdout().lock();
    for rec in &report.traces {
        writeln!(out, "{}", serde_json::to_string(rec)?)?;
    }
    let s = &report.summary;
    eprintln!(
        "{} records, in-region fraction {}, offload CV {:.3}",
        report.traces.len(),
        s.in_region_fraction,
        s.mean_offload_cv
    );
    Ok(())
}
