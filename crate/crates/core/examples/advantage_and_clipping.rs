//! Generalised advantage estimation over a short trajectory, and how the
//! clipped surrogate flattens once the probability ratio leaves [1-ε, 1+ε].
//!
//! ```text
//! cargo run --example advantage_and_clipping
//! ```

use uavmec::trainer::gae::compute_gae;
use uavmec::trainer::losses::{clipped_objective, clipped_objective_dlogp};

fn main() {
    let rewards = [1.0, 0.0, -0.5, 2.0, 0.0, 1.0];
    let values = [0.5, 0.4, 0.1, 0.9, 0.3, 0.6];
    let done = [false, false, true, false, false, true];
    let (adv, ret) = compute_gae(&rewards, &values, &done, 0.99, 0.95);
    println!("{:>4} {:>7} {:>7} {:>10} {:>8}", "t", "reward", "value", "advantage", "return");
    for t in 0..rewards.len() {
        println!("{t:>4} {:>7.2} {:>7.2} {:>10.4} {:>8.4}", rewards[t], values[t], adv[t], ret[t]);
    }

    println!("\n{:>6} {:>12} {:>12} {:>12}", "ratio", "obj (A=+1)", "obj (A=-1)", "dobj/dlogp");
    for r in [0.6, 0.8, 0.9, 1.0, 1.1, 1.2, 1.4] {
        println!(
            "{r:>6.2} {:>12.3} {:>12.3} {:>12.3}",
            clipped_objective(r, 1.0, 0.2),
            clipped_objective(r, -1.0, 0.2),
            clipped_objective_dlogp(r, 1.0, 0.2)
        );
    }
}
