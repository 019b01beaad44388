//! Rotary-wing propulsion power against horizontal speed, and the speed that
//! minimises it.
//!
//! ```text
//! cargo run --example propulsion_curve
//! ```

use uavmec::world::{propulsion_power, RotorParams};

fn main() {
    let rotor = RotorParams::default();
    println!("{:>8} {:>10}", "v (m/s)", "P (W)");
    for v in (0..=30).step_by(3) {
        println!("{:>8} {:>10.2}", v, propulsion_power(v as f64, &rotor));
    }
    let (v_star, p_star) = (0..=30_000)
        .map(|i| i as f64 * 1e-3)
        .map(|v| (v, propulsion_power(v, &rotor)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    println!("hover {:.4} W, minimum {p_star:.4} W at {v_star:.3} m/s", propulsion_power(0.0, &rotor));
}
