//! Link budget of one uplink as the ground device moves away from the UAV:
//! elevation, LoS probability, channel gain, SNR and Shannon rate.
//!
//! ```text
//! cargo run --example channel_budget
//! ```

use uavmec::channel::{self, ChannelParams};

fn main() {
    let p = ChannelParams::default();
    let altitude = 120.0;
    println!(
        "{:>8} {:>9} {:>7} {:>11} {:>9} {:>10}",
        "r (m)", "elev (°)", "P_LoS", "gain", "SNR (dB)", "rate (Mb/s)"
    );
    for r in [0.0, 50.0, 100.0, 150.0, 250.0, 400.0, 700.0, 1000.0] {
        let elev = channel::elevation_deg(r, altitude);
        let g = channel::channel_gain(r, altitude, &p);
        let snr = channel::snr(g, &p);
        println!(
            "{r:>8.0} {elev:>9.2} {:>7.4} {g:>11.3e} {:>9.2} {:>10.3}",
            channel::los_probability(elev, p.env_c1, p.env_c2),
            10.0 * snr.log10(),
            channel::transmission_rate(g, &p) / 1e6
        );
    }
}
