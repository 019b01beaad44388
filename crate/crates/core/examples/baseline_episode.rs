//! One desk-scale episode under the random and greedy controllers, slot by
//! slot, with the reward split into its components.
//!
//! ```text
//! cargo run --release --example baseline_episode
//! ```

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uavmec::baselines::Controller;
use uavmec::env::{Env, EnvConfig};

fn main() -> uavmec::Result<()> {
    let cfg = Arc::new(EnvConfig::default());
    for controller in [Controller::Random, Controller::Greedy] {
        let mut env = Env::new(cfg.clone(), None)?;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut obs = env.reset(42);
        println!("== {}", controller.kind());
        println!("{:>4} {:>8} {:>7} {:>9} {:>10} {:>12}", "slot", "served", "done", "link", "move (J)", "reward");
        let mut total = 0.0;
        loop {
            let actions = controller.actions(&env, &obs, &mut rng)?;
            let t = env.state().t;
            let out = env.step(&actions)?;
            let served: f64 = out.rewards.iter().map(|r| r.served).sum();
            let link: f64 = out.rewards.iter().map(|r| r.offload).sum();
            let moved: f64 = out.rewards.iter().map(|r| r.movement).sum();
            let reward: f64 = out.rewards.iter().map(|r| r.extrinsic).sum();
            total += reward;
            println!(
                "{t:>4} {served:>8} {:>7} {link:>9.1} {moved:>10.0} {reward:>12.0}",
                out.metrics.offloads
            );
            obs = out.observations;
            if out.done {
                break;
            }
        }
        println!("return summed over UAVs: {total:.0}\n");
    }
    Ok(())
}
