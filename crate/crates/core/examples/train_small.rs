//! Trains the imitation-augmented learner and the plain clipped-surrogate
//! baseline on a shrunken world, then compares both with the random and
//! greedy controllers on the same evaluation episodes.
//!
//! ```text
//! cargo run --release --example train_small [episodes]
//! ```

use std::sync::Arc;

use uavmec::baselines::{evaluate, Controller};
use uavmec::env::EnvConfig;
use uavmec::trainer::{ActMode, TrainConfig, Trainer};
use uavmec::world::WorldConfig;

fn main() -> uavmec::Result<()> {
    let episodes = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(400);
    let env = Arc::new(EnvConfig {
        world: WorldConfig {
            num_sds: 40,
            slots: 12,
            ..WorldConfig::default()
        },
        observed_sds: 6,
        ..EnvConfig::default()
    });
    let base = TrainConfig {
        episodes,
        workers: 2,
        episodes_per_update: 20,
        hidden_sizes: vec![32, 32],
        ..TrainConfig::default()
    };
    let seed = 5;
    let eval_seed = 1_000;
    for (name, cfg) in [("imitation", base.clone()), ("ppo", base.ppo())] {
        let mut trainer = Trainer::new(cfg, env.clone(), None, seed)?;
        trainer.run(|t, rows| {
            if t.updates_done() % 5 == 0 {
                let mean = rows.iter().map(|r| r.mean_return).sum::<f64>() / rows.len() as f64;
                println!("{name:>9} update {:>3}: mean return {mean:.0}", t.updates_done());
            }
            Ok(())
        })?;
        let policy = Arc::new(trainer.policy().clone());
        let r = evaluate(&Controller::Learned(policy, ActMode::Mean), &env, None, 0..50, eval_seed)?;
        println!("{name:>9} evaluation: {:.0}", r.summary.mean_return);
    }
    for c in [Controller::Random, Controller::Greedy] {
        let r = evaluate(&c, &env, None, 0..50, eval_seed)?;
        println!("{:>9} evaluation: {:.0}", c.kind(), r.summary.mean_return);
    }
    Ok(())
}
