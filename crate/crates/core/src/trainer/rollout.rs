use std::ops::Range;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::buffer::{RolloutBuffer, Transition};
use super::policy::{ActMode, Policy};
use crate::compute::EpisodeMetrics;
use crate::env::{decode_action, Env, EnvConfig, Scenario};
use crate::error::{Error, Result};

/// Summary of one finished episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    /// Undiscounted extrinsic return per agent.
    pub returns: Vec<f64>,
    pub metrics: EpisodeMetrics,
    /// Final per-SD offload counts.
    pub offloads: Vec<u32>,
}

impl EpisodeRecord {
    pub fn mean_return(&self) -> f64 {
        self.returns.iter().sum::<f64>() / self.returns.len().max(1) as f64
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Rollouts {
    pub buffer: RolloutBuffer,
    pub episodes: Vec<EpisodeRecord>,
}

/// The randomness of episode `episode` under `base_seed`: one ChaCha stream
/// per episode, so results do not depend on which worker ran it.
pub fn episode_rng(base_seed: u64, episode: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(episode as u64);
    rng
}

/// Runs one stochastic episode and records every agent-step.
pub fn run_episode(
    policy: &Policy,
    env: &mut Env,
    episode: usize,
    base_seed: u64,
) -> Result<(RolloutBuffer, EpisodeRecord)> {
    let mut rng = episode_rng(base_seed, episode);
    let n_agents = env.config().num_agents();
    let mut obs = env.reset(rng.next_u64());
    let mut buf = RolloutBuffer::new(n_agents);
    let mut returns = vec![0.0; n_agents];
    let mut metrics = EpisodeMetrics::default();
    loop {
        let mut decisions = Vec::with_capacity(n_agents);
        let mut actions = Vec::with_capacity(n_agents);
        for (nets, o) in policy.agents.iter().zip(&obs) {
            let d = nets.act(&o.features, ActMode::Sample, &mut rng)?;
            actions.push(decode_action(d.flight_raw, &d.alloc, env.config())?);
            decisions.push(d);
        }
        let out = env.step(&actions)?;
        metrics.add(&out.metrics);
        for (n, d) in decisions.into_iter().enumerate() {
            let r = out.rewards[n].extrinsic;
            returns[n] += r;
            buf.agents[n].push(Transition {
                features: std::mem::take(&mut obs[n].features),
                flight_raw: d.flight_raw,
                alloc: d.alloc,
                log_prob_flight: d.log_prob_flight,
                log_prob_alloc: d.log_prob_alloc,
                reward: r,
                value: d.value,
                done: out.done,
            });
        }
        obs = out.observations;
        if out.done {
            break;
        }
    }
    let record = EpisodeRecord {
        episode,
        returns,
        metrics,
        offloads: env.state().offloads.clone(),
    };
    Ok((buf, record))
}

fn partition(episodes: Range<usize>, workers: usize) -> Vec<Range<usize>> {
    let n = episodes.len();
    let base = n / workers;
    let extra = n % workers;
    let mut start = episodes.start;
    (0..workers)
        .map(|w| {
            let len = base + usize::from(w < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Collects `episodes` with `workers` threads sharing a frozen `policy`.
/// Each worker takes a contiguous block of episode indices; results are
/// merged in worker order, which is episode order.
pub fn collect_rollouts(
    policy: &Policy,
    env_cfg: &Arc<EnvConfig>,
    scenario: Option<&Arc<Scenario>>,
    episodes: Range<usize>,
    workers: usize,
    base_seed: u64,
) -> Result<Rollouts> {
    if workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    let blocks = partition(episodes, workers);
    let results: Vec<Result<Rollouts>> = std::thread::scope(|s| {
        let handles: Vec<_> = blocks
            .into_iter()
            .map(|block| {
                s.spawn(move || -> Result<Rollouts> {
                    let mut env = Env::new(env_cfg.clone(), scenario.cloned())?;
                    let mut out = Rollouts {
                        buffer: RolloutBuffer::new(env_cfg.num_agents()),
                        episodes: Vec::with_capacity(block.len()),
                    };
                    for e in block {
                        let (buf, rec) = run_episode(policy, &mut env, e, base_seed)?;
                        out.buffer.append(buf);
                        out.episodes.push(rec);
                    }
                    Ok(out)
                })
            })
            .collect();
        handles
            .into_iter()
            .enumerate()
            .map(|(worker, h)| match h.join() {
                Ok(Ok(r)) => Ok(r),
                Ok(Err(e)) => Err(Error::Worker {
                    worker,
                    message: e.to_string(),
                }),
                Err(panic) => Err(Error::Worker {
                    worker,
                    message: panic
                        .downcast_ref::<&str>()
                        .map(|s| s.to_string())
                        .or_else(|| panic.downcast_ref::<String>().cloned())
                        .unwrap_or_else(|| "worker panicked".into()),
                }),
            })
            .collect()
    });
    let mut merged = Rollouts {
        buffer: RolloutBuffer::new(env_cfg.num_agents()),
        episodes: Vec::new(),
    };
    for r in results {
        let r = r?;
        merged.buffer.append(r.buffer);
        merged.episodes.extend(r.episodes);
    }
    Ok(merged)
}
