use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::buffer::{update_expert_buffer, ExpertBuffer, Transition};
use super::gae::{compute_gae, normalize};
use super::losses::{
    critic_loss, dirichlet_surrogate_loss, discriminator_loss, gaussian_surrogate_loss,
    intrinsic_reward, mixed_reward, ActorSample,
};
use super::policy::{AgentNets, Policy};
use super::rollout::{collect_rollouts, EpisodeRecord};
use super::TrainConfig;
use crate::env::{EnvConfig, Scenario};
use crate::error::{Error, Result};
use crate::nn::{clip_grad_norm, Adam};

/// Optimiser state, imitation data and private randomness of one agent.
#[derive(Clone, Debug)]
pub struct AgentLearner {
    pub opt_flight: Adam,
    pub opt_alloc: Adam,
    pub opt_critic: Adam,
    pub opt_disc: Adam,
    pub expert: ExpertBuffer,
    /// Minibatch shuffling for the actor and critic.
    rng: ChaCha8Rng,
    /// Discriminator batch sampling. Kept apart so the discriminator can
    /// never perturb the actor/critic random stream.
    disc_rng: ChaCha8Rng,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AgentUpdateStats {
    pub flight_loss: f64,
    pub alloc_loss: f64,
    pub critic_loss: f64,
    /// `None` when the discriminator did not train this round.
    pub disc_loss: Option<f64>,
    pub intrinsic_mean: f64,
    pub skipped: usize,
    pub clip_fraction: f64,
    /// Largest `|ratio − 1|` in the first minibatch of the first epoch.
    pub first_ratio_error: f64,
    pub expert_episodes: usize,
}

/// One metrics-log line: an episode plus the losses of the update that
/// consumed it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: usize,
    pub update: usize,
    pub returns: Vec<f64>,
    pub mean_return: f64,
    pub fairness_total: f64,
    pub delay_total_s: f64,
    pub energy_total_j: f64,
    pub offload_total: u32,
    pub flight_loss: f64,
    pub alloc_loss: f64,
    pub critic_loss: f64,
    pub disc_loss: Option<f64>,
    pub intrinsic_mean: f64,
    pub skipped_samples: usize,
    pub expert_episodes: usize,
}

impl MetricsRow {
    fn new(rec: &EpisodeRecord, update: usize, stats: &[AgentUpdateStats]) -> Self {
        let n = stats.len().max(1) as f64;
        let mean = |f: fn(&AgentUpdateStats) -> f64| stats.iter().map(f).sum::<f64>() / n;
        let disc: Vec<f64> = stats.iter().filter_map(|s| s.disc_loss).collect();
        Self {
            episode: rec.episode,
            update,
            returns: rec.returns.clone(),
            mean_return: rec.mean_return(),
            fairness_total: rec.metrics.fairness_total,
            delay_total_s: rec.metrics.delay_total_s,
            energy_total_j: rec.metrics.energy_total_j,
            offload_total: rec.metrics.offload_total,
            flight_loss: mean(|s| s.flight_loss),
            alloc_loss: mean(|s| s.alloc_loss),
            critic_loss: mean(|s| s.critic_loss),
            disc_loss: (!disc.is_empty()).then(|| disc.iter().sum::<f64>() / disc.len() as f64),
            intrinsic_mean: mean(|s| s.intrinsic_mean),
            skipped_samples: stats.iter().map(|s| s.skipped).sum(),
            expert_episodes: stats.iter().map(|s| s.expert_episodes).sum(),
        }
    }
}

pub struct Trainer {
    cfg: TrainConfig,
    env_cfg: Arc<EnvConfig>,
    scenario: Option<Arc<Scenario>>,
    policy: Policy,
    learners: Vec<AgentLearner>,
    rollout_seed: u64,
    episodes_done: usize,
    updates_done: usize,
    last_stats: Vec<AgentUpdateStats>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl Trainer {
    pub fn new(
        cfg: TrainConfig,
        env_cfg: Arc<EnvConfig>,
        scenario: Option<Arc<Scenario>>,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        env_cfg.validate()?;
        if let Some(s) = &scenario {
            s.validate(&env_cfg)?;
        }
        let mut init_rng = stream(seed, 0);
        let policy = Policy::init(&env_cfg, &cfg.hidden_sizes, &mut init_rng)?;
        let rollout_seed = init_rng.next_u64();
        let learners = policy
            .agents
            .iter()
            .enumerate()
            .map(|(n, a)| AgentLearner {
                opt_flight: Adam::new(a.flight.data.len(), cfg.actor_lr),
                opt_alloc: Adam::new(a.alloc.data.len(), cfg.actor_lr),
                opt_critic: Adam::new(a.critic.data.len(), cfg.critic_lr),
                opt_disc: Adam::new(a.disc.data.len(), cfg.discriminator_lr),
                expert: ExpertBuffer::new(cfg.expert_capacity_episodes),
                rng: stream(seed, 1 + 2 * n as u64),
                disc_rng: stream(seed, 2 + 2 * n as u64),
            })
            .collect();
        Ok(Self {
            cfg,
            env_cfg,
            scenario,
            policy,
            learners,
            rollout_seed,
            episodes_done: 0,
            updates_done: 0,
            last_stats: Vec::new(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn learners(&self) -> &[AgentLearner] {
        &self.learners
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes_done
    }

    pub fn updates_done(&self) -> usize {
        self.updates_done
    }

    pub fn last_stats(&self) -> &[AgentUpdateStats] {
        &self.last_stats
    }

    pub fn is_finished(&self) -> bool {
        self.episodes_done >= self.cfg.episodes
    }

    /// One iteration: collect, then update every agent from its own data.
    pub fn step(&mut self) -> Result<Vec<MetricsRow>> {
        let start = self.episodes_done;
        let end = (start + self.cfg.episodes_per_update).min(self.cfg.episodes);
        if start >= end {
            return Ok(Vec::new());
        }
        let rollouts = collect_rollouts(
            &self.policy,
            &self.env_cfg,
            self.scenario.as_ref(),
            start..end,
            self.cfg.workers,
            self.rollout_seed,
        )?;
        let update = self.updates_done;
        let cfg = &self.cfg;
        // single updater: agents are visited in index order
        let results: Vec<Result<AgentUpdateStats>> = self
            .policy
            .agents
            .iter_mut()
            .zip(self.learners.iter_mut())
            .zip(&rollouts.buffer.agents)
            .map(|((nets, learner), transitions)| update_agent(nets, learner, transitions, cfg))
            .collect();
        let mut stats = Vec::with_capacity(results.len());
        for (n, r) in results.into_iter().enumerate() {
            let st = r.map_err(|e| Error::NonFinite(format!("agent {n}, update {update}: {e}")))?;
            let losses = [st.flight_loss, st.alloc_loss, st.critic_loss, st.disc_loss.unwrap_or(0.0)];
            if !losses.iter().all(|l| l.is_finite()) || !self.policy.agents[n].is_finite() {
                return Err(Error::NonFinite(format!("agent {n}, update {update}: loss or parameters")));
            }
            stats.push(st);
        }
        self.episodes_done = end;
        self.updates_done += 1;
        let rows = rollouts
            .episodes
            .iter()
            .map(|rec| MetricsRow::new(rec, update, &stats))
            .collect();
        self.last_stats = stats;
        Ok(rows)
    }

    /// Runs to completion, calling `on_update` after every iteration.
    pub fn run(&mut self, mut on_update: impl FnMut(&Trainer, &[MetricsRow]) -> Result<()>) -> Result<()> {
        while !self.is_finished() {
            let rows = self.step()?;
            on_update(self, &rows)?;
        }
        Ok(())
    }
}

fn apply(opt: &mut Adam, params: &mut [f64], grads: &mut [f64], max_norm: f64) {
    clip_grad_norm(grads, max_norm);
    opt.step(params, grads);
}

/// The per-agent update: discriminator, rewards, advantages, then epochs
/// of minibatch actor/critic steps, then expert-buffer maintenance.
fn update_agent(
    nets: &mut AgentNets,
    learner: &mut AgentLearner,
    transitions: &[Transition],
    cfg: &TrainConfig,
) -> Result<AgentUpdateStats> {
    let mut stats = AgentUpdateStats::default();
    let n = transitions.len();
    if n == 0 {
        return Ok(stats);
    }
    let disc_inputs: Vec<Vec<f64>> = if cfg.discriminator_enabled {
        transitions.iter().map(Transition::disc_input).collect()
    } else {
        Vec::new()
    };

    let mut disc_trained = false;
    if cfg.discriminator_enabled && !learner.expert.is_empty() {
        let mut grads = vec![0.0; nets.disc.data.len()];
        let n_expert = learner.expert.num_tuples();
        let mut total = 0.0;
        for _ in 0..cfg.discriminator_steps {
            let agent: Vec<&[f64]> = (0..cfg.minibatch)
                .map(|_| disc_inputs[learner.disc_rng.random_range(0..n)].as_slice())
                .collect();
            let expert: Vec<&[f64]> = (0..cfg.expert_batch)
                .map(|_| learner.expert.tuple(learner.disc_rng.random_range(0..n_expert)))
                .collect();
            grads.fill(0.0);
            total += discriminator_loss(&nets.disc, &expert, &agent, cfg.discriminator_loss, &mut grads)?;
            apply(&mut learner.opt_disc, &mut nets.disc.data, &mut grads, cfg.max_grad_norm);
        }
        if cfg.discriminator_steps > 0 {
            disc_trained = true;
            stats.disc_loss = Some(total / cfg.discriminator_steps as f64);
        }
    }

    let use_intrinsic = disc_trained && cfg.intrinsic_scale > 0.0;
    let mut rewards = Vec::with_capacity(n);
    let mut intrinsic_total = 0.0;
    for (i, t) in transitions.iter().enumerate() {
        let ext = cfg.reward_scale * t.reward;
        if use_intrinsic {
            let ri = intrinsic_reward(&nets.disc, &disc_inputs[i])?;
            intrinsic_total += ri;
            rewards.push(mixed_reward(ext, ri, cfg.intrinsic_scale));
        } else {
            rewards.push(ext);
        }
    }
    stats.intrinsic_mean = intrinsic_total / n as f64;

    let values: Vec<f64> = transitions.iter().map(|t| t.value).collect();
    let done: Vec<bool> = transitions.iter().map(|t| t.done).collect();
    let (mut adv, returns) = compute_gae(&rewards, &values, &done, cfg.gamma, cfg.gae_lambda);
    normalize(&mut adv);

    let mut g_flight = vec![0.0; nets.flight.data.len()];
    let mut g_alloc = vec![0.0; nets.alloc.data.len()];
    let mut g_critic = vec![0.0; nets.critic.data.len()];
    let mut order: Vec<usize> = (0..n).collect();
    let mut batches = 0usize;
    let mut clip_total = 0.0;
    for epoch in 0..cfg.epochs_per_update {
        order.shuffle(&mut learner.rng);
        for (b, chunk) in order.chunks(cfg.minibatch).enumerate() {
            let flight: Vec<ActorSample> = chunk
                .iter()
                .map(|&i| ActorSample {
                    features: &transitions[i].features,
                    action: &transitions[i].flight_raw,
                    old_log_prob: transitions[i].log_prob_flight,
                    advantage: adv[i],
                })
                .collect();
            g_flight.fill(0.0);
            let (lf, sf) = gaussian_surrogate_loss(&nets.flight, &flight, cfg.clip, &mut g_flight)?;
            apply(&mut learner.opt_flight, &mut nets.flight.data, &mut g_flight, cfg.max_grad_norm);

            let alloc: Vec<ActorSample> = chunk
                .iter()
                .map(|&i| ActorSample {
                    features: &transitions[i].features,
                    action: &transitions[i].alloc,
                    old_log_prob: transitions[i].log_prob_alloc,
                    advantage: adv[i],
                })
                .collect();
            g_alloc.fill(0.0);
            let (la, sa) = dirichlet_surrogate_loss(&nets.alloc, &alloc, cfg.clip, &mut g_alloc)?;
            apply(&mut learner.opt_alloc, &mut nets.alloc.data, &mut g_alloc, cfg.max_grad_norm);

            let xs: Vec<&[f64]> = chunk.iter().map(|&i| transitions[i].features.as_slice()).collect();
            let rs: Vec<f64> = chunk.iter().map(|&i| returns[i]).collect();
            g_critic.fill(0.0);
            let lc = critic_loss(&nets.critic, &xs, &rs, &mut g_critic)?;
            apply(&mut learner.opt_critic, &mut nets.critic.data, &mut g_critic, cfg.max_grad_norm);

            if epoch == 0 && b == 0 {
                stats.first_ratio_error = sf.max_ratio_error.max(sa.max_ratio_error);
            }
            stats.flight_loss += lf;
            stats.alloc_loss += la;
            stats.critic_loss += lc;
            stats.skipped += sf.skipped + sa.skipped;
            clip_total += 0.5 * (sf.clip_fraction + sa.clip_fraction);
            batches += 1;
        }
    }
    let inv = 1.0 / batches.max(1) as f64;
    stats.flight_loss *= inv;
    stats.alloc_loss *= inv;
    stats.critic_loss *= inv;
    stats.clip_fraction = clip_total * inv;

    if cfg.discriminator_enabled {
        let mut start = 0;
        for (i, t) in transitions.iter().enumerate() {
            if t.done || i + 1 == n {
                let ret: f64 = transitions[start..=i].iter().map(|t| t.reward).sum();
                let tuples = disc_inputs[start..=i].to_vec();
                update_expert_buffer(&mut learner.expert, tuples, ret);
                start = i + 1;
            }
        }
    }
    stats.expert_episodes = learner.expert.episodes.len();
    Ok(stats)
}

/// Result of a full training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub policy: Policy,
    pub log: Vec<MetricsRow>,
}

pub fn train(
    cfg: &TrainConfig,
    env_cfg: Arc<EnvConfig>,
    scenario: Option<Arc<Scenario>>,
    seed: u64,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(cfg.clone(), env_cfg, scenario, seed)?;
    let mut log = Vec::new();
    trainer.run(|_, rows| {
        log.extend_from_slice(rows);
        Ok(())
    })?;
    Ok(TrainOutcome {
        policy: trainer.policy,
        log,
    })
}
