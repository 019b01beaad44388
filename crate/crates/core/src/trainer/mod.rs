//! Decentralised training: every UAV owns a flight actor, an allocation
//! actor, a critic and a discriminator, and learns only from its own
//! transitions.

pub mod buffer;
pub mod gae;
pub mod losses;
pub mod metrics;
pub mod policy;
pub mod rollout;
pub mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use buffer::{update_expert_buffer, Admission, ExpertBuffer, RolloutBuffer, Transition};
pub use gae::compute_gae;
pub use losses::DiscriminatorLoss;
pub use policy::{ActMode, AgentNets, Decision, Policy};
pub use rollout::{collect_rollouts, EpisodeRecord, Rollouts};
pub use train::{train, MetricsRow, TrainOutcome, Trainer};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub episodes: usize,
    pub workers: usize,
    pub episodes_per_update: usize,
    pub epochs_per_update: usize,
    pub minibatch: usize,
    pub expert_batch: usize,
    pub clip: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub intrinsic_scale: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub discriminator_lr: f64,
    pub hidden_sizes: Vec<usize>,
    /// Whole episodes kept for imitation.
    pub expert_capacity_episodes: usize,
    pub discriminator_enabled: bool,
    pub discriminator_loss: DiscriminatorLoss,
    /// Discriminator gradient steps per update.
    pub discriminator_steps: usize,
    /// Multiplies the extrinsic reward before it enters advantages and
    /// critic targets; logged returns are never scaled.
    pub reward_scale: f64,
    pub max_grad_norm: f64,
    /// Checkpoint cadence in updates; 0 keeps only the final policy.
    pub checkpoint_every_updates: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 3000,
            workers: 4,
            episodes_per_update: 40,
            epochs_per_update: 10,
            minibatch: 256,
            expert_batch: 256,
            clip: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            intrinsic_scale: 0.1,
            actor_lr: 5e-4,
            critic_lr: 5e-4,
            discriminator_lr: 5e-4,
            hidden_sizes: vec![64, 64],
            expert_capacity_episodes: 20,
            discriminator_enabled: true,
            discriminator_loss: DiscriminatorLoss::Standard,
            discriminator_steps: 5,
            reward_scale: 1e-4,
            max_grad_norm: 0.5,
            checkpoint_every_updates: 25,
        }
    }
}

impl TrainConfig {
    /// The plain clipped-surrogate baseline: no discriminator, no intrinsic
    /// reward.
    pub fn ppo(&self) -> Self {
        Self {
            discriminator_enabled: false,
            intrinsic_scale: 0.0,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("train.{m}")));
        if self.episodes == 0 {
            return bad("episodes must be at least 1");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.episodes_per_update == 0 || self.epochs_per_update == 0 {
            return bad("episodes_per_update and epochs_per_update must be at least 1");
        }
        if self.minibatch == 0 || self.expert_batch == 0 {
            return bad("minibatch and expert_batch must be at least 1");
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return bad("clip must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad("gae_lambda must lie in [0, 1]");
        }
        if !(self.intrinsic_scale >= 0.0 && self.intrinsic_scale.is_finite()) {
            return bad("intrinsic_scale must be finite and >= 0");
        }
        for (name, lr) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("discriminator_lr", self.discriminator_lr),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return bad(&format!("{name} must be positive"));
            }
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return bad("hidden_sizes must be nonempty with positive widths");
        }
        if !(self.reward_scale > 0.0 && self.reward_scale.is_finite()) {
            return bad("reward_scale must be positive");
        }
        if !(self.max_grad_norm > 0.0) {
            return bad("max_grad_norm must be positive");
        }
        Ok(())
    }
}
