//! Scalar losses with gradients. Every `*_loss` function returns the value
//! being minimised and accumulates `∂loss/∂params` into `grads`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::dist::{
    dirichlet_log_prob_grad, gaussian_log_prob_grad, log_sigmoid, sigmoid, softplus,
};
use crate::nn::{MlpParams, Trace};

/// `min(ratio·A, clip(ratio, 1−ε, 1+ε)·A)`.
pub fn clipped_objective(ratio: f64, advantage: f64, clip: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
    (ratio * advantage).min(clipped * advantage)
}

/// Derivative of [`clipped_objective`] with respect to the new log-prob.
/// Zero when the clipped branch is the active minimum.
pub fn clipped_objective_dlogp(ratio: f64, advantage: f64, clip: f64) -> f64 {
    let outside = (advantage > 0.0 && ratio > 1.0 + clip) || (advantage < 0.0 && ratio < 1.0 - clip);
    if outside {
        0.0
    } else {
        ratio * advantage
    }
}

/// One actor training sample. `action` is the raw Gaussian draw for the
/// flight head and the simplex point for the allocation head.
#[derive(Clone, Copy, Debug)]
pub struct ActorSample<'a> {
    pub features: &'a [f64],
    pub action: &'a [f64],
    pub old_log_prob: f64,
    pub advantage: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SurrogateStats {
    /// Mean clipped objective over the samples that were used.
    pub objective: f64,
    /// Samples dropped for a non-finite ratio.
    pub skipped: usize,
    pub clip_fraction: f64,
    pub max_ratio_error: f64,
}

fn surrogate_loss<F>(
    net: &MlpParams,
    batch: &[ActorSample<'_>],
    clip: f64,
    grads: &mut [f64],
    mut log_prob: F,
) -> Result<(f64, SurrogateStats)>
where
    // (raw output, sample, d_out, d_tail) -> log-prob
    F: FnMut(&[f64], &ActorSample<'_>, &mut [f64], &mut [f64]) -> Result<f64>,
{
    let mut local = vec![0.0; net.data.len()];
    let body = net.body_len();
    let mut trace = Trace::default();
    let out_dim = net.output_dim();
    let mut d_out = vec![0.0; out_dim];
    let mut d_tail = vec![0.0; net.data.len() - body];
    let mut stats = SurrogateStats::default();
    let mut used = 0usize;
    let mut clipped = 0usize;
    let mut total = 0.0;
    for s in batch {
        net.forward(s.features, &mut trace)?;
        let lp = log_prob(trace.output(), s, &mut d_out, &mut d_tail)?;
        let ratio = (lp - s.old_log_prob).exp();
        if !ratio.is_finite() || !s.advantage.is_finite() {
            stats.skipped += 1;
            continue;
        }
        used += 1;
        stats.max_ratio_error = stats.max_ratio_error.max((ratio - 1.0).abs());
        if (ratio - 1.0).abs() > clip {
            clipped += 1;
        }
        total += clipped_objective(ratio, s.advantage, clip);
        let g = clipped_objective_dlogp(ratio, s.advantage, clip);
        if g == 0.0 {
            continue;
        }
        // loss is the negated objective
        for d in d_out.iter_mut() {
            *d *= -g;
        }
        net.backward(&trace, &d_out, &mut local);
        for (acc, d) in local[body..].iter_mut().zip(&d_tail) {
            *acc -= g * d;
        }
    }
    if used == 0 {
        return Ok((0.0, stats));
    }
    let inv = 1.0 / used as f64;
    for (g, l) in grads.iter_mut().zip(&local) {
        *g += l * inv;
    }
    stats.objective = total * inv;
    stats.clip_fraction = clipped as f64 * inv;
    Ok((-stats.objective, stats))
}

/// Negated clipped surrogate for the Gaussian flight head.
pub fn gaussian_surrogate_loss(
    net: &MlpParams,
    batch: &[ActorSample<'_>],
    clip: f64,
    grads: &mut [f64],
) -> Result<(f64, SurrogateStats)> {
    let log_std = net.log_std().to_vec();
    surrogate_loss(net, batch, clip, grads, |mean, s, d_out, d_tail| {
        Ok(gaussian_log_prob_grad(mean, &log_std, s.action, d_out, d_tail))
    })
}

/// Negated clipped surrogate for the Dirichlet allocation head.
pub fn dirichlet_surrogate_loss(
    net: &MlpParams,
    batch: &[ActorSample<'_>],
    clip: f64,
    grads: &mut [f64],
) -> Result<(f64, SurrogateStats)> {
    surrogate_loss(net, batch, clip, grads, |logits, s, d_out, _| {
        dirichlet_log_prob_grad(logits, s.action, d_out)
    })
}

/// `(1/2B)·Σ(V(o) − R)²`.
pub fn critic_loss(
    net: &MlpParams,
    features: &[&[f64]],
    returns: &[f64],
    grads: &mut [f64],
) -> Result<f64> {
    if features.len() != returns.len() {
        return Err(Error::Shape("critic batch misaligned".into()));
    }
    if features.is_empty() {
        return Ok(0.0);
    }
    let inv = 1.0 / features.len() as f64;
    let mut trace = Trace::default();
    let mut loss = 0.0;
    for (x, r) in features.iter().zip(returns) {
        net.forward(x, &mut trace)?;
        let err = trace.output()[0] - r;
        loss += 0.5 * err * err * inv;
        net.backward(&trace, &[err * inv], grads);
    }
    Ok(loss)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscriminatorLoss {
    /// `−mean log D(expert) − mean log(1 − D(agent))`.
    #[default]
    Standard,
    /// `−mean log D(agent) − mean (1 − log D(expert))`, the label-swapped
    /// variant. Offered for comparison only; it rewards looking unlike the
    /// expert.
    Literal,
}

pub fn discriminator_loss(
    net: &MlpParams,
    expert: &[&[f64]],
    agent: &[&[f64]],
    kind: DiscriminatorLoss,
    grads: &mut [f64],
) -> Result<f64> {
    if expert.is_empty() || agent.is_empty() {
        return Err(Error::Shape("discriminator needs nonempty batches".into()));
    }
    let mut trace = Trace::default();
    let mut loss = 0.0;
    let inv_e = 1.0 / expert.len() as f64;
    for x in expert {
        net.forward(x, &mut trace)?;
        let z = trace.output()[0];
        let (l, dz) = match kind {
            // −log σ(z) = softplus(−z)
            DiscriminatorLoss::Standard => (softplus(-z), sigmoid(z) - 1.0),
            // −(1 − log σ(z))
            DiscriminatorLoss::Literal => (log_sigmoid(z) - 1.0, 1.0 - sigmoid(z)),
        };
        loss += l * inv_e;
        net.backward(&trace, &[dz * inv_e], grads);
    }
    let inv_a = 1.0 / agent.len() as f64;
    for x in agent {
        net.forward(x, &mut trace)?;
        let z = trace.output()[0];
        let (l, dz) = match kind {
            // −log(1 − σ(z)) = softplus(z)
            DiscriminatorLoss::Standard => (softplus(z), sigmoid(z)),
            DiscriminatorLoss::Literal => (softplus(-z), sigmoid(z) - 1.0),
        };
        loss += l * inv_a;
        net.backward(&trace, &[dz * inv_a], grads);
    }
    Ok(loss)
}

/// `log D(o, a₁, a₂)`, computed from the logit so it stays finite.
pub fn intrinsic_reward(disc: &MlpParams, disc_input: &[f64]) -> Result<f64> {
    let z = disc.forward_raw(disc_input)?;
    Ok(log_sigmoid(z[0]))
}

pub fn mixed_reward(extrinsic: f64, intrinsic: f64, alpha: f64) -> f64 {
    extrinsic + alpha * intrinsic
}
