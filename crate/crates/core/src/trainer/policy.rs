use std::path::Path;

use rand::Rng;

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::nn::checkpoint;
use crate::nn::dist::{
    concentrations, dirichlet_log_prob, dirichlet_mean, dirichlet_sample, gaussian_log_prob,
    gaussian_sample,
};
use crate::nn::{HeadKind, MlpParams};

/// Output-layer gain for freshly initialised policy heads; keeps the
/// initial policy close to uniform.
const POLICY_OUTPUT_GAIN: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActMode {
    Sample,
    /// Gaussian mean and Dirichlet mean.
    Mean,
}

/// What one agent's networks produce for one observation.
#[derive(Clone, Debug, PartialEq)]
pub struct Decision {
    pub flight_raw: [f64; 2],
    pub alloc: Vec<f64>,
    pub log_prob_flight: f64,
    pub log_prob_alloc: f64,
    pub value: f64,
}

/// The four networks owned by one UAV.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentNets {
    pub flight: MlpParams,
    pub alloc: MlpParams,
    pub critic: MlpParams,
    pub disc: MlpParams,
}

fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend_from_slice(hidden);
    s.push(output);
    s
}

impl AgentNets {
    pub fn init<R: Rng + ?Sized>(
        obs_dim: usize,
        alloc_dim: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            flight: MlpParams::init(sizes(obs_dim, hidden, 2), HeadKind::Gaussian, POLICY_OUTPUT_GAIN, rng)?,
            alloc: MlpParams::init(
                sizes(obs_dim, hidden, alloc_dim),
                HeadKind::Dirichlet,
                POLICY_OUTPUT_GAIN,
                rng,
            )?,
            critic: MlpParams::init(sizes(obs_dim, hidden, 1), HeadKind::Value, 1.0, rng)?,
            disc: MlpParams::init(
                sizes(obs_dim + 2 + alloc_dim, hidden, 1),
                HeadKind::Discriminator,
                1.0,
                rng,
            )?,
        })
    }

    pub fn act<R: Rng + ?Sized>(&self, features: &[f64], mode: ActMode, rng: &mut R) -> Result<Decision> {
        let mean = self.flight.forward_raw(features)?;
        let log_std = self.flight.log_std();
        let alpha = concentrations(&self.alloc.forward_raw(features)?);
        let (raw, alloc) = match mode {
            ActMode::Sample => {
                let raw = gaussian_sample(&mean, log_std, rng);
                (raw, dirichlet_sample(&alpha, rng))
            }
            ActMode::Mean => (mean.clone(), dirichlet_mean(&alpha)),
        };
        let flight_raw = [raw[0], raw[1]];
        let log_prob_flight = gaussian_log_prob(&mean, log_std, &flight_raw);
        let log_prob_alloc = dirichlet_log_prob(&alpha, &alloc)?;
        let value = self.critic.forward_raw(features)?[0];
        Ok(Decision {
            flight_raw,
            alloc,
            log_prob_flight,
            log_prob_alloc,
            value,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.flight.is_finite() && self.alloc.is_finite() && self.critic.is_finite() && self.disc.is_finite()
    }

    fn parts(&self) -> [(&'static str, &MlpParams); 4] {
        [
            ("flight", &self.flight),
            ("alloc", &self.alloc),
            ("critic", &self.critic),
            ("disc", &self.disc),
        ]
    }
}

/// Snapshot of every agent's networks. Rollout workers only read it.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    pub agents: Vec<AgentNets>,
}

impl Policy {
    pub fn init<R: Rng + ?Sized>(env: &EnvConfig, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let agents = (0..env.num_agents())
            .map(|_| AgentNets::init(env.obs_dim(), env.alloc_dim(), hidden, rng))
            .collect::<Result<_>>()?;
        Ok(Self { agents })
    }

    /// Rejects a policy whose shapes disagree with `env`.
    pub fn check_dims(&self, env: &EnvConfig) -> Result<()> {
        if self.agents.len() != env.num_agents() {
            return Err(Error::Checkpoint(format!(
                "policy has {} agents, config has {}",
                self.agents.len(),
                env.num_agents()
            )));
        }
        let obs = env.obs_dim();
        let k = env.alloc_dim();
        for (n, a) in self.agents.iter().enumerate() {
            let ok = a.flight.head == HeadKind::Gaussian
                && a.alloc.head == HeadKind::Dirichlet
                && a.critic.head == HeadKind::Value
                && a.disc.head == HeadKind::Discriminator
                && a.flight.input_dim() == obs
                && a.flight.output_dim() == 2
                && a.alloc.input_dim() == obs
                && a.alloc.output_dim() == k
                && a.critic.input_dim() == obs
                && a.disc.input_dim() == obs + 2 + k;
            if !ok {
                return Err(Error::Checkpoint(format!(
                    "agent {n}: network shapes do not match observation dim {obs} / allocation dim {k}"
                )));
            }
        }
        Ok(())
    }

    /// Writes `agent{n}_{flight,alloc,critic,disc}.umnn` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (n, a) in self.agents.iter().enumerate() {
            for (name, p) in a.parts() {
                checkpoint::save(p, dir.join(format!("agent{n}_{name}.umnn")))?;
            }
        }
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>, num_agents: usize) -> Result<Self> {
        let dir = dir.as_ref();
        let agents = (0..num_agents)
            .map(|n| {
                let f = |name: &str| checkpoint::load(dir.join(format!("agent{n}_{name}.umnn")));
                Ok(AgentNets {
                    flight: f("flight")?,
                    alloc: f("alloc")?,
                    critic: f("critic")?,
                    disc: f("disc")?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { agents })
    }
}
