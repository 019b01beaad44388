//! Multi-UAV mobile edge computing simulator with an embedded trainer that
//! combines clipped-surrogate policy optimization with an adversarial
//! imitation discriminator and a Gaussian/Dirichlet dual-head actor.
//!
//! The crate is organised bottom-up:
//!
//! - [`world`]: geometry, kinematics, propulsion power, tasks, association
//! - [`channel`]: probabilistic line-of-sight air-to-ground link
//! - [`compute`]: offloading delay, computation energy, fairness accounting
//! - [`env`]: the per-slot Markov game
//! - [`nn`]: small MLPs with hand-derived gradients and Adam
//! - [`trainer`]: rollout collection, advantages, actor/critic/discriminator updates
//! - [`baselines`]: random and greedy policies, brute-force single-step oracle
//! - [`experiment`]: config files, run directories, train / eval / oracle-check
//!
//! Runnable walkthroughs live in `examples/`.

pub mod baselines;
pub mod channel;
pub mod compute;
pub mod env;
pub mod error;
pub mod experiment;
pub mod nn;
pub mod trainer;
pub mod world;

pub use error::{Error, Result};
