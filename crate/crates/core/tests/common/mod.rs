//! Independent reference formulas and finite-difference helpers shared by
//! the integration tests and the acceptance suite.
//!
//! Nothing here calls into the crate's numerics; the references are written
//! in a different algebraic form (dB path loss, rationalised induced-power
//! factor, atan2 elevation) so that a shared mistake is unlikely.

#![allow(dead_code)]

use std::path::PathBuf;

use uavmec::channel::ChannelParams;
use uavmec::world::RotorParams;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs())
}

pub fn ref_propulsion(v: f64, r: &RotorParams) -> f64 {
    let u = v / r.induced_velocity_mps;
    let u2 = u * u;
    // sqrt(1 + u^4/4) - u^2/2, rationalised to avoid cancellation
    let inner = 1.0 / ((1.0 + u2 * u2 / 4.0).sqrt() + u2 / 2.0);
    r.blade_profile_power_w * (1.0 + 3.0 * (v / r.tip_speed_mps).powi(2))
        + r.induced_power_w * inner.sqrt()
        + 0.5
            * r.fuselage_drag_ratio
            * r.air_density_kg_per_m3
            * r.rotor_solidity
            * r.rotor_disc_area_m2
            * v.powi(3)
}

pub fn ref_los(elevation_deg: f64, c1: f64, c2: f64) -> f64 {
    1.0 / (1.0 + (c1.ln() - c2 * elevation_deg + c1 * c2).exp())
}

pub fn ref_gain(horizontal_m: f64, altitude_m: f64, p: &ChannelParams) -> f64 {
    let d = (horizontal_m * horizontal_m + altitude_m * altitude_m).sqrt();
    let theta = altitude_m.atan2(horizontal_m).to_degrees();
    let p_los = ref_los(theta, p.env_c1, p.env_c2);
    let eta = p_los * 10f64.powf(p.los_attenuation_db / 10.0)
        + (1.0 - p_los) * 10f64.powf(p.nlos_attenuation_db / 10.0);
    let fspl_db = 20.0
        * (4.0 * std::f64::consts::PI * p.carrier_frequency_hz / p.speed_of_light_mps).log10()
        + 10.0 * p.path_loss_exponent * d.log10()
        + 10.0 * eta.log10();
    10f64.powf(-fspl_db / 10.0)
}

pub fn ref_rate(gain: f64, p: &ChannelParams) -> f64 {
    let noise_w = 10f64.powf((p.noise_power_dbm - 30.0) / 10.0);
    p.bandwidth_hz * (1.0 + p.transmit_power_w * gain / noise_w).log2()
}

pub fn ref_delay(size_bits: f64, cycles_per_bit: f64, rate_bps: f64, alloc_hz: f64) -> f64 {
    (size_bits * alloc_hz + size_bits * cycles_per_bit * rate_bps) / (rate_bps * alloc_hz)
}

pub fn ref_energy(size_bits: f64, cycles_per_bit: f64, alloc_hz: f64, kappa: f64) -> f64 {
    kappa * size_bits * cycles_per_bit * alloc_hz * alloc_hz
}

/// Central differences of `loss` at `x` compared with `analytic`. Returns
/// the largest relative error; components where both gradients are below
/// `floor` in magnitude are compared on an absolute scale of `floor`.
pub fn fd_max_rel_err(
    x: &mut [f64],
    analytic: &[f64],
    step: f64,
    floor: f64,
    mut loss: impl FnMut(&[f64]) -> f64,
) -> f64 {
    assert_eq!(x.len(), analytic.len());
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + step;
        let up = loss(x);
        x[i] = orig - step;
        let down = loss(x);
        x[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        let denom = analytic[i].abs().max(numeric.abs()).max(floor);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    worst
}

pub fn uavmec_bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_uavmec"))
}

pub mod grad {
    //! Random small instances for end-to-end gradient checks of every loss
    //! the trainer differentiates.

    use rand::Rng;
    use uavmec::nn::dist::{concentrations, dirichlet_log_prob, dirichlet_sample, gaussian_log_prob};
    use uavmec::nn::{HeadKind, MlpParams};
    use uavmec::trainer::losses::{
        critic_loss, dirichlet_surrogate_loss, discriminator_loss, gaussian_surrogate_loss,
        ActorSample, DiscriminatorLoss,
    };

    use super::fd_max_rel_err;

    pub const STEP: f64 = 1e-5;
    /// Central differences at this step carry up to ~2e-9 of absolute noise,
    /// dominated by the last-bit error of log-gamma in the Dirichlet density
    /// divided by the step. Components smaller than this floor are compared
    /// on its absolute scale, so the noise stays below 2e-5 relative.
    pub const FLOOR: f64 = 1e-4;
    const CLIP: f64 = 0.2;
    const BATCH: usize = 6;

    #[derive(Clone, Copy, Debug, Default)]
    pub struct GradErrors {
        pub flight: f64,
        pub alloc: f64,
        pub critic: f64,
        pub disc_standard: f64,
        pub disc_literal: f64,
    }

    impl GradErrors {
        pub fn max(&self) -> f64 {
            [self.flight, self.alloc, self.critic, self.disc_standard, self.disc_literal]
                .into_iter()
                .fold(0.0, f64::max)
        }

        pub fn merge(&mut self, o: &GradErrors) {
            self.flight = self.flight.max(o.flight);
            self.alloc = self.alloc.max(o.alloc);
            self.critic = self.critic.max(o.critic);
            self.disc_standard = self.disc_standard.max(o.disc_standard);
            self.disc_literal = self.disc_literal.max(o.disc_literal);
        }
    }

    fn sizes<R: Rng>(input: usize, output: usize, rng: &mut R) -> Vec<usize> {
        let mut s = vec![input];
        for _ in 0..rng.random_range(1..=2) {
            s.push(rng.random_range(3..=8));
        }
        s.push(output);
        s
    }

    fn features<R: Rng>(dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
        (0..BATCH)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect()
    }

    /// A probability ratio well away from the clip kinks, so that a step of
    /// 1e-5 never crosses one.
    fn ratio<R: Rng>(rng: &mut R) -> f64 {
        match rng.random_range(0..3) {
            0 => rng.random_range(0.5..0.75),
            1 => rng.random_range(0.85..1.15),
            _ => rng.random_range(1.3..2.0),
        }
    }

    fn advantage<R: Rng>(rng: &mut R) -> f64 {
        let a: f64 = rng.random_range(0.2..2.0);
        if rng.random::<bool>() {
            a
        } else {
            -a
        }
    }

    fn check_net<F>(net: &MlpParams, mut loss_and_grad: F) -> f64
    where
        F: FnMut(&MlpParams, &mut [f64]) -> f64,
    {
        let mut grads = vec![0.0; net.data.len()];
        loss_and_grad(net, &mut grads);
        let mut probe = net.clone();
        let mut x = net.data.clone();
        fd_max_rel_err(&mut x, &grads, STEP, FLOOR, |p| {
            probe.data.copy_from_slice(p);
            let mut scratch = vec![0.0; p.len()];
            loss_and_grad(&probe, &mut scratch)
        })
    }

    pub fn random_instance<R: Rng>(rng: &mut R) -> GradErrors {
        let obs = rng.random_range(3..=8);
        let k = rng.random_range(2..=5);
        let xs = features(obs, rng);

        let mut flight = MlpParams::init(sizes(obs, 2, rng), HeadKind::Gaussian, 1.0, rng).unwrap();
        for v in flight.log_std_mut() {
            *v = rng.random_range(-1.0..0.5);
        }
        let mut f_actions = Vec::new();
        let mut f_old = Vec::new();
        for x in &xs {
            let mean = flight.forward_raw(x).unwrap();
            let a: Vec<f64> = mean
                .iter()
                .zip(flight.log_std())
                .map(|(m, s)| m + s.exp() * rng.random_range(-2.0..2.0))
                .collect();
            let lp = gaussian_log_prob(&mean, flight.log_std(), &a);
            f_old.push(lp - ratio(rng).ln());
            f_actions.push(a);
        }
        let f_adv: Vec<f64> = (0..BATCH).map(|_| advantage(rng)).collect();
        let flight_err = check_net(&flight, |net, g| {
            let batch: Vec<ActorSample> = (0..BATCH)
                .map(|i| ActorSample {
                    features: &xs[i],
                    action: &f_actions[i],
                    old_log_prob: f_old[i],
                    advantage: f_adv[i],
                })
                .collect();
            gaussian_surrogate_loss(net, &batch, CLIP, g).unwrap().0
        });

        let alloc = MlpParams::init(sizes(obs, k, rng), HeadKind::Dirichlet, 1.0, rng).unwrap();
        let mut a_actions = Vec::new();
        let mut a_old = Vec::new();
        for x in &xs {
            let alpha = concentrations(&alloc.forward_raw(x).unwrap());
            let a = dirichlet_sample(&alpha, rng);
            let lp = dirichlet_log_prob(&alpha, &a).unwrap();
            a_old.push(lp - ratio(rng).ln());
            a_actions.push(a);
        }
        let a_adv: Vec<f64> = (0..BATCH).map(|_| advantage(rng)).collect();
        let alloc_err = check_net(&alloc, |net, g| {
            let batch: Vec<ActorSample> = (0..BATCH)
                .map(|i| ActorSample {
                    features: &xs[i],
                    action: &a_actions[i],
                    old_log_prob: a_old[i],
                    advantage: a_adv[i],
                })
                .collect();
            dirichlet_surrogate_loss(net, &batch, CLIP, g).unwrap().0
        });

        let critic = MlpParams::init(sizes(obs, 1, rng), HeadKind::Value, 1.0, rng).unwrap();
        let returns: Vec<f64> = (0..BATCH).map(|_| rng.random_range(-3.0..3.0)).collect();
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let critic_err = check_net(&critic, |net, g| critic_loss(net, &refs, &returns, g).unwrap());

        let d_in = obs + 2 + k;
        let disc = MlpParams::init(sizes(d_in, 1, rng), HeadKind::Discriminator, 1.0, rng).unwrap();
        let expert = features(d_in, rng);
        let agent = features(d_in, rng);
        let e: Vec<&[f64]> = expert.iter().map(Vec::as_slice).collect();
        let a: Vec<&[f64]> = agent.iter().map(Vec::as_slice).collect();
        let disc_standard = check_net(&disc, |net, g| {
            discriminator_loss(net, &e, &a, DiscriminatorLoss::Standard, g).unwrap()
        });
        let disc_literal = check_net(&disc, |net, g| {
            discriminator_loss(net, &e, &a, DiscriminatorLoss::Literal, g).unwrap()
        });

        GradErrors {
            flight: flight_err,
            alloc: alloc_err,
            critic: critic_err,
            disc_standard,
            disc_literal,
        }
    }
}
