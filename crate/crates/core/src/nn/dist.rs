//! Diagonal Gaussian and Dirichlet action distributions, with the partial
//! derivatives the trainer needs.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};

pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Entries below this are lifted before normalisation so log-densities stay
/// finite.
pub const SIMPLEX_FLOOR: f64 = 1e-12;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z + (-z).exp()
    } else {
        z.exp().ln_1p()
    }
}

/// `log σ(z)`, finite for every finite `z`.
pub fn log_sigmoid(z: f64) -> f64 {
    -softplus(-z)
}

pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], x: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(x)
        .map(|((m, ls), v)| {
            let z = (v - m) * (-ls).exp();
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

/// Log-density plus `∂/∂mean` and `∂/∂log_std`, written (not accumulated)
/// into the output slices.
pub fn gaussian_log_prob_grad(
    mean: &[f64],
    log_std: &[f64],
    x: &[f64],
    d_mean: &mut [f64],
    d_log_std: &mut [f64],
) -> f64 {
    let mut lp = 0.0;
    for i in 0..mean.len() {
        let inv_var = (-2.0 * log_std[i]).exp();
        let diff = x[i] - mean[i];
        lp += -0.5 * diff * diff * inv_var - log_std[i] - HALF_LN_2PI;
        d_mean[i] = diff * inv_var;
        d_log_std[i] = diff * diff * inv_var - 1.0;
    }
    lp
}

pub fn gaussian_sample<R: Rng + ?Sized>(mean: &[f64], log_std: &[f64], rng: &mut R) -> Vec<f64> {
    mean.iter()
        .zip(log_std)
        .map(|(m, ls)| {
            let e: f64 = StandardNormal.sample(rng);
            m + ls.exp() * e
        })
        .collect()
}

pub fn concentrations(logits: &[f64]) -> Vec<f64> {
    logits.iter().map(|&z| softplus(z) + 1.0).collect()
}

fn check_simplex(x: &[f64]) -> Result<()> {
    let sum: f64 = x.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || x.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::OffSimplex { sum });
    }
    Ok(())
}

pub fn dirichlet_log_prob(alpha: &[f64], x: &[f64]) -> Result<f64> {
    check_simplex(x)?;
    let a0: f64 = alpha.iter().sum();
    let mut lp = ln_gamma(a0);
    for (a, v) in alpha.iter().zip(x) {
        lp += (a - 1.0) * v.ln() - ln_gamma(*a);
    }
    Ok(lp)
}

/// Log-density of `Dir(softplus(logits) + 1)` at `x` and its gradient with
/// respect to the logits.
pub fn dirichlet_log_prob_grad(logits: &[f64], x: &[f64], d_logits: &mut [f64]) -> Result<f64> {
    let alpha = concentrations(logits);
    let lp = dirichlet_log_prob(&alpha, x)?;
    let psi0 = digamma(alpha.iter().sum());
    for i in 0..alpha.len() {
        d_logits[i] = (psi0 - digamma(alpha[i]) + x[i].ln()) * sigmoid(logits[i]);
    }
    Ok(lp)
}

pub fn dirichlet_mean(alpha: &[f64]) -> Vec<f64> {
    let a0: f64 = alpha.iter().sum();
    alpha.iter().map(|a| a / a0).collect()
}

pub fn dirichlet_sample<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = alpha
        .iter()
        .map(|&a| {
            let g = Gamma::new(a, 1.0).expect("concentration > 0");
            g.sample(rng)
        })
        .collect();
    project_to_simplex(draws)
}

/// Normalises positive weights onto the open simplex, lifting entries that
/// would otherwise sit at exactly zero.
pub fn project_to_simplex(mut w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v = (*v / total).max(SIMPLEX_FLOOR);
    }
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}
