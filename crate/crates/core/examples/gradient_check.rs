//! Finite-difference check of hand-written backpropagation through every
//! network head the trainer uses.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uavmec::nn::dist::{dirichlet_log_prob_grad, gaussian_log_prob_grad};
use uavmec::nn::{HeadKind, MlpParams, Trace};

/// Scalar test function of each head's raw output, and its gradient.
fn head_loss(net: &MlpParams, x: &[f64], target: &[f64], d_out: &mut [f64], d_tail: &mut [f64]) -> f64 {
    let out = net.forward_raw(x).unwrap();
    match net.head {
        HeadKind::Gaussian => gaussian_log_prob_grad(&out, net.log_std(), target, d_out, d_tail),
        HeadKind::Dirichlet => dirichlet_log_prob_grad(&out, target, d_out).unwrap(),
        HeadKind::Value | HeadKind::Discriminator => {
            let e = out[0] - target[0];
            d_out[0] = e;
            0.5 * e * e
        }
    }
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let cases = [
        (HeadKind::Gaussian, 2, vec![0.3, -0.4]),
        (HeadKind::Dirichlet, 3, vec![0.2, 0.5, 0.3]),
        (HeadKind::Value, 1, vec![1.5]),
        (HeadKind::Discriminator, 1, vec![-0.5]),
    ];
    for (head, out, target) in cases {
        let net = MlpParams::init(vec![6, 8, 8, out], head, 1.0, &mut rng).unwrap();
        let body = net.body_len();
        let mut d_out = vec![0.0; out];
        let mut d_tail = vec![0.0; net.data.len() - body];
        head_loss(&net, &x, &target, &mut d_out, &mut d_tail);
        let mut trace = Trace::default();
        net.forward(&x, &mut trace).unwrap();
        let mut grads = vec![0.0; net.data.len()];
        net.backward(&trace, &d_out, &mut grads);
        for (g, t) in grads[body..].iter_mut().zip(&d_tail) {
            *g += t;
        }

        let h = 1e-5;
        let mut worst = 0.0f64;
        let mut probe = net.clone();
        for i in 0..net.data.len() {
            let mut scratch = (vec![0.0; out], vec![0.0; d_tail.len()]);
            probe.data[i] = net.data[i] + h;
            let up = head_loss(&probe, &x, &target, &mut scratch.0, &mut scratch.1);
            probe.data[i] = net.data[i] - h;
            let down = head_loss(&probe, &x, &target, &mut scratch.0, &mut scratch.1);
            probe.data[i] = net.data[i];
            let fd = (up - down) / (2.0 * h);
            worst = worst.max((fd - grads[i]).abs() / fd.abs().max(grads[i].abs()).max(1e-4));
        }
        println!("{head:?}: {} parameters, max relative error {worst:.2e}", net.data.len());
    }
}
