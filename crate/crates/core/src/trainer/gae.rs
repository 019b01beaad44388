/// Generalized advantage estimation over a flat sequence that may contain
/// several episodes; `done[t]` marks the last step of an episode, after
/// which nothing is bootstrapped.
///
/// Returns raw (unnormalised) advantages and the critic targets
/// `advantage + value`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    done: &[bool],
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    debug_assert!(values.len() == n && done.len() == n);
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let (next_value, carry) = if done[t] || t + 1 == n {
            (0.0, 0.0)
        } else {
            (values[t + 1], running)
        };
        let delta = rewards[t] + gamma * next_value - values[t];
        running = delta + gamma * lambda * carry;
        adv[t] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Shifts and scales to zero mean and unit variance in place.
pub fn normalize(xs: &mut [f64]) {
    if xs.len() < 2 {
        return;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for x in xs.iter_mut() {
        *x = (*x - mean) / std;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// A_t = Σ_l (γλ)^l δ_{t+l} within the episode, by direct double loop.
    fn brute_force(r: &[f64], v: &[f64], done: &[bool], g: f64, l: f64) -> Vec<f64> {
        let n = r.len();
        let mut out = vec![0.0; n];
        for t in 0..n {
            let mut acc = 0.0;
            let mut w = 1.0;
            let mut k = t;
            loop {
                let terminal = done[k] || k + 1 == n;
                let next = if terminal { 0.0 } else { v[k + 1] };
                acc += w * (r[k] + g * next - v[k]);
                if terminal {
                    break;
                }
                w *= g * l;
                k += 1;
            }
            out[t] = acc;
        }
        out
    }

    #[test]
    fn single_step() {
        let (a, ret) = compute_gae(&[1.0], &[0.0], &[true], 1.0, 1.0);
        assert_eq!((a, ret), (vec![1.0], vec![1.0]));
    }

    #[test]
    fn exact_values_give_zero_advantage() {
        let r = [1.0, -2.0, 0.5, 3.0];
        let g = 0.9;
        let mut v = [0.0; 4];
        let mut acc = 0.0;
        for t in (0..4).rev() {
            acc = r[t] + g * acc;
            v[t] = acc;
        }
        let (a, ret) = compute_gae(&r, &v, &[false, false, false, true], g, 0.95);
        assert!(a.iter().all(|x| x.abs() < 1e-12));
        for (x, y) in ret.iter().zip(&v) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_nested_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let r: Vec<f64> = (0..60).map(|_| rng.random_range(-5.0..5.0)).collect();
        let v: Vec<f64> = (0..60).map(|_| rng.random_range(-5.0..5.0)).collect();
        let done: Vec<bool> = (0..60).map(|t| t % 30 == 29).collect();
        let (a, _) = compute_gae(&r, &v, &done, 0.99, 0.95);
        let b = brute_force(&r, &v, &done, 0.99, 0.95);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization() {
        let mut xs = vec![1.0, 2.0, 3.0, 4.0];
        normalize(&mut xs);
        let mean: f64 = xs.iter().sum::<f64>() / 4.0;
        let var: f64 = xs.iter().map(|x| x * x).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-15 && (var - 1.0).abs() < 1e-12);
    }
}
