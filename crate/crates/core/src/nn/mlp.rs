use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dist::{sigmoid, softplus};
use crate::error::{Error, Result};

/// What the final linear layer feeds into.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// Outputs are Gaussian means; a state-independent log-std vector is
    /// stored after the layer parameters.
    Gaussian,
    /// Outputs are logits; concentrations are `softplus(logit) + 1`.
    Dirichlet,
    Value,
    /// Single logit squashed by a sigmoid.
    Discriminator,
}

impl HeadKind {
    pub fn tag(self) -> u8 {
        match self {
            HeadKind::Gaussian => 0,
            HeadKind::Dirichlet => 1,
            HeadKind::Value => 2,
            HeadKind::Discriminator => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => HeadKind::Gaussian,
            1 => HeadKind::Dirichlet,
            2 => HeadKind::Value,
            3 => HeadKind::Discriminator,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum HeadOutput {
    Gaussian { mean: Vec<f64>, log_std: Vec<f64> },
    Dirichlet { concentration: Vec<f64> },
    Value(f64),
    Discriminator(f64),
}

/// A tanh MLP whose parameters live in one flat vector.
///
/// Layer `l` stores its `out × in` weights row-major followed by its `out`
/// biases. Gaussian heads append `out` log-std entries at the very end.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub sizes: Vec<usize>,
    pub head: HeadKind,
    pub data: Vec<f64>,
}

/// Activations recorded by a forward pass; `acts[0]` is the input and the
/// last entry the raw (pre-head) output.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

pub const INIT_LOG_STD: f64 = -std::f64::consts::LN_2;

fn body_len(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl MlpParams {
    pub fn zeros(sizes: Vec<usize>, head: HeadKind) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::Shape(format!("invalid layer sizes {sizes:?}")));
        }
        if matches!(head, HeadKind::Value | HeadKind::Discriminator) && *sizes.last().unwrap() != 1 {
            return Err(Error::Shape(format!("{head:?} head needs a single output")));
        }
        let extra = if head == HeadKind::Gaussian { *sizes.last().unwrap() } else { 0 };
        let len = body_len(&sizes) + extra;
        Ok(Self {
            sizes,
            head,
            data: vec![0.0; len],
        })
    }

    /// Glorot-uniform hidden layers, zero biases, output layer shrunk by
    /// `output_gain`.
    pub fn init<R: Rng + ?Sized>(
        sizes: Vec<usize>,
        head: HeadKind,
        output_gain: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut p = Self::zeros(sizes, head)?;
        let n_layers = p.num_layers();
        let mut off = 0;
        for l in 0..n_layers {
            let (i, o) = (p.sizes[l], p.sizes[l + 1]);
            let limit = (6.0 / (i + o) as f64).sqrt();
            let gain = if l + 1 == n_layers { output_gain } else { 1.0 };
            for w in &mut p.data[off..off + i * o] {
                *w = gain * limit * (2.0 * rng.random::<f64>() - 1.0);
            }
            off += i * o + o;
        }
        if head == HeadKind::Gaussian {
            for v in p.log_std_mut() {
                *v = INIT_LOG_STD;
            }
        }
        Ok(p)
    }

    pub fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn body_len(&self) -> usize {
        body_len(&self.sizes)
    }

    pub fn log_std(&self) -> &[f64] {
        &self.data[self.body_len()..]
    }

    pub fn log_std_mut(&mut self) -> &mut [f64] {
        let b = self.body_len();
        &mut self.data[b..]
    }

    pub fn forward(&self, input: &[f64], trace: &mut Trace) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} entries, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        let n_layers = self.num_layers();
        trace.acts.resize_with(n_layers + 1, Vec::new);
        trace.acts[0].clear();
        trace.acts[0].extend_from_slice(input);
        let mut off = 0;
        for l in 0..n_layers {
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.data[off..off + i * o];
            let b = &self.data[off + i * o..off + i * o + o];
            let (prev, next) = trace.acts.split_at_mut(l + 1);
            let x = &prev[l];
            let y = &mut next[0];
            y.clear();
            for r in 0..o {
                let row = &w[r * i..(r + 1) * i];
                let z = b[r] + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>();
                y.push(if l + 1 < n_layers { z.tanh() } else { z });
            }
            off += i * o + o;
        }
        Ok(())
    }

    pub fn forward_raw(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut t = Trace::default();
        self.forward(input, &mut t)?;
        Ok(t.acts.pop().unwrap_or_default())
    }

    pub fn head_forward(&self, input: &[f64]) -> Result<HeadOutput> {
        let out = self.forward_raw(input)?;
        Ok(match self.head {
            HeadKind::Gaussian => HeadOutput::Gaussian {
                mean: out,
                log_std: self.log_std().to_vec(),
            },
            HeadKind::Dirichlet => HeadOutput::Dirichlet {
                concentration: out.iter().map(|&z| softplus(z) + 1.0).collect(),
            },
            HeadKind::Value => HeadOutput::Value(out[0]),
            HeadKind::Discriminator => HeadOutput::Discriminator(sigmoid(out[0])),
        })
    }

    /// Back-propagates `d_out` (gradient w.r.t. the raw output recorded in
    /// `trace`) and accumulates into `grads`, which has `data`'s layout.
    pub fn backward(&self, trace: &Trace, d_out: &[f64], grads: &mut [f64]) {
        debug_assert_eq!(grads.len(), self.data.len());
        let n_layers = self.num_layers();
        let mut delta: Vec<f64> = d_out.to_vec();
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in 0..n_layers {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        for l in (0..n_layers).rev() {
            let (i, o) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            if l + 1 < n_layers {
                // through tanh: y = tanh(z), dy/dz = 1 - y²
                for (d, y) in delta.iter_mut().zip(&trace.acts[l + 1]) {
                    *d *= 1.0 - y * y;
                }
            }
            let x = &trace.acts[l];
            let (gw, gb) = grads[off..off + i * o + o].split_at_mut(i * o);
            for r in 0..o {
                let d = delta[r];
                gb[r] += d;
                if d != 0.0 {
                    for (g, xv) in gw[r * i..(r + 1) * i].iter_mut().zip(x) {
                        *g += d * xv;
                    }
                }
            }
            if l > 0 {
                let w = &self.data[off..off + i * o];
                let mut prev = vec![0.0; i];
                for r in 0..o {
                    let d = delta[r];
                    if d != 0.0 {
                        for (p, wv) in prev.iter_mut().zip(&w[r * i..(r + 1) * i]) {
                            *p += d * wv;
                        }
                    }
                }
                delta = prev;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Straightforward nested-vector forward pass, coded independently of
    /// the flat layout walker above.
    fn reference_forward(p: &MlpParams, x: &[f64]) -> Vec<f64> {
        let mut layers: Vec<(Vec<Vec<f64>>, Vec<f64>)> = Vec::new();
        let mut cursor = p.data.iter().copied();
        for w in p.sizes.windows(2) {
            let weights: Vec<Vec<f64>> = (0..w[1])
                .map(|_| (0..w[0]).map(|_| cursor.next().unwrap()).collect())
                .collect();
            let bias: Vec<f64> = (0..w[1]).map(|_| cursor.next().unwrap()).collect();
            layers.push((weights, bias));
        }
        let mut h = x.to_vec();
        let last = layers.len() - 1;
        for (l, (w, b)) in layers.iter().enumerate() {
            let mut z = vec![0.0; b.len()];
            for r in 0..b.len() {
                let mut acc = 0.0;
                for c in 0..h.len() {
                    acc += w[r][c] * h[c];
                }
                z[r] = acc + b[r];
            }
            h = if l == last { z } else { z.into_iter().map(f64::tanh).collect() };
        }
        h
    }

    #[test]
    fn zero_weights_give_head_of_bias() {
        let mut p = MlpParams::zeros(vec![3, 4, 4, 1], HeadKind::Discriminator).unwrap();
        assert_eq!(
            p.head_forward(&[1.0, 2.0, 3.0]).unwrap(),
            HeadOutput::Discriminator(0.5)
        );
        let n = p.data.len();
        p.data[n - 1] = 0.7;
        assert_eq!(p.head_forward(&[1.0, 2.0, 3.0]).unwrap(), HeadOutput::Discriminator(sigmoid(0.7)));
        let mut v = MlpParams::zeros(vec![3, 4, 4, 1], HeadKind::Value).unwrap();
        let n = v.data.len();
        v.data[n - 1] = -2.5;
        assert_eq!(v.head_forward(&[0.3, 0.0, 1.0]).unwrap(), HeadOutput::Value(-2.5));
    }

    #[test]
    fn matches_reference_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let p = MlpParams::init(vec![7, 64, 64, 5], HeadKind::Dirichlet, 1.0, &mut rng).unwrap();
            let x: Vec<f64> = (0..7).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a = p.forward_raw(&x).unwrap();
            let b = reference_forward(&p, &x);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() <= 1e-12 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn shape_mismatch() {
        let p = MlpParams::zeros(vec![3, 4, 2], HeadKind::Gaussian).unwrap();
        assert!(p.forward_raw(&[1.0, 2.0]).is_err());
        assert!(MlpParams::zeros(vec![3, 4, 2], HeadKind::Value).is_err());
        assert_eq!(p.log_std().len(), 2);
    }

    #[test]
    fn linear_net_quadratic_loss() {
        // single linear layer: y = W x + b, loss = ½ |y - t|²
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = MlpParams::init(vec![3, 2], HeadKind::Dirichlet, 1.0, &mut rng).unwrap();
        let x = [0.5, -1.0, 2.0];
        let t = [0.1, 0.3];
        let mut tr = Trace::default();
        p.forward(&x, &mut tr).unwrap();
        let y = tr.output().to_vec();
        let d: Vec<f64> = y.iter().zip(&t).map(|(a, b)| a - b).collect();
        let mut g = vec![0.0; p.data.len()];
        p.backward(&tr, &d, &mut g);
        for r in 0..2 {
            for c in 0..3 {
                assert!((g[r * 3 + c] - d[r] * x[c]).abs() < 1e-15);
            }
            assert!((g[6 + r] - d[r]).abs() < 1e-15);
        }
        let mut z = vec![0.0; p.data.len()];
        p.backward(&tr, &[0.0, 0.0], &mut z);
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = MlpParams::init(vec![4, 6, 5, 3], HeadKind::Dirichlet, 1.0, &mut rng).unwrap();
        let x = [0.3, -0.2, 0.9, 0.1];
        let c = [0.7, -1.3, 0.4];
        // loss = Σ c_i y_i
        let loss = |q: &MlpParams| -> f64 {
            q.forward_raw(&x).unwrap().iter().zip(&c).map(|(a, b)| a * b).sum()
        };
        let mut tr = Trace::default();
        p.forward(&x, &mut tr).unwrap();
        let mut g = vec![0.0; p.data.len()];
        p.backward(&tr, &c, &mut g);
        let h = 1e-5;
        for k in 0..p.data.len() {
            let mut a = p.clone();
            a.data[k] += h;
            let mut b = p.clone();
            b.data[k] -= h;
            let fd = (loss(&a) - loss(&b)) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-7 * (1.0 + fd.abs()), "param {k}: {fd} vs {}", g[k]);
        }
    }
}
