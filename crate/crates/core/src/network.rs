//! Shallow fully connected networks.
//!
//! `out = W₂ · σ(W₁ · input + b₁) + b₂` with one hidden layer and a linear
//! output layer. Parameters live in one flat vector laid out as
//! `[W₁ (row-major), b₁, W₂ (row-major), b₂]`.
//!
//! The last input is time. [`Mlp::time_jet`] propagates value and time
//! derivatives up to third order in closed form, and
//! [`TimeJetTrace::backward`] accumulates parameter gradients of any loss
//! that depends on those outputs.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{GradBuffer, Jet3, Scalar};

pub const DEFAULT_HIDDEN: usize = 64;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("input has length {got}, network expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Sin,
}

impl Activation {
    /// `σ⁽ᵏ⁾(h)` for `k = 0..=4`.
    fn derivatives(self, h: f64) -> [f64; 5] {
        match self {
            Activation::Tanh => {
                let y = h.tanh();
                let s1 = 1.0 - y * y;
                let s2 = -2.0 * y * s1;
                let s3 = -2.0 * (s1 * s1 + y * s2);
                let s4 = -2.0 * (3.0 * s1 * s2 + y * s3);
                [y, s1, s2, s3, s4]
            }
            Activation::Sin => {
                let (s, c) = h.sin_cos();
                [s, c, -s, -c, s]
            }
        }
    }

    fn apply<S: Scalar>(self, h: &S) -> S {
        match self {
            Activation::Tanh => h.tanh(),
            Activation::Sin => h.sin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    input_dim: usize,
    hidden: usize,
    output_dim: usize,
    activation: Activation,
    seed: u64,
    params: Vec<f64>,
}

/// Glorot-uniform initialized network with 64 tanh hidden units.
pub fn init_network(input_dim: usize, output_dim: usize, seed: u64) -> Mlp {
    Mlp::new(input_dim, DEFAULT_HIDDEN, output_dim, Activation::Tanh, seed)
}

impl Mlp {
    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))` per layer, biases 0.
    pub fn new(
        input_dim: usize,
        hidden: usize,
        output_dim: usize,
        activation: Activation,
        seed: u64,
    ) -> Self {
        assert!(input_dim >= 1 && hidden >= 1 && output_dim >= 1, "dimensions must be positive");
        let mut net = Mlp {
            input_dim,
            hidden,
            output_dim,
            activation,
            seed,
            params: vec![0.0; (input_dim + 1) * hidden + (hidden + 1) * output_dim],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a1 = (6.0 / (input_dim + hidden) as f64).sqrt();
        let a2 = (6.0 / (hidden + output_dim) as f64).sqrt();
        let (w1, w2) = (net.w1_range(), net.w2_range());
        for w in &mut net.params[w1] {
            *w = a1 * (2.0 * rng.random::<f64>() - 1.0);
        }
        for w in &mut net.params[w2] {
            *w = a2 * (2.0 * rng.random::<f64>() - 1.0);
        }
        net
    }

    /// Builds a network from explicit parameters in the flat layout.
    pub fn from_params(
        input_dim: usize,
        hidden: usize,
        output_dim: usize,
        activation: Activation,
        params: Vec<f64>,
    ) -> Result<Self, NetworkError> {
        let expected = (input_dim + 1) * hidden + (hidden + 1) * output_dim;
        if params.len() != expected {
            return Err(NetworkError::DimensionMismatch {
                expected,
                got: params.len(),
            });
        }
        Ok(Mlp {
            input_dim,
            hidden,
            output_dim,
            activation,
            seed: 0,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn w1_range(&self) -> std::ops::Range<usize> {
        0..self.hidden * self.input_dim
    }

    fn b1_range(&self) -> std::ops::Range<usize> {
        let s = self.hidden * self.input_dim;
        s..s + self.hidden
    }

    fn w2_range(&self) -> std::ops::Range<usize> {
        let s = self.hidden * (self.input_dim + 1);
        s..s + self.output_dim * self.hidden
    }

    fn b2_range(&self) -> std::ops::Range<usize> {
        let s = self.hidden * (self.input_dim + 1) + self.output_dim * self.hidden;
        s..s + self.output_dim
    }

    fn check_input(&self, len: usize) -> Result<(), NetworkError> {
        if len != self.input_dim {
            return Err(NetworkError::DimensionMismatch {
                expected: self.input_dim,
                got: len,
            });
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NetworkError> {
        self.check_input(input.len())?;
        let (w1, b1, w2, b2) = self.split();
        let hidden: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let row = &w1[j * self.input_dim..(j + 1) * self.input_dim];
                let h = b1[j] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
                Scalar::value(&self.activation.apply(&h))
            })
            .collect();
        Ok((0..self.output_dim)
            .map(|i| {
                let row = &w2[i * self.hidden..(i + 1) * self.hidden];
                b2[i] + row.iter().zip(&hidden).map(|(w, a)| w * a).sum::<f64>()
            })
            .collect())
    }

    /// Forward pass over any [`Scalar`] input with this network's weights.
    pub fn forward_generic<S: Scalar>(&self, input: &[S]) -> Result<Vec<S>, NetworkError> {
        self.check_input(input.len())?;
        let (w1, b1, w2, b2) = self.split();
        let proto = input[0].clone();
        let hidden: Vec<S> = (0..self.hidden)
            .map(|j| {
                let mut h = proto.lift(b1[j]);
                for (k, x) in input.iter().enumerate() {
                    h = h + x.scale(w1[j * self.input_dim + k]);
                }
                self.activation.apply(&h)
            })
            .collect();
        Ok((0..self.output_dim)
            .map(|i| {
                let mut o = proto.lift(b2[i]);
                for (j, a) in hidden.iter().enumerate() {
                    o = o + a.scale(w2[i * self.hidden + j]);
                }
                o
            })
            .collect())
    }

    /// Forward pass with externally supplied parameters (e.g. tape
    /// variables), using this network's shape and activation.
    pub fn forward_with_params<S: Scalar>(&self, params: &[S], input: &[S]) -> Result<Vec<S>, NetworkError> {
        self.check_input(input.len())?;
        if params.len() != self.params.len() {
            return Err(NetworkError::DimensionMismatch {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        let w1 = &params[self.w1_range()];
        let b1 = &params[self.b1_range()];
        let w2 = &params[self.w2_range()];
        let b2 = &params[self.b2_range()];
        let hidden: Vec<S> = (0..self.hidden)
            .map(|j| {
                let mut h = b1[j].clone();
                for (k, x) in input.iter().enumerate() {
                    h = h + w1[j * self.input_dim + k].clone() * x.clone();
                }
                self.activation.apply(&h)
            })
            .collect();
        Ok((0..self.output_dim)
            .map(|i| {
                let mut o = b2[i].clone();
                for (j, a) in hidden.iter().enumerate() {
                    o = o + w2[i * self.hidden + j].clone() * a.clone();
                }
                o
            })
            .collect())
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        (
            &self.params[self.w1_range()],
            &self.params[self.b1_range()],
            &self.params[self.w2_range()],
            &self.params[self.b2_range()],
        )
    }

    /// Outputs and their time derivatives through `order` (≤ 3). The last
    /// input is time; the others are held fixed.
    pub fn time_jet(&self, input: &[f64], order: usize) -> Result<Vec<Jet3>, NetworkError> {
        Ok(self.time_jet_trace(input, order)?.outputs())
    }

    /// As [`Mlp::time_jet`], keeping intermediates for [`TimeJetTrace::backward`].
    pub fn time_jet_trace(&self, input: &[f64], order: usize) -> Result<TimeJetTrace<'_>, NetworkError> {
        self.check_input(input.len())?;
        assert!(order <= 3, "time jets are limited to third order");
        let (w1, b1, w2, b2) = self.split();
        let n_in = self.input_dim;
        let mut sigma = Vec::with_capacity(self.hidden);
        let mut act = vec![[0.0; 4]; self.hidden];
        for j in 0..self.hidden {
            let row = &w1[j * n_in..(j + 1) * n_in];
            let h = b1[j] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
            let s = self.activation.derivatives(h);
            let wt = row[n_in - 1];
            let mut pw = 1.0;
            for k in 0..=order {
                act[j][k] = s[k] * pw;
                pw *= wt;
            }
            sigma.push(s);
        }
        let mut out = vec![[0.0; 4]; self.output_dim];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &w2[i * self.hidden..(i + 1) * self.hidden];
            for k in 0..=order {
                o[k] = row.iter().zip(&act).map(|(w, a)| w * a[k]).sum::<f64>();
            }
            o[0] += b2[i];
        }
        Ok(TimeJetTrace {
            net: self,
            input: input.to_vec(),
            order,
            sigma,
            act,
            out,
        })
    }

    /// Plain forward pass keeping intermediates for backprop.
    pub fn trace(&self, input: &[f64]) -> Result<TimeJetTrace<'_>, NetworkError> {
        self.time_jet_trace(input, 0)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let (w1, b1, w2, b2) = self.split();
        let rows = |m: &[f64], cols: usize| m.chunks(cols).map(<[f64]>::to_vec).collect::<Vec<_>>();
        Checkpoint {
            arch: Architecture {
                input_dim: self.input_dim,
                hidden: vec![self.hidden],
                output_dim: self.output_dim,
            },
            seed: self.seed,
            activation: self.activation,
            weights: vec![rows(w1, self.input_dim), rows(w2, self.hidden)],
            biases: vec![b1.to_vec(), b2.to_vec()],
        }
    }

    pub fn from_checkpoint(c: &Checkpoint) -> Result<Self, NetworkError> {
        let bad = |m: &str| NetworkError::Checkpoint(m.to_string());
        let [hidden] = c.arch.hidden[..] else {
            return Err(bad("exactly one hidden layer is supported"));
        };
        let (n_in, n_out) = (c.arch.input_dim, c.arch.output_dim);
        if c.weights.len() != 2 || c.biases.len() != 2 {
            return Err(bad("expected two weight matrices and two bias vectors"));
        }
        let check = |m: &Vec<Vec<f64>>, r: usize, cols: usize| {
            m.len() == r && m.iter().all(|row| row.len() == cols)
        };
        if !check(&c.weights[0], hidden, n_in) || !check(&c.weights[1], n_out, hidden) {
            return Err(bad("weight shapes do not match the architecture"));
        }
        if c.biases[0].len() != hidden || c.biases[1].len() != n_out {
            return Err(bad("bias shapes do not match the architecture"));
        }
        let mut params = Vec::new();
        params.extend(c.weights[0].iter().flatten());
        params.extend(&c.biases[0]);
        params.extend(c.weights[1].iter().flatten());
        params.extend(&c.biases[1]);
        let mut net = Mlp::from_params(n_in, hidden, n_out, c.activation, params)?;
        net.seed = c.seed;
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<(), NetworkError> {
        let text = serde_json::to_string_pretty(&self.to_checkpoint())?;
        crate::io::write_string_atomic(path, &text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NetworkError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_checkpoint(&serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
}

/// On-disk network format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub arch: Architecture,
    pub seed: u64,
    pub activation: Activation,
    /// One row-major matrix per layer.
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

/// Intermediates of a time-jet forward pass.
#[derive(Debug, Clone)]
pub struct TimeJetTrace<'a> {
    net: &'a Mlp,
    input: Vec<f64>,
    order: usize,
    // σ⁽ᵏ⁾(h_j), k = 0..=4
    sigma: Vec<[f64; 5]>,
    // d^k/dt^k σ(h_j) = σ⁽ᵏ⁾(h_j) · w_jt^k
    act: Vec<[f64; 4]>,
    out: Vec<[f64; 4]>,
}

impl TimeJetTrace<'_> {
    pub fn order(&self) -> usize {
        self.order
    }

    /// Output `i`, derivative `k`.
    pub fn output(&self, i: usize, k: usize) -> f64 {
        self.out[i][k]
    }

    pub fn values(&self) -> Vec<f64> {
        self.out.iter().map(|o| o[0]).collect()
    }

    pub fn outputs(&self) -> Vec<Jet3> {
        self.out
            .iter()
            .map(|o| Jet3::new(o[0], o[1], o[2], o[3]))
            .collect()
    }

    /// Accumulates `∂L/∂params` into `grad[offset..]` given
    /// `upstream[i][k] = ∂L/∂(d^k out_i / dt^k)` for `k ≤ order`.
    pub fn backward(&self, upstream: &[[f64; 4]], grad: &mut GradBuffer, offset: usize) {
        let net = self.net;
        assert_eq!(upstream.len(), net.output_dim, "upstream length");
        let g = &mut grad.as_mut_slice()[offset..offset + net.param_count()];
        let (n_in, n_h) = (net.input_dim, net.hidden);
        let w1 = &net.params[net.w1_range()];
        let w2 = &net.params[net.w2_range()];
        let (w1r, b1r, w2r, b2r) = (net.w1_range(), net.b1_range(), net.w2_range(), net.b2_range());

        let mut act_adj = vec![[0.0; 4]; n_h];
        for (i, up) in upstream.iter().enumerate() {
            g[b2r.start + i] += up[0];
            for j in 0..n_h {
                let mut gw = 0.0;
                for k in 0..=self.order {
                    gw += up[k] * self.act[j][k];
                    act_adj[j][k] += up[k] * w2[i * n_h + j];
                }
                g[w2r.start + i * n_h + j] += gw;
            }
        }
        for j in 0..n_h {
            let wt = w1[j * n_in + n_in - 1];
            let s = &self.sigma[j];
            let mut dh = 0.0;
            let mut dwt = 0.0;
            let mut pw = 1.0; // wt^k
            let mut pw_prev = 0.0; // wt^(k-1)
            for k in 0..=self.order {
                let a = act_adj[j][k];
                dh += a * s[k + 1] * pw;
                if k >= 1 {
                    dwt += a * k as f64 * s[k] * pw_prev;
                }
                pw_prev = pw;
                pw *= wt;
            }
            g[b1r.start + j] += dh;
            for m in 0..n_in {
                g[w1r.start + j * n_in + m] += dh * self.input[m];
            }
            g[w1r.start + j * n_in + n_in - 1] += dwt;
        }
    }
}
