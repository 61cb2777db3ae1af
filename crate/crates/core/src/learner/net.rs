//! Two-layer tanh MLP with a shared trunk and four linear outputs
//! (velocity mean x/y, activation logit, value), plus two free log-std
//! parameters. Gradients are accumulated layer by layer in reverse.
//!
//! All parameters live in one flat vector so the optimizer, gradient
//! clipping and checkpoints can treat them uniformly.

use super::LearnerError;
use crate::world::rng::RngStream;

/// Outputs of the final linear layer.
pub const N_OUT: usize = 4;
pub const OUT_MEAN_X: usize = 0;
pub const OUT_MEAN_Y: usize = 1;
pub const OUT_LOGIT: usize = 2;
pub const OUT_VALUE: usize = 3;
pub const N_LOG_STD: usize = 2;

pub const DEFAULT_HIDDEN: usize = 64;
pub const INITIAL_LOG_STD: f64 = -0.5;

/// Offsets of each parameter block inside the flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    input: usize,
    hidden: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    log_std: usize,
    len: usize,
}

impl Layout {
    fn new(input: usize, hidden: usize) -> Self {
        let w1 = 0;
        let b1 = w1 + input * hidden;
        let w2 = b1 + hidden;
        let b2 = w2 + hidden * hidden;
        let w3 = b2 + hidden;
        let b3 = w3 + hidden * N_OUT;
        let log_std = b3 + N_OUT;
        Self {
            input,
            hidden,
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            log_std,
            len: log_std + N_LOG_STD,
        }
    }
}

/// Head values for one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadOutput {
    pub vel_mean: [f64; 2],
    pub vel_log_std: [f64; 2],
    pub act_logit: f64,
    pub act_prob: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNet {
    input: usize,
    hidden: usize,
    params: Vec<f64>,
}

/// Activations kept from a batched forward pass for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    rows: usize,
    h1: Vec<f64>,
    h2: Vec<f64>,
    out: Vec<f64>,
}

impl ForwardCache {
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Raw final-layer outputs of row `r`.
    pub fn output(&self, r: usize) -> &[f64] {
        &self.out[r * N_OUT..(r + 1) * N_OUT]
    }
}

/// `out = b + x W` for one row, `W` stored row-major as `[in][out]`.
#[inline]
fn dense_row(x: &[f64], w: &[f64], b: &[f64], out: &mut [f64]) {
    let n_out = out.len();
    out.copy_from_slice(b);
    for (i, &xi) in x.iter().enumerate() {
        let row = &w[i * n_out..(i + 1) * n_out];
        for (o, &wij) in out.iter_mut().zip(row) {
            *o += xi * wij;
        }
    }
}

/// `gw += x^T d`, `gb += d` for one row.
#[inline]
fn accumulate_dense(x: &[f64], d: &[f64], gw: &mut [f64], gb: &mut [f64]) {
    let n_out = d.len();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        let row = &mut gw[i * n_out..(i + 1) * n_out];
        for (g, &dj) in row.iter_mut().zip(d) {
            *g += xi * dj;
        }
    }
    for (g, &dj) in gb.iter_mut().zip(d) {
        *g += dj;
    }
}

/// `dx = W d` then multiplied by the tanh derivative at activation `h`.
#[inline]
fn backprop_tanh(w: &[f64], d: &[f64], h: &[f64], dx: &mut [f64]) {
    let n_out = d.len();
    for (i, (dxi, &hi)) in dx.iter_mut().zip(h).enumerate() {
        let row = &w[i * n_out..(i + 1) * n_out];
        let mut acc = 0.0;
        for (&wij, &dj) in row.iter().zip(d) {
            acc += wij * dj;
        }
        *dxi = acc * (1.0 - hi * hi);
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl PolicyNet {
    /// Trunk weights drawn `N(0, 1/fan_in)`, biases zero, output layer zero,
    /// log-std at [`INITIAL_LOG_STD`].
    pub fn new(input: usize, hidden: usize, rng: &mut RngStream) -> Self {
        let layout = Layout::new(input, hidden);
        let mut params = vec![0.0; layout.len];
        let s1 = (1.0 / input as f64).sqrt();
        for p in &mut params[layout.w1..layout.b1] {
            *p = rng.normal() * s1;
        }
        let s2 = (1.0 / hidden as f64).sqrt();
        for p in &mut params[layout.w2..layout.b2] {
            *p = rng.normal() * s2;
        }
        for p in &mut params[layout.log_std..] {
            *p = INITIAL_LOG_STD;
        }
        Self { input, hidden, params }
    }

    /// Rebuilds a network from sizes and a flat parameter vector.
    pub fn from_params(input: usize, hidden: usize, params: Vec<f64>) -> Result<Self, LearnerError> {
        let layout = Layout::new(input, hidden);
        if params.len() != layout.len {
            return Err(LearnerError::DimensionMismatch {
                what: "parameter vector",
                expected: layout.len,
                got: params.len(),
            });
        }
        Ok(Self { input, hidden, params })
    }

    /// Parameter count for a given observation length.
    pub fn param_count(input: usize, hidden: usize) -> usize {
        Layout::new(input, hidden).len
    }

    fn layout(&self) -> Layout {
        Layout::new(self.input, self.hidden)
    }

    pub fn input_len(&self) -> usize {
        self.input
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn log_std(&self) -> [f64; 2] {
        let l = self.layout();
        [self.params[l.log_std], self.params[l.log_std + 1]]
    }

    /// Index of the first log-std parameter in the flat vector.
    pub fn log_std_offset(&self) -> usize {
        self.layout().log_std
    }

    fn check_input(&self, len: usize) -> Result<(), LearnerError> {
        if len != self.input {
            return Err(LearnerError::DimensionMismatch {
                what: "observation",
                expected: self.input,
                got: len,
            });
        }
        Ok(())
    }

    fn forward_row(&self, l: &Layout, x: &[f64], h1: &mut [f64], h2: &mut [f64], out: &mut [f64]) {
        let p = &self.params;
        dense_row(x, &p[l.w1..l.b1], &p[l.b1..l.w2], h1);
        h1.iter_mut().for_each(|v| *v = v.tanh());
        dense_row(h1, &p[l.w2..l.b2], &p[l.b2..l.w3], h2);
        h2.iter_mut().for_each(|v| *v = v.tanh());
        dense_row(h2, &p[l.w3..l.b3], &p[l.b3..l.log_std], out);
    }

    pub fn heads_from_output(&self, out: &[f64]) -> HeadOutput {
        let logit = out[OUT_LOGIT];
        HeadOutput {
            vel_mean: [out[OUT_MEAN_X], out[OUT_MEAN_Y]],
            vel_log_std: self.log_std(),
            act_logit: logit,
            act_prob: sigmoid(logit),
            value: out[OUT_VALUE],
        }
    }

    pub fn forward(&self, obs: &[f64]) -> Result<HeadOutput, LearnerError> {
        self.check_input(obs.len())?;
        let l = self.layout();
        let mut h1 = vec![0.0; l.hidden];
        let mut h2 = vec![0.0; l.hidden];
        let mut out = [0.0; N_OUT];
        self.forward_row(&l, obs, &mut h1, &mut h2, &mut out);
        Ok(self.heads_from_output(&out))
    }

    /// Forward pass over `rows` observations stored back to back in `x`.
    /// Each row is computed exactly as [`PolicyNet::forward`] would.
    pub fn forward_batch(&self, x: &[f64], rows: usize, cache: &mut ForwardCache) -> Result<(), LearnerError> {
        if x.len() != rows * self.input {
            return Err(LearnerError::DimensionMismatch {
                what: "observation batch",
                expected: rows * self.input,
                got: x.len(),
            });
        }
        let l = self.layout();
        let h = l.hidden;
        cache.rows = rows;
        cache.h1.resize(rows * h, 0.0);
        cache.h2.resize(rows * h, 0.0);
        cache.out.resize(rows * N_OUT, 0.0);
        for r in 0..rows {
            self.forward_row(
                &l,
                &x[r * l.input..(r + 1) * l.input],
                &mut cache.h1[r * h..(r + 1) * h],
                &mut cache.h2[r * h..(r + 1) * h],
                &mut cache.out[r * N_OUT..(r + 1) * N_OUT],
            );
        }
        Ok(())
    }

    /// Accumulates into `grad` the gradient of a loss whose derivative with
    /// respect to the final-layer outputs is `d_out` (rows x 4). Log-std
    /// gradients are the caller's to add: they do not pass through the
    /// trunk.
    pub fn backward_batch(&self, x: &[f64], cache: &ForwardCache, d_out: &[f64], grad: &mut [f64]) {
        let l = self.layout();
        let h = l.hidden;
        debug_assert_eq!(grad.len(), l.len);
        debug_assert_eq!(d_out.len(), cache.rows * N_OUT);
        let p = &self.params;
        let mut dh2 = vec![0.0; h];
        let mut dh1 = vec![0.0; h];
        let (g_front, g_back) = grad.split_at_mut(l.w3);
        let (gw3, g_rest) = g_back.split_at_mut(l.b3 - l.w3);
        let gb3 = &mut g_rest[..N_OUT];
        let (g_layer1, g_layer2) = g_front.split_at_mut(l.w2);
        let (gw1, gb1) = g_layer1.split_at_mut(l.b1);
        let (gw2, gb2) = g_layer2.split_at_mut(l.b2 - l.w2);
        for r in 0..cache.rows {
            let x_r = &x[r * l.input..(r + 1) * l.input];
            let h1 = &cache.h1[r * h..(r + 1) * h];
            let h2 = &cache.h2[r * h..(r + 1) * h];
            let d = &d_out[r * N_OUT..(r + 1) * N_OUT];
            if d.iter().all(|v| *v == 0.0) {
                continue;
            }
            accumulate_dense(h2, d, gw3, gb3);
            backprop_tanh(&p[l.w3..l.b3], d, h2, &mut dh2);
            accumulate_dense(h1, &dh2, gw2, gb2);
            backprop_tanh(&p[l.w2..l.b2], &dh2, h1, &mut dh1);
            accumulate_dense(x_r, &dh1, gw1, gb1);
        }
    }
}
