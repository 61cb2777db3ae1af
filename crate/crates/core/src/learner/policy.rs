//! Hybrid action distribution: a diagonal Gaussian over velocity in units of
//! `v_max` and an independent Bernoulli over tool activation.

use serde::{Deserialize, Serialize};

use super::net::{HeadOutput, PolicyNet};
use super::LearnerError;
use crate::dynamics::Action;
use crate::geometry::Vec2;
use crate::world::rng::RngStream;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// What the policy actually sampled. Log-probabilities always refer to this,
/// never to the clamped action the environment executes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicySample {
    /// Velocity in units of `v_max`, before any clamping.
    pub raw: [f64; 2],
    pub activate: bool,
}

impl PolicySample {
    pub fn to_action(self, v_max: f64) -> Action {
        Action::new(Vec2::new(self.raw[0] * v_max, self.raw[1] * v_max), self.activate)
    }
}

pub fn gaussian_log_density(x: f64, mean: f64, log_std: f64) -> f64 {
    let z = (x - mean) * (-log_std).exp();
    -0.5 * z * z - log_std - HALF_LN_2PI
}

/// `log p(bit)` for a Bernoulli with the given logit, stable for large |z|.
pub fn bernoulli_log_mass(bit: bool, logit: f64) -> f64 {
    // log sigmoid(z) = -softplus(-z)
    let signed = if bit { logit } else { -logit };
    -softplus(-signed)
}

pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn log_prob(heads: &HeadOutput, sample: &PolicySample) -> f64 {
    gaussian_log_density(sample.raw[0], heads.vel_mean[0], heads.vel_log_std[0])
        + gaussian_log_density(sample.raw[1], heads.vel_mean[1], heads.vel_log_std[1])
        + bernoulli_log_mass(sample.activate, heads.act_logit)
}

pub fn gaussian_entropy(log_std: f64) -> f64 {
    0.5 + HALF_LN_2PI + log_std
}

pub fn bernoulli_entropy(logit: f64) -> f64 {
    let p = super::net::sigmoid(logit);
    // -p log p - (1-p) log(1-p) written with softplus for stability.
    p * softplus(-logit) + (1.0 - p) * softplus(logit)
}

pub fn entropy(heads: &HeadOutput) -> f64 {
    gaussian_entropy(heads.vel_log_std[0]) + gaussian_entropy(heads.vel_log_std[1]) + bernoulli_entropy(heads.act_logit)
}

/// Draws from the heads. Consumes three uniform-derived draws in a fixed
/// order (two normals, one uniform) so streams stay aligned across runs.
pub fn sample_from(heads: &HeadOutput, rng: &mut RngStream) -> PolicySample {
    let zx = rng.normal();
    let zy = rng.normal();
    let u = rng.uniform();
    PolicySample {
        raw: [
            heads.vel_mean[0] + heads.vel_log_std[0].exp() * zx,
            heads.vel_mean[1] + heads.vel_log_std[1].exp() * zy,
        ],
        activate: u < heads.act_prob,
    }
}

/// Stochastic draw plus its log-probability and the value estimate.
pub fn sample_action(net: &PolicyNet, obs: &[f64], rng: &mut RngStream) -> Result<(PolicySample, f64, f64), LearnerError> {
    let heads = net.forward(obs)?;
    let s = sample_from(&heads, rng);
    Ok((s, log_prob(&heads, &s), heads.value))
}

pub fn log_prob_of(net: &PolicyNet, obs: &[f64], sample: &PolicySample) -> Result<f64, LearnerError> {
    Ok(log_prob(&net.forward(obs)?, sample))
}

/// Mean velocity and activation iff probability exceeds one half.
pub fn deterministic_action(net: &PolicyNet, obs: &[f64]) -> Result<PolicySample, LearnerError> {
    Ok(deterministic_from(&net.forward(obs)?))
}

pub fn deterministic_from(heads: &HeadOutput) -> PolicySample {
    PolicySample {
        raw: heads.vel_mean,
        activate: heads.act_prob > 0.5,
    }
}
