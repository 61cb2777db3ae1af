//! Clipped-surrogate PPO over a merged rollout buffer.

use serde::{Deserialize, Serialize};

use super::adam::{clip_global_norm, Adam};
use super::gae::{gae, normalize};
use super::net::{ForwardCache, PolicyNet, N_OUT, OUT_LOGIT, OUT_MEAN_X, OUT_VALUE};
use super::policy::{bernoulli_entropy, gaussian_entropy, log_prob, PolicySample};
use super::LearnerError;
use crate::dynamics::Action;
use crate::world::rng::RngStream;

const ADV_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lam: f64,
    pub clip_eps: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    /// Environment steps per update, summed over all envs.
    pub rollout_len: usize,
    pub learning_rate: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub total_steps: u64,
    pub n_envs: usize,
    pub max_grad_norm: f64,
    /// Rewards are multiplied by this before entering the buffer. Keeps value
    /// targets near unit scale; reported returns are always unscaled.
    #[serde(default = "default_reward_scale")]
    pub reward_scale: f64,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
}

fn default_reward_scale() -> f64 {
    0.01
}

fn default_hidden() -> usize {
    super::net::DEFAULT_HIDDEN
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lam: 0.95,
            clip_eps: 0.2,
            epochs: 4,
            minibatch_size: 256,
            rollout_len: 4096,
            learning_rate: 3e-4,
            value_coef: 0.5,
            entropy_coef: 0.01,
            total_steps: 1_000_000,
            n_envs: 8,
            max_grad_norm: 0.5,
            reward_scale: default_reward_scale(),
            hidden: default_hidden(),
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |m: &str| Err(LearnerError::InvalidConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.lam) {
            return bad("lam must lie in [0, 1]");
        }
        if !(self.clip_eps > 0.0) {
            return bad("clip_eps must be positive");
        }
        if self.epochs == 0 || self.minibatch_size == 0 || self.rollout_len == 0 || self.n_envs == 0 || self.hidden == 0 {
            return bad("epochs, minibatch_size, rollout_len, n_envs and hidden must be at least 1");
        }
        if self.rollout_len < self.n_envs {
            return bad("rollout_len must be at least n_envs");
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("max_grad_norm", self.max_grad_norm),
            ("reward_scale", self.reward_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(&format!("{name} must be positive and finite"));
            }
        }
        for (name, v) in [("value_coef", self.value_coef), ("entropy_coef", self.entropy_coef)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(&format!("{name} must be non-negative and finite"));
            }
        }
        Ok(())
    }

    /// Steps each env contributes to one rollout.
    pub fn steps_per_env(&self) -> usize {
        self.rollout_len.div_ceil(self.n_envs)
    }

    /// Number of updates; partial rollouts are rounded up.
    pub fn n_updates(&self) -> u64 {
        let per = (self.steps_per_env() * self.n_envs) as u64;
        self.total_steps.div_ceil(per)
    }
}

/// Per-step training data. Segments are contiguous runs from one env,
/// appended in worker order.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    obs_dim: usize,
    obs: Vec<f64>,
    samples: Vec<PolicySample>,
    executed: Vec<Action>,
    log_probs: Vec<f64>,
    values: Vec<f64>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
    advantages: Vec<f64>,
    returns: Vec<f64>,
    segments: Vec<(usize, usize, f64)>,
    open_from: usize,
}

impl RolloutBuffer {
    pub fn new(obs_dim: usize) -> Self {
        Self {
            obs_dim,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn clear(&mut self) {
        let d = self.obs_dim;
        *self = Self::new(d);
    }

    /// One step. `log_prob` must be the log-probability of `sample` under the
    /// acting network; `executed` is kept for diagnostics only and never
    /// enters the loss.
    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        obs: &[f64],
        sample: PolicySample,
        executed: Action,
        log_prob: f64,
        value: f64,
        reward: f64,
        done: bool,
    ) {
        debug_assert_eq!(obs.len(), self.obs_dim);
        self.obs.extend_from_slice(obs);
        self.samples.push(sample);
        self.executed.push(executed);
        self.log_probs.push(log_prob);
        self.values.push(value);
        self.rewards.push(reward);
        self.dones.push(done);
    }

    /// Closes the current env segment with the critic's estimate of the
    /// state after its last step.
    pub fn end_segment(&mut self, last_value: f64) {
        let end = self.len();
        if end > self.open_from {
            self.segments.push((self.open_from, end, last_value));
        }
        self.open_from = end;
    }

    pub fn observation(&self, i: usize) -> &[f64] {
        &self.obs[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn sample(&self, i: usize) -> PolicySample {
        self.samples[i]
    }

    pub fn executed(&self, i: usize) -> Action {
        self.executed[i]
    }

    pub fn log_prob(&self, i: usize) -> f64 {
        self.log_probs[i]
    }

    pub fn advantages(&self) -> &[f64] {
        &self.advantages
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    /// GAE per segment, then advantage normalization over the whole buffer.
    pub fn compute_advantages(&mut self, gamma: f64, lam: f64) -> Result<(), LearnerError> {
        self.end_segment(0.0);
        if self.is_empty() {
            return Err(LearnerError::EmptyBuffer);
        }
        self.advantages = vec![0.0; self.len()];
        self.returns = vec![0.0; self.len()];
        for &(a, b, last) in &self.segments {
            let (adv, ret) = gae(&self.rewards[a..b], &self.values[a..b], &self.dones[a..b], last, gamma, lam)?;
            self.advantages[a..b].copy_from_slice(&adv);
            self.returns[a..b].copy_from_slice(&ret);
        }
        normalize(&mut self.advantages, ADV_EPS);
        Ok(())
    }

    fn gather_obs(&self, idx: &[usize], out: &mut Vec<f64>) {
        out.clear();
        for &i in idx {
            out.extend_from_slice(self.observation(i));
        }
    }
}

/// Loss terms and diagnostics for one minibatch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub total: f64,
    pub mean_ratio: f64,
    pub max_ratio_dev: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// Minibatch loss and, if `grad` is given, its gradient (overwritten).
pub fn minibatch_loss(
    net: &PolicyNet,
    buf: &RolloutBuffer,
    idx: &[usize],
    cfg: &PpoConfig,
    scratch: &mut Scratch,
    grad: Option<&mut [f64]>,
) -> Result<LossParts, LearnerError> {
    let b = idx.len();
    if b == 0 {
        return Err(LearnerError::EmptyBuffer);
    }
    buf.gather_obs(idx, &mut scratch.x);
    net.forward_batch(&scratch.x, b, &mut scratch.cache)?;
    let inv_b = 1.0 / b as f64;
    let log_std = net.log_std();
    let sigma = [log_std[0].exp(), log_std[1].exp()];
    let want_grad = grad.is_some();
    scratch.d_out.clear();
    scratch.d_out.resize(b * N_OUT, 0.0);
    let mut d_log_std = [0.0; 2];
    let mut parts = LossParts::default();
    let mut clipped = 0usize;
    for (r, &i) in idx.iter().enumerate() {
        let heads = net.heads_from_output(scratch.cache.output(r));
        let s = buf.samples[i];
        let adv = buf.advantages[i];
        let new_lp = log_prob(&heads, &s);
        let ratio = (new_lp - buf.log_probs[i]).exp();
        let clipped_ratio = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        let surr1 = ratio * adv;
        let surr2 = clipped_ratio * adv;
        parts.policy_loss -= surr1.min(surr2) * inv_b;
        parts.mean_ratio += ratio * inv_b;
        parts.max_ratio_dev = parts.max_ratio_dev.max((ratio - 1.0).abs());
        parts.approx_kl += (buf.log_probs[i] - new_lp) * inv_b;
        if (ratio - 1.0).abs() > cfg.clip_eps {
            clipped += 1;
        }
        let v_err = heads.value - buf.returns[i];
        parts.value_loss += v_err * v_err * inv_b;
        let h_bern = bernoulli_entropy(heads.act_logit);
        parts.entropy += (gaussian_entropy(log_std[0]) + gaussian_entropy(log_std[1]) + h_bern) * inv_b;

        if want_grad {
            // Only the unclipped branch of the min carries gradient.
            let d_lp = if surr1 <= surr2 { -ratio * adv * inv_b } else { 0.0 };
            let d = &mut scratch.d_out[r * N_OUT..(r + 1) * N_OUT];
            for k in 0..2 {
                let z = (s.raw[k] - heads.vel_mean[k]) / sigma[k];
                d[OUT_MEAN_X + k] = d_lp * z / sigma[k];
                d_log_std[k] += d_lp * (z * z - 1.0);
            }
            let p = heads.act_prob;
            let bit = if s.activate { 1.0 } else { 0.0 };
            // d(-c_e * H_bern)/dz = c_e * z * p * (1 - p)
            d[OUT_LOGIT] = d_lp * (bit - p) + cfg.entropy_coef * heads.act_logit * p * (1.0 - p) * inv_b;
            d[OUT_VALUE] = 2.0 * cfg.value_coef * v_err * inv_b;
        }
    }
    parts.clip_fraction = clipped as f64 * inv_b;
    parts.total = parts.policy_loss + cfg.value_coef * parts.value_loss - cfg.entropy_coef * parts.entropy;
    if let Some(g) = grad {
        g.iter_mut().for_each(|v| *v = 0.0);
        net.backward_batch(&scratch.x, &scratch.cache, &scratch.d_out, g);
        let o = net.log_std_offset();
        for k in 0..2 {
            g[o + k] = d_log_std[k] - cfg.entropy_coef;
        }
    }
    Ok(parts)
}

/// Reusable allocations for [`minibatch_loss`].
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    x: Vec<f64>,
    cache: ForwardCache,
    d_out: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    /// Ratios of the first minibatch, evaluated before any parameter change.
    pub initial_mean_ratio: f64,
    pub initial_max_ratio_dev: f64,
    pub initial_clip_fraction: f64,
    /// Averages over every minibatch of every epoch.
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
    pub minibatches: usize,
}

/// Runs the configured epochs of minibatch updates. Advantages must already
/// be computed. Minibatch order comes from `shuffle`.
pub fn ppo_update(
    net: &mut PolicyNet,
    adam: &mut Adam,
    buf: &RolloutBuffer,
    cfg: &PpoConfig,
    shuffle: &mut RngStream,
) -> Result<UpdateStats, LearnerError> {
    let n = buf.len();
    if n == 0 {
        return Err(LearnerError::EmptyBuffer);
    }
    if buf.advantages.len() != n {
        return Err(LearnerError::AdvantagesMissing);
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; net.params().len()];
    let mut scratch = Scratch::default();
    let mut stats = UpdateStats::default();
    for epoch in 0..cfg.epochs {
        shuffle.shuffle(&mut order);
        for (mb, idx) in order.chunks(cfg.minibatch_size).enumerate() {
            let parts = minibatch_loss(net, buf, idx, cfg, &mut scratch, Some(&mut grad))?;
            let norm = clip_global_norm(&mut grad, cfg.max_grad_norm);
            if !parts.total.is_finite() || !norm.is_finite() {
                return Err(LearnerError::NonFinite {
                    epoch,
                    minibatch: mb,
                    policy_loss: parts.policy_loss,
                    value_loss: parts.value_loss,
                    entropy: parts.entropy,
                    grad_norm: norm,
                });
            }
            if stats.minibatches == 0 {
                stats.initial_mean_ratio = parts.mean_ratio;
                stats.initial_max_ratio_dev = parts.max_ratio_dev;
                stats.initial_clip_fraction = parts.clip_fraction;
            }
            adam.step(net.params_mut(), &grad);
            stats.mean_ratio += parts.mean_ratio;
            stats.clip_fraction += parts.clip_fraction;
            stats.policy_loss += parts.policy_loss;
            stats.value_loss += parts.value_loss;
            stats.entropy += parts.entropy;
            stats.approx_kl += parts.approx_kl;
            stats.grad_norm += norm;
            stats.minibatches += 1;
        }
    }
    let k = stats.minibatches as f64;
    stats.mean_ratio /= k;
    stats.clip_fraction /= k;
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.approx_kl /= k;
    stats.grad_norm /= k;
    Ok(stats)
}

/// Importance ratios of every buffered step under `net`, in buffer order.
pub fn importance_ratios(net: &PolicyNet, buf: &RolloutBuffer) -> Result<Vec<f64>, LearnerError> {
    (0..buf.len())
        .map(|i| {
            let h = net.forward(buf.observation(i))?;
            Ok((log_prob(&h, &buf.samples[i]) - buf.log_probs[i]).exp())
        })
        .collect()
}

/// Surrogate contribution `min(rA, clip(r, 1-e, 1+e) A)` of one sample.
pub fn clipped_surrogate(ratio: f64, adv: f64, clip_eps: f64) -> f64 {
    (ratio * adv).min(ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * adv)
}
