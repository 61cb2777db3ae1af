//! Rollout collection and the update loop.

use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::net::PolicyNet;
use super::policy::{sample_action, PolicySample};
use super::ppo::{ppo_update, PpoConfig, RolloutBuffer, UpdateStats};
use super::LearnerError;
use crate::env::{observation_len, Episode, Observation, TerminationCause, Transition};
use crate::shield;
use crate::world::rng::{labels, RngStream};
use crate::world::WorldConfig;

/// Training episodes draw their streams from this namespace so they never
/// coincide with evaluation episodes, which use small indices.
pub const TRAIN_INDEX_BASE: u64 = 1 << 63;

pub fn train_episode_index(worker: usize, k: u64) -> u64 {
    TRAIN_INDEX_BASE | ((worker as u64) << 32) | (k & 0xFFFF_FFFF)
}

/// One row of the learning curve: statistics of the episodes that finished
/// during an update's rollout, plus that update's optimizer diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub update: u64,
    pub env_steps: u64,
    pub episodes: u64,
    /// Mean undiscounted return; NaN when no episode finished.
    pub mean_return: f64,
    pub goals: u64,
    pub depletions: u64,
    /// Depletions in episodes that executed at least one activation the
    /// shield would have refused.
    pub tool_depletions: u64,
    pub timeouts: u64,
    pub overrides: u64,
    pub activations: u64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

pub struct TrainOutcome {
    pub net: PolicyNet,
    pub curve: Vec<CurvePoint>,
    pub updates: Vec<UpdateStats>,
}

/// Everything a step observer gets to see.
pub struct StepEvent<'a> {
    pub update: u64,
    pub worker: usize,
    pub episode_index: u64,
    pub sample: PolicySample,
    pub transition: &'a Transition,
}

struct Worker {
    id: usize,
    episode: Episode,
    obs: Observation,
    rng: RngStream,
    started: u64,
    reckless: bool,
}

impl Worker {
    fn new(id: usize, cfg: &WorldConfig, seed: u64) -> Self {
        let (episode, obs) = Episode::reset(cfg, train_episode_index(id, 0));
        Self {
            id,
            episode,
            obs,
            rng: RngStream::new(seed, labels::POLICY, id as u64),
            started: 1,
            reckless: false,
        }
    }

    fn restart(&mut self, cfg: &WorldConfig) {
        let (episode, obs) = Episode::reset(cfg, train_episode_index(self.id, self.started));
        self.episode = episode;
        self.obs = obs;
        self.started += 1;
        self.reckless = false;
    }
}

#[derive(Default)]
struct Window {
    episodes: u64,
    return_sum: f64,
    goals: u64,
    depletions: u64,
    tool_depletions: u64,
    timeouts: u64,
    overrides: u64,
    activations: u64,
}

pub fn train(cfg: &WorldConfig, ppo: &PpoConfig, shield_on: bool, seed: u64) -> Result<TrainOutcome, LearnerError> {
    train_observed(cfg, ppo, shield_on, seed, &mut |_| {})
}

/// [`train`] with a callback on every environment step.
pub fn train_observed(
    cfg: &WorldConfig,
    ppo: &PpoConfig,
    shield_on: bool,
    seed: u64,
    observer: &mut dyn FnMut(&StepEvent<'_>),
) -> Result<TrainOutcome, LearnerError> {
    ppo.validate()?;
    cfg.validate().map_err(|e| LearnerError::InvalidConfig(e.to_string()))?;
    let cfg = cfg.clone().with_seed(seed);
    let obs_dim = observation_len(cfg.servers.len());
    let mut net = PolicyNet::new(obs_dim, ppo.hidden, &mut RngStream::new(seed, labels::INIT, 0));
    let mut adam = Adam::new(net.params().len(), ppo.learning_rate);
    let mut curve = Vec::new();
    let mut updates = Vec::new();
    if ppo.total_steps == 0 {
        return Ok(TrainOutcome { net, curve, updates });
    }

    let mut workers: Vec<Worker> = (0..ppo.n_envs).map(|i| Worker::new(i, &cfg, seed)).collect();
    let mut buf = RolloutBuffer::new(obs_dim);
    let steps_per_env = ppo.steps_per_env();
    let mut env_steps = 0u64;
    for update in 0..ppo.n_updates() {
        buf.clear();
        let mut w = Window::default();
        for worker in &mut workers {
            for _ in 0..steps_per_env {
                let (sample, lp, value) = sample_action(&net, worker.obs.as_slice(), &mut worker.rng)?;
                let proposed = sample.to_action(cfg.v_max);
                let state = worker.episode.state();
                let unsafe_call = shield::screen(proposed.clamped(cfg.v_max), state, worker.episode.config()).overridden;
                let t = worker.episode.step(proposed, shield_on);
                observer(&StepEvent {
                    update,
                    worker: worker.id,
                    episode_index: worker.episode.episode_index(),
                    sample,
                    transition: &t,
                });
                if unsafe_call && t.action.activate {
                    worker.reckless = true;
                }
                w.overrides += u64::from(t.info.overridden);
                w.activations += u64::from(t.info.server.is_some());
                buf.push(worker.obs.as_slice(), sample, t.action, lp, value, t.reward * ppo.reward_scale, t.done);
                if t.done {
                    w.episodes += 1;
                    w.return_sum += worker.episode.episode_return();
                    match t.cause {
                        TerminationCause::Goal => w.goals += 1,
                        TerminationCause::Depleted => {
                            w.depletions += 1;
                            w.tool_depletions += u64::from(worker.reckless || t.info.depleted_by_tool);
                        }
                        TerminationCause::Timeout => w.timeouts += 1,
                        TerminationCause::Running => {}
                    }
                    worker.restart(&cfg);
                } else {
                    worker.obs = t.observation;
                }
            }
            let last_value = net.forward(worker.obs.as_slice())?.value;
            buf.end_segment(last_value);
        }
        env_steps += buf.len() as u64;
        buf.compute_advantages(ppo.gamma, ppo.lam)?;
        let mut shuffle = RngStream::new(seed, labels::SHUFFLE, update);
        let stats = ppo_update(&mut net, &mut adam, &buf, ppo, &mut shuffle)?;
        curve.push(CurvePoint {
            update,
            env_steps,
            episodes: w.episodes,
            mean_return: if w.episodes == 0 {
                f64::NAN
            } else {
                w.return_sum / w.episodes as f64
            },
            goals: w.goals,
            depletions: w.depletions,
            tool_depletions: w.tool_depletions,
            timeouts: w.timeouts,
            overrides: w.overrides,
            activations: w.activations,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            clip_fraction: stats.clip_fraction,
            approx_kl: stats.approx_kl,
        });
        updates.push(stats);
    }
    Ok(TrainOutcome { net, curve, updates })
}
