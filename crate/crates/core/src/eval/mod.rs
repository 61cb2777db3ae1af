//! Common evaluation protocol for scripted and learned policies.

mod compare;
pub mod stats;

use serde::{Deserialize, Serialize};

pub use compare::{compare, CompareError, Comparison, PairTest};

use crate::dynamics::{Action, UavState};
use crate::energy::EnergyCategory;
use crate::env::{baseline_policy, BaselineKind, Episode, Observation, TerminationCause, Transition};
use crate::learner::policy::{deterministic_from, sample_from};
use crate::learner::PolicyNet;
use crate::world::rng::{labels, RngStream};
use crate::world::{ToolKind, WorldConfig};

pub trait Policy {
    fn name(&self) -> String;

    /// Called before each episode so per-episode randomness can be keyed
    /// by episode index rather than by call order.
    fn begin_episode(&mut self, _seed: u64, _episode_index: u64) {}

    fn act(&mut self, obs: &Observation, state: &UavState, cfg: &WorldConfig) -> Action;
}

pub struct ScriptedPolicy {
    kind: BaselineKind,
    rng: RngStream,
}

impl ScriptedPolicy {
    pub fn new(kind: BaselineKind) -> Self {
        Self {
            kind,
            rng: RngStream::new(0, labels::BASELINE, 0),
        }
    }
}

impl Policy for ScriptedPolicy {
    fn name(&self) -> String {
        self.kind.name().to_string()
    }

    fn begin_episode(&mut self, seed: u64, episode_index: u64) {
        self.rng = RngStream::new(seed, labels::BASELINE, episode_index);
    }

    fn act(&mut self, obs: &Observation, state: &UavState, cfg: &WorldConfig) -> Action {
        baseline_policy(self.kind, obs, state, cfg, &mut self.rng)
    }
}

/// A trained network. Deterministic mode flies the velocity mean and
/// activates iff the activation probability exceeds one half.
pub struct LearnedPolicy {
    name: String,
    net: PolicyNet,
    stochastic: bool,
    rng: RngStream,
}

impl LearnedPolicy {
    pub fn new(name: impl Into<String>, net: PolicyNet, stochastic: bool) -> Self {
        Self {
            name: name.into(),
            net,
            stochastic,
            rng: RngStream::new(0, labels::POLICY, 0),
        }
    }

    pub fn net(&self) -> &PolicyNet {
        &self.net
    }
}

impl Policy for LearnedPolicy {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn begin_episode(&mut self, seed: u64, episode_index: u64) {
        self.rng = RngStream::new(seed, labels::POLICY, episode_index);
    }

    fn act(&mut self, obs: &Observation, _state: &UavState, cfg: &WorldConfig) -> Action {
        let heads = self
            .net
            .forward(obs.as_slice())
            .expect("observation length matches the network");
        let sample = if self.stochastic {
            sample_from(&heads, &mut self.rng)
        } else {
            deterministic_from(&heads)
        };
        sample.to_action(cfg.v_max)
    }
}

/// Per-episode outcome, in episode-index order inside a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: u64,
    pub episode_return: f64,
    pub length: u32,
    pub cause: TerminationCause,
    pub energy_flight: f64,
    pub energy_transmission: f64,
    pub energy_compute: f64,
    pub activations_standard: u32,
    pub activations_semantic: u32,
    pub overrides: u32,
    pub missed: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub scenario_fingerprint: u64,
    pub seed: u64,
    pub shield: bool,
    pub episodes: usize,
    pub mean_return: f64,
    pub std_return: f64,
    /// 95% interval of the mean; absent below 30 episodes.
    pub ci95: Option<(f64, f64)>,
    pub success_rate: f64,
    pub crash_rate: f64,
    pub timeout_rate: f64,
    pub mean_length: f64,
    pub mean_energy_flight: f64,
    pub mean_energy_transmission: f64,
    pub mean_energy_compute: f64,
    pub activations_standard: u64,
    pub activations_semantic: u64,
    /// Believed distance to the called server, over executed calls only.
    pub mean_activation_distance_standard: Option<f64>,
    pub mean_activation_distance_semantic: Option<f64>,
    /// The same distances divided by the server's range.
    pub mean_activation_ratio_standard: Option<f64>,
    pub mean_activation_ratio_semantic: Option<f64>,
    /// Calls made while guidance was still valid, over steps where guidance
    /// was valid and a server was in range.
    pub redundant_activation_rate: Option<f64>,
    pub redundant_activations: u64,
    pub redundant_opportunities: u64,
    pub overrides: u64,
    /// Per-episode returns and per-call distances, kept for rank tests and
    /// pooling.
    pub returns: Vec<f64>,
    pub activation_distances_standard: Vec<f64>,
    pub activation_distances_semantic: Vec<f64>,
    pub activation_ratios_standard: Vec<f64>,
    pub activation_ratios_semantic: Vec<f64>,
    pub episode_summaries: Vec<EpisodeSummary>,
}

impl EvalReport {
    pub fn ci_defined(&self) -> bool {
        self.ci95.is_some()
    }
}

/// Raw per-episode and per-call data a report is aggregated from.
#[derive(Debug, Clone, Default)]
struct Tally {
    summaries: Vec<EpisodeSummary>,
    dist_std: Vec<f64>,
    dist_sem: Vec<f64>,
    ratios_std: Vec<f64>,
    ratios_sem: Vec<f64>,
    redundant: u64,
    opportunities: u64,
}

impl Tally {
    fn absorb(&mut self, r: &EvalReport) {
        self.summaries.extend(r.episode_summaries.iter().cloned());
        self.dist_std.extend(&r.activation_distances_standard);
        self.dist_sem.extend(&r.activation_distances_semantic);
        self.ratios_std.extend(&r.activation_ratios_standard);
        self.ratios_sem.extend(&r.activation_ratios_semantic);
        self.redundant += r.redundant_activations;
        self.opportunities += r.redundant_opportunities;
    }

    fn finish(self, method: String, scenario_fingerprint: u64, seed: u64, shield: bool) -> EvalReport {
        let summaries = self.summaries;
        let n = summaries.len().max(1) as f64;
        let rate = |c: TerminationCause| summaries.iter().filter(|s| s.cause == c).count() as f64 / n;
        let avg = |f: &dyn Fn(&EpisodeSummary) -> f64| summaries.iter().map(f).sum::<f64>() / n;
        let opt_mean = |xs: &[f64]| (!xs.is_empty()).then(|| stats::mean(xs));
        let returns: Vec<f64> = summaries.iter().map(|s| s.episode_return).collect();
        EvalReport {
            method,
            scenario_fingerprint,
            seed,
            shield,
            episodes: summaries.len(),
            mean_return: stats::mean(&returns),
            std_return: stats::std_dev(&returns),
            ci95: stats::mean_ci95(&returns),
            success_rate: rate(TerminationCause::Goal),
            crash_rate: rate(TerminationCause::Depleted),
            timeout_rate: rate(TerminationCause::Timeout),
            mean_length: avg(&|s| f64::from(s.length)),
            mean_energy_flight: avg(&|s| s.energy_flight),
            mean_energy_transmission: avg(&|s| s.energy_transmission),
            mean_energy_compute: avg(&|s| s.energy_compute),
            activations_standard: summaries.iter().map(|s| u64::from(s.activations_standard)).sum(),
            activations_semantic: summaries.iter().map(|s| u64::from(s.activations_semantic)).sum(),
            mean_activation_distance_standard: opt_mean(&self.dist_std),
            mean_activation_distance_semantic: opt_mean(&self.dist_sem),
            mean_activation_ratio_standard: opt_mean(&self.ratios_std),
            mean_activation_ratio_semantic: opt_mean(&self.ratios_sem),
            redundant_activation_rate: (self.opportunities > 0)
                .then(|| self.redundant as f64 / self.opportunities as f64),
            redundant_activations: self.redundant,
            redundant_opportunities: self.opportunities,
            overrides: summaries.iter().map(|s| u64::from(s.overrides)).sum(),
            returns,
            activation_distances_standard: self.dist_std,
            activation_distances_semantic: self.dist_sem,
            activation_ratios_standard: self.ratios_std,
            activation_ratios_semantic: self.ratios_sem,
            episode_summaries: summaries,
        }
    }
}

/// Merges reports of one method (typically one per seed) into a single
/// report over all their episodes. The seed of the first report is kept.
pub fn pool(reports: &[EvalReport]) -> Option<EvalReport> {
    let first = reports.first()?;
    let mut tally = Tally::default();
    for r in reports {
        tally.absorb(r);
    }
    let shield = reports.iter().all(|r| r.shield);
    Some(tally.finish(first.method.clone(), first.scenario_fingerprint, first.seed, shield))
}

/// Runs `n_episodes` episodes (indices `0..n`) of `policy` on `cfg` reseeded
/// with `seed`.
pub fn evaluate(policy: &mut dyn Policy, cfg: &WorldConfig, n_episodes: usize, seed: u64, shield_on: bool) -> EvalReport {
    evaluate_observed(policy, cfg, n_episodes, seed, shield_on, &mut |_, _| {})
}

/// [`evaluate`] with a callback after every step, given the episode in its
/// post-step state.
pub fn evaluate_observed(
    policy: &mut dyn Policy,
    cfg: &WorldConfig,
    n_episodes: usize,
    seed: u64,
    shield_on: bool,
    on_step: &mut dyn FnMut(&Episode, &Transition),
) -> EvalReport {
    let fingerprint = cfg.fingerprint();
    let cfg = cfg.clone().with_seed(seed);
    let mut tally = Tally::default();
    for k in 0..n_episodes as u64 {
        policy.begin_episode(seed, k);
        let (mut ep, mut obs) = Episode::reset(&cfg, k);
        let mut s = EpisodeSummary {
            episode: k,
            episode_return: 0.0,
            length: 0,
            cause: TerminationCause::Running,
            energy_flight: 0.0,
            energy_transmission: 0.0,
            energy_compute: 0.0,
            activations_standard: 0,
            activations_semantic: 0,
            overrides: 0,
            missed: 0,
        };
        while !ep.is_done() {
            let action = policy.act(&obs, ep.state(), ep.config());
            let t = ep.step(action, shield_on);
            on_step(&ep, &t);
            let info = &t.info;
            s.overrides += u32::from(info.overridden);
            s.missed += u32::from(info.missed);
            if info.guidance_before > 0 && info.server_available {
                tally.opportunities += 1;
                tally.redundant += u64::from(info.server.is_some());
            }
            if let (Some(idx), Some(d)) = (info.server, info.activation_distance) {
                let ratio = d / ep.config().servers[idx].range;
                match info.server_kind {
                    Some(ToolKind::Standard) => {
                        s.activations_standard += 1;
                        tally.dist_std.push(d);
                        tally.ratios_std.push(ratio);
                    }
                    Some(ToolKind::Semantic) => {
                        s.activations_semantic += 1;
                        tally.dist_sem.push(d);
                        tally.ratios_sem.push(ratio);
                    }
                    None => {}
                }
            }
            obs = t.observation;
        }
        s.episode_return = ep.episode_return();
        s.length = ep.state().steps_elapsed;
        s.cause = ep.cause();
        s.energy_flight = ep.ledger().total(EnergyCategory::Flight);
        s.energy_transmission = ep.ledger().total(EnergyCategory::Transmission);
        s.energy_compute = ep.ledger().total(EnergyCategory::Compute);
        tally.summaries.push(s);
    }
    tally.finish(policy.name(), fingerprint, seed, shield_on)
}
