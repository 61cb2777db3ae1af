//! The decision process: one [`Episode`] per rollout, stepping through
//! shield screening, tool activation, motion, energy charges and reward.

mod baselines;
mod observation;

use serde::{Deserialize, Serialize};

pub use baselines::{baseline_policy, heading_to_goal, BaselineKind, UnknownBaseline};
pub use observation::{observation_len, DecodedObservation, Observation, HEADER_LEN, PER_SERVER_LEN};

use crate::dynamics::{apply_correction, goal_reached, step_motion, Action, UavState};
use crate::energy::{flight_cost, tool_cost, EnergyCategory, EnergyLedger};
use crate::shield::{screen, ShieldVerdict};
use crate::world::rng::{labels, RngStream};
use crate::world::{in_range, ToolKind, ToolServer, WorldConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardParams {
    /// Reward per meter of believed progress toward the goal.
    pub w_progress: f64,
    /// Cost per step.
    pub w_time: f64,
    /// Cost per joule.
    pub w_energy: f64,
    pub r_goal: f64,
    pub r_crash: f64,
    pub rho_shield: f64,
    /// Penalty for activating with no server in range.
    pub rho_waste: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            w_progress: 1.0,
            w_time: 1.0,
            w_energy: 0.01,
            r_goal: 200.0,
            r_crash: 200.0,
            rho_shield: 5.0,
            rho_waste: 1.0,
        }
    }
}

impl RewardParams {
    pub(crate) fn validate(&self) -> Result<(), String> {
        let non_neg = [
            ("w_time", self.w_time),
            ("w_energy", self.w_energy),
            ("rho_shield", self.rho_shield),
            ("rho_waste", self.rho_waste),
        ];
        for (name, v) in non_neg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("reward_params.{name} must be >= 0 (got {v})"));
            }
        }
        for (name, v) in [("r_goal", self.r_goal), ("r_crash", self.r_crash)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("reward_params.{name} must be > 0 (got {v})"));
            }
        }
        if !self.w_progress.is_finite() {
            return Err("reward_params.w_progress must be finite".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminationCause {
    Running,
    Goal,
    Depleted,
    Timeout,
}

/// Signed reward terms of one step. The step reward is their sum in field
/// order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardComponents {
    pub progress: f64,
    pub time: f64,
    pub energy: f64,
    pub shield: f64,
    pub waste: f64,
    pub terminal: f64,
}

impl RewardComponents {
    pub fn total(&self) -> f64 {
        self.progress + self.time + self.energy + self.shield + self.waste + self.terminal
    }
}

/// Joules charged in one step, by category.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepCharges {
    pub flight: f64,
    pub transmission: f64,
    pub compute: f64,
}

impl StepCharges {
    pub fn total(&self) -> f64 {
        self.flight + self.transmission + self.compute
    }

    fn add(&mut self, category: EnergyCategory, joules: f64) {
        match category {
            EnergyCategory::Flight => self.flight += joules,
            EnergyCategory::Transmission => self.transmission += joules,
            EnergyCategory::Compute => self.compute += joules,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub overridden: bool,
    pub predicted_call_cost: Option<f64>,
    /// Server whose tool was called (and charged) this step.
    pub server: Option<usize>,
    pub server_kind: Option<ToolKind>,
    /// Believed distance to the called server.
    pub activation_distance: Option<f64>,
    /// The call was charged but the true position was outside the
    /// server's range, so no correction happened.
    pub missed: bool,
    pub charges: StepCharges,
    /// Guidance steps left before this step.
    pub guidance_before: u32,
    /// Some server was in believed range before this step.
    pub server_available: bool,
    /// The step's charge emptied the battery and it was a tool charge.
    pub depleted_by_tool: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub step: u32,
    /// Observation after the step.
    pub observation: Observation,
    /// Executed action (clamped, after the shield).
    pub action: Action,
    /// Action as proposed by the policy, before clamping and screening.
    pub proposed: Action,
    pub reward: f64,
    pub components: RewardComponents,
    pub done: bool,
    pub cause: TerminationCause,
    pub info: StepInfo,
}

/// Nearest server within believed range; ties go to the lowest index.
pub fn resolve_server<'a>(state: &UavState, cfg: &'a WorldConfig) -> Option<&'a ToolServer> {
    let b = state.pos_believed;
    let mut best: Option<(&ToolServer, f64)> = None;
    for s in &cfg.servers {
        if !in_range(s, b) {
            continue;
        }
        let d = b.distance(s.position);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((s, d));
        }
    }
    best.map(|(s, _)| s)
}

/// A running episode: the concrete scenario, state, ledger and drift stream.
#[derive(Debug, Clone)]
pub struct Episode {
    cfg: WorldConfig,
    state: UavState,
    ledger: EnergyLedger,
    dynamics_rng: RngStream,
    episode_index: u64,
    done: bool,
    cause: TerminationCause,
    episode_return: f64,
}

impl Episode {
    /// Starts episode `episode_index` of `cfg`. Drift and (when enabled)
    /// layout streams derive from `(cfg.seed, episode_index)`.
    pub fn reset(cfg: &WorldConfig, episode_index: u64) -> (Self, Observation) {
        let cfg = cfg.episode_layout(cfg.seed, episode_index).into_owned();
        let state = UavState::at_start(&cfg);
        let obs = Observation::encode(&state, &cfg);
        let ep = Self {
            ledger: EnergyLedger::new(cfg.initial_energy),
            dynamics_rng: RngStream::new(cfg.seed, labels::DYNAMICS, episode_index),
            cfg,
            state,
            episode_index,
            done: false,
            cause: TerminationCause::Running,
            episode_return: 0.0,
        };
        (ep, obs)
    }

    pub fn config(&self) -> &WorldConfig {
        &self.cfg
    }

    pub fn state(&self) -> &UavState {
        &self.state
    }

    pub fn ledger(&self) -> &EnergyLedger {
        &self.ledger
    }

    pub fn episode_index(&self) -> u64 {
        self.episode_index
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn cause(&self) -> TerminationCause {
        self.cause
    }

    /// Undiscounted return accumulated so far.
    pub fn episode_return(&self) -> f64 {
        self.episode_return
    }

    pub fn observation(&self) -> Observation {
        Observation::encode(&self.state, &self.cfg)
    }

    /// Advances one step. Stepping a finished episode is a contract
    /// violation.
    pub fn step(&mut self, proposed: Action, shield_on: bool) -> Transition {
        assert!(!self.done, "step called on a finished episode");
        let cfg = &self.cfg;
        let rp = &cfg.reward_params;
        let step = self.state.steps_elapsed;
        let clamped = proposed.clamped(cfg.v_max);
        let verdict = if shield_on {
            screen(clamped, &self.state, cfg)
        } else {
            ShieldVerdict::pass(clamped, None)
        };
        let action = verdict.final_action;

        let d_prev = self.state.pos_believed.distance(cfg.goal_pos);
        let guidance_before = self.state.guidance_left;
        let available = resolve_server(&self.state, cfg);
        let mut info = StepInfo {
            overridden: verdict.overridden,
            predicted_call_cost: verdict.predicted_call_cost,
            server: None,
            server_kind: None,
            activation_distance: None,
            missed: false,
            charges: StepCharges::default(),
            guidance_before,
            server_available: available.is_some(),
            depleted_by_tool: false,
        };

        let mut waste = 0.0;
        let mut depleted = false;
        if action.activate {
            match available {
                None => waste = -rp.rho_waste,
                Some(server) => {
                    let cost = tool_cost(server, self.state.pos_believed, &cfg.energy_params);
                    let category = EnergyCategory::for_tool(server.kind);
                    let charge = self.ledger.charge(step, category, cost);
                    info.charges.add(category, charge.recorded);
                    self.state.energy = self.ledger.remaining();
                    info.server = Some(server.index);
                    info.server_kind = Some(server.kind);
                    info.activation_distance = Some(self.state.pos_believed.distance(server.position));
                    if in_range(server, self.state.pos_true) {
                        self.state = apply_correction(&self.state, server);
                    } else {
                        info.missed = true;
                    }
                    depleted = charge.depleted;
                    info.depleted_by_tool = charge.depleted;
                }
            }
        }

        let mut reached = false;
        if !depleted {
            self.state = step_motion(&self.state, action.velocity, cfg, &mut self.dynamics_rng);
            let fc = flight_cost(action.velocity, &cfg.energy_params, cfg.dt);
            let charge = self.ledger.charge(step, EnergyCategory::Flight, fc);
            info.charges.add(EnergyCategory::Flight, charge.recorded);
            self.state.energy = self.ledger.remaining();
            depleted = charge.depleted;
            reached = goal_reached(&self.state, cfg);
        }

        let cause = if reached {
            TerminationCause::Goal
        } else if depleted {
            TerminationCause::Depleted
        } else if self.state.steps_elapsed >= cfg.max_steps {
            TerminationCause::Timeout
        } else {
            TerminationCause::Running
        };
        let d_now = self.state.pos_believed.distance(cfg.goal_pos);
        let components = RewardComponents {
            progress: rp.w_progress * (d_prev - d_now),
            time: -rp.w_time,
            energy: -rp.w_energy * info.charges.total(),
            shield: verdict.penalty,
            waste,
            terminal: match cause {
                TerminationCause::Goal => rp.r_goal,
                TerminationCause::Depleted => -rp.r_crash,
                _ => 0.0,
            },
        };
        let reward = components.total();
        self.episode_return += reward;
        self.done = cause != TerminationCause::Running;
        self.cause = cause;

        Transition {
            step,
            observation: Observation::encode(&self.state, &self.cfg),
            action,
            proposed,
            reward,
            components,
            done: self.done,
            cause,
            info,
        }
    }
}
